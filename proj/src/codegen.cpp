#include "flatnet/codegen.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flatnet/errors.h"

namespace flatnet {

namespace {

enum class Slot { name, len, values };

// A block template split as literal[0] slot[0] literal[1] slot[1] ... literal[3].
struct BlockPattern {
  std::array<std::string, 4> literals;
  std::array<Slot, 3> slots{};
};

BlockPattern split_block(const std::string& block) {
  std::array<std::pair<std::size_t, Slot>, 3> found{{
      {block.find(kArrayName), Slot::name},
      {block.find(kArrayLen), Slot::len},
      {block.find(kArrayValues), Slot::values},
  }};
  std::sort(found.begin(), found.end());
  BlockPattern p;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto [at, slot] = found[i];
    p.literals[i] = block.substr(pos, at - pos);
    p.slots[i] = slot;
    const std::size_t width = slot == Slot::name  ? kArrayName.size()
                              : slot == Slot::len ? kArrayLen.size()
                                                  : kArrayValues.size();
    pos = at + width;
  }
  p.literals[3] = block.substr(pos);
  return p;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

float parse_float(std::string_view token, std::size_t block) {
  float v = 0.0f;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw FormatError("codegen block " + std::to_string(block) + ": bad value '" +
                      std::string(token) + "'");
  }
  return v;
}

}  // namespace

CodegenTemplate parse_template(std::string_view text) {
  CodegenTemplate tmpl;
  std::string* section = nullptr;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    const bool has_newline = eol != std::string_view::npos;
    if (!has_newline) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    const std::string_view raw = text.substr(pos, eol - pos + (has_newline ? 1 : 0));
    pos = eol + (has_newline ? 1 : 0);
    ++line_no;

    if (line.starts_with("@@#")) continue;
    if (line.starts_with("@@")) {
      const auto directive = trim(line.substr(2));
      if (directive == "header") {
        section = &tmpl.file_header;
      } else if (directive == "block") {
        section = &tmpl.per_array_block;
      } else if (directive == "footer") {
        section = &tmpl.file_footer;
      } else if (directive.starts_with("separator")) {
        try {
          tmpl.value_separator =
              nlohmann::json::parse(trim(directive.substr(9))).get<std::string>();
        } catch (const nlohmann::json::exception&) {
          throw FormatError("template line " + std::to_string(line_no) +
                            ": @@separator needs a JSON string literal");
        }
        section = nullptr;
      } else {
        throw FormatError("template line " + std::to_string(line_no) + ": unknown directive '" +
                          std::string(line) + "'");
      }
      continue;
    }
    if (section == nullptr) {
      if (trim(line).empty()) continue;
      throw FormatError("template line " + std::to_string(line_no) + ": text outside a section");
    }
    section->append(raw);
  }
  check_template(tmpl);
  return tmpl;
}

CodegenTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_template(text.str());
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check_template(const CodegenTemplate& tmpl) {
  for (auto ph : {kArrayName, kArrayLen, kArrayValues}) {
    const auto n = count_occurrences(tmpl.per_array_block, ph);
    if (n != 1) {
      throw std::invalid_argument("template block must contain " + std::string(ph) +
                                  " exactly once (found " + std::to_string(n) + ")");
    }
  }
  const auto pattern = split_block(tmpl.per_array_block);
  if (pattern.literals[1].empty() || pattern.literals[2].empty()) {
    throw std::invalid_argument("template placeholders must be separated by literal text");
  }
  if (pattern.literals[3].empty() && pattern.literals[0].empty()) {
    throw std::invalid_argument("template block needs literal text before or after its placeholders");
  }
  if (tmpl.value_separator.empty()) throw std::invalid_argument("value separator is empty");
}

std::string sanitize_identifier(std::string_view name) {
  std::string out;
  out.reserve(name.size() + 1);
  for (char c : name) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '_';
    out.push_back(keep ? c : '_');
  }
  if (out.empty() || (out.front() >= '0' && out.front() <= '9')) out.insert(out.begin(), '_');
  return out;
}

std::string format_float(float value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string emit_source(const WeightSet& weights, const CodegenTemplate& tmpl) {
  check_template(tmpl);
  std::map<std::string, std::string> owner;
  std::vector<std::string> collisions;
  for (const auto& [name, tensor] : weights.tensors) {
    const auto id = sanitize_identifier(name);
    auto [it, inserted] = owner.emplace(id, name);
    if (!inserted) collisions.push_back("'" + it->second + "' and '" + name + "' -> " + id);
  }
  if (!collisions.empty()) {
    std::string msg = "emit_source: sanitized name collision: ";
    for (std::size_t i = 0; i < collisions.size(); ++i) msg += (i ? "; " : "") + collisions[i];
    throw std::invalid_argument(msg);
  }

  const auto pattern = split_block(tmpl.per_array_block);
  std::string out = tmpl.file_header;
  for (const auto& [name, tensor] : weights.tensors) {
    out += pattern.literals[0];
    for (std::size_t i = 0; i < 3; ++i) {
      switch (pattern.slots[i]) {
        case Slot::name: out += sanitize_identifier(name); break;
        case Slot::len: out += std::to_string(tensor.values.size()); break;
        case Slot::values:
          for (std::size_t v = 0; v < tensor.values.size(); ++v) {
            if (v) out += tmpl.value_separator;
            out += format_float(tensor.values[v]);
          }
          break;
      }
      out += pattern.literals[i + 1];
    }
  }
  out += tmpl.file_footer;
  return out;
}

WeightSet extract_constants(std::string_view source, const CodegenTemplate& tmpl) {
  check_template(tmpl);
  if (!source.starts_with(tmpl.file_header)) {
    throw FormatError("codegen: source does not begin with the template header");
  }
  if (source.size() < tmpl.file_header.size() + tmpl.file_footer.size() ||
      !source.ends_with(tmpl.file_footer)) {
    throw FormatError("codegen: source does not end with the template footer");
  }
  const std::string_view body = source.substr(
      tmpl.file_header.size(), source.size() - tmpl.file_header.size() - tmpl.file_footer.size());
  const auto pattern = split_block(tmpl.per_array_block);

  WeightSet out;
  std::size_t pos = 0;
  for (std::size_t block = 0; pos < body.size(); ++block) {
    const auto fail = [&](const std::string& what) -> FormatError {
      return FormatError("codegen block " + std::to_string(block) + ": " + what);
    };
    if (body.substr(pos, pattern.literals[0].size()) != pattern.literals[0]) {
      throw fail("does not start with the block template text");
    }
    pos += pattern.literals[0].size();

    std::array<std::string_view, 3> captured;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string& next = pattern.literals[i + 1];
      std::size_t end;
      if (!next.empty()) {
        end = body.find(next, pos);
      } else {
        // Trailing slot: runs until the next block starts or the body ends.
        end = body.find(pattern.literals[0], pos);
        if (end == std::string_view::npos) end = body.size();
      }
      if (end == std::string_view::npos) throw fail("unterminated placeholder");
      captured[i] = body.substr(pos, end - pos);
      pos = end + next.size();
    }

    std::string name;
    std::size_t declared = 0;
    std::string_view values_text;
    for (std::size_t i = 0; i < 3; ++i) {
      switch (pattern.slots[i]) {
        case Slot::name: name = std::string(trim(captured[i])); break;
        case Slot::len: {
          const auto t = trim(captured[i]);
          const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), declared);
          if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
            throw fail("bad array length '" + std::string(t) + "'");
          }
          break;
        }
        case Slot::values: values_text = captured[i]; break;
      }
    }
    if (name.empty()) throw fail("empty array name");

    Tensor tensor;
    if (!trim(values_text).empty()) {
      std::size_t start = 0;
      while (true) {
        const auto sep = values_text.find(tmpl.value_separator, start);
        const auto token = trim(values_text.substr(start, sep == std::string_view::npos
                                                              ? std::string_view::npos
                                                              : sep - start));
        tensor.values.push_back(parse_float(token, block));
        if (sep == std::string_view::npos) break;
        start = sep + tmpl.value_separator.size();
      }
    }
    if (tensor.values.size() != declared) {
      throw fail("array " + name + " declares " + std::to_string(declared) + " values but has " +
                 std::to_string(tensor.values.size()));
    }
    tensor.dims = {static_cast<std::uint32_t>(declared)};
    if (!out.tensors.emplace(name, std::move(tensor)).second) {
      throw fail("duplicate array " + name);
    }
  }
  return out;
}

WeightSet restore_layout(const WeightSet& extracted, const std::vector<TensorShape>& layout) {
  WeightSet out;
  std::size_t used = 0;
  for (const auto& want : layout) {
    const auto id = sanitize_identifier(want.name);
    auto it = extracted.tensors.find(id);
    if (it == extracted.tensors.end()) {
      throw FormatError("codegen: no array named " + id + " for tensor " + want.name);
    }
    Tensor t{want.dims, it->second.values};
    if (t.values.size() != t.element_count()) {
      throw FormatError("codegen: array " + id + " has " + std::to_string(t.values.size()) +
                        " values, tensor " + want.name + " needs " +
                        std::to_string(t.element_count()));
    }
    out.tensors.emplace(want.name, std::move(t));
    ++used;
  }
  if (used != extracted.tensors.size()) {
    throw FormatError("codegen: " + std::to_string(extracted.tensors.size() - used) +
                      " extracted arrays match no tensor in the layout");
  }
  return out;
}

std::vector<TensorShape> layout_of(const WeightSet& weights) {
  std::vector<TensorShape> out;
  for (const auto& [name, t] : weights.tensors) out.push_back({name, t.dims});
  return out;
}

}  // namespace flatnet
