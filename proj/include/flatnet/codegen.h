#pragma once

// Emits weights as constant-array source text through a user template, and
// parses such text back.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "flatnet/model.h"

namespace flatnet {

inline constexpr std::string_view kArrayName = "{{array_name}}";
inline constexpr std::string_view kArrayLen = "{{array_len}}";
inline constexpr std::string_view kArrayValues = "{{array_values}}";

struct CodegenTemplate {
  std::string file_header;
  std::string per_array_block;
  std::string file_footer;
  std::string value_separator = ", ";
};

/// Template files are plain text split into sections by directive lines:
///
///   @@header            following lines up to the next directive
///   @@block             one per tensor; holds the three placeholders
///   @@footer
///   @@separator ", "    JSON string literal on the directive line
///
/// Lines starting with "@@#" are comments. Missing sections are empty.
CodegenTemplate parse_template(std::string_view text);
CodegenTemplate load_template(const std::filesystem::path& path);

/// Throws std::invalid_argument unless each placeholder occurs exactly once
/// in the block, placeholders are separated by literal text, and the
/// separator is non-empty.
void check_template(const CodegenTemplate& tmpl);

/// Maps every character outside [A-Za-z0-9_] to '_' and prefixes '_' when the
/// name would start with a digit (or is empty).
std::string sanitize_identifier(std::string_view name);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_float(float value);

std::string emit_source(const WeightSet& weights, const CodegenTemplate& tmpl);

/// Recovers the arrays of emit_source output. Names come back sanitized and
/// every tensor is one-dimensional; use restore_layout to recover the
/// original names and dims. Throws FormatError naming the block ordinal.
WeightSet extract_constants(std::string_view source, const CodegenTemplate& tmpl);

/// Renames and reshapes extracted arrays to match `layout`. Throws
/// FormatError if a layout tensor is absent, has the wrong length, or an
/// extracted array matches no layout entry.
WeightSet restore_layout(const WeightSet& extracted, const std::vector<TensorShape>& layout);

/// Layout (names and dims) of an existing WeightSet.
std::vector<TensorShape> layout_of(const WeightSet& weights);

}  // namespace flatnet
