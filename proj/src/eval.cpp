#include "flatnet/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "flatnet/errors.h"
#include "flatnet/kernels.h"

namespace flatnet {

namespace {

std::uint32_t be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (static_cast<std::uint32_t>(bytes[at]) << 24) |
         (static_cast<std::uint32_t>(bytes[at + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 8) | bytes[at + 3];
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string format_fixed(double value, int precision) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  return buf;
}

LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes) {
  // Magic first, so swapped files are reported as such even when short.
  if (image_bytes.size() < 4) throw FormatError("IDX images: header truncated");
  if (label_bytes.size() < 4) throw FormatError("IDX labels: header truncated");
  const std::uint32_t image_magic = be32(image_bytes, 0);
  if (image_magic != kIdxImageMagic) {
    throw FormatError("IDX images: magic " + hex32(image_magic) + ", expected " +
                      hex32(kIdxImageMagic));
  }
  const std::uint32_t label_magic = be32(label_bytes, 0);
  if (label_magic != kIdxLabelMagic) {
    throw FormatError("IDX labels: magic " + hex32(label_magic) + ", expected " +
                      hex32(kIdxLabelMagic));
  }
  if (image_bytes.size() < 16) throw FormatError("IDX images: header truncated");
  if (label_bytes.size() < 8) throw FormatError("IDX labels: header truncated");
  const std::uint32_t n_images = be32(image_bytes, 4);
  const std::uint32_t rows = be32(image_bytes, 8);
  const std::uint32_t cols = be32(image_bytes, 12);
  const std::uint32_t n_labels = be32(label_bytes, 4);
  if (rows != kDigitSide || cols != kDigitSide) {
    throw FormatError("IDX images: dims " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", expected 28x28");
  }
  if (n_images != n_labels) {
    throw FormatError("IDX: " + std::to_string(n_images) + " images but " +
                      std::to_string(n_labels) + " labels");
  }
  const std::uint64_t plane = std::uint64_t{rows} * cols;
  if (image_bytes.size() - 16 != plane * n_images) {
    throw FormatError("IDX images: payload holds " + std::to_string(image_bytes.size() - 16) +
                      " bytes, header declares " + std::to_string(plane * n_images));
  }
  if (label_bytes.size() - 8 != n_labels) {
    throw FormatError("IDX labels: payload holds " + std::to_string(label_bytes.size() - 8) +
                      " bytes, header declares " + std::to_string(n_labels));
  }

  LabeledDataset ds;
  ds.images.reserve(n_images);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    const auto first = image_bytes.begin() + static_cast<std::ptrdiff_t>(16 + i * plane);
    ds.images.emplace_back(cols, rows,
                           std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(plane)));
  }
  ds.labels.assign(label_bytes.begin() + 8, label_bytes.end());
  return ds;
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  try {
    return parse_idx(image_bytes, label_bytes);
  } catch (const FormatError& e) {
    throw FormatError(images.string() + " / " + labels.string() + ": " + e.what());
  }
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const bool> positives) {
  if (scores.size() != positives.size()) {
    throw std::invalid_argument("roc_points: scores and labels differ in length");
  }
  const auto pos = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
  const std::size_t neg = positives.size() - pos;
  if (pos == 0 || neg == 0) {
    throw DegenerateInputError("roc_points: need at least one positive and one negative sample");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });

  std::vector<RocPoint> out{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (positives[order[i]] ? tp : fp) += 1;
    }
    out.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  if (out.back() != RocPoint{1.0, 1.0}) out.push_back({1.0, 1.0});
  return out;
}

double auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

EvalReport summarize(std::size_t num_classes, std::span<const std::uint8_t> labels,
                     std::span<const std::size_t> predicted, std::span<const float> scores) {
  const std::size_t n = labels.size();
  if (predicted.size() != n || scores.size() != n * num_classes) {
    throw std::invalid_argument("summarize: labels, predictions and scores disagree in size");
  }
  EvalReport report;
  report.num_classes = num_classes;
  report.sample_count = n;
  report.confusion.assign(num_classes * num_classes, 0);
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= num_classes || predicted[i] >= num_classes) {
      throw std::invalid_argument("summarize: sample " + std::to_string(i) +
                                  " has a class outside [0, " + std::to_string(num_classes) + ")");
    }
    ++report.confusion[labels[i] * num_classes + predicted[i]];
    if (labels[i] == predicted[i]) ++correct;
  }
  report.accuracy = n == 0 ? 0.0 : static_cast<double>(correct) / n;

  report.roc.resize(num_classes);
  report.auc.assign(num_classes, std::nan(""));
  std::vector<double> class_scores(n);
  std::unique_ptr<bool[]> positive(new bool[n]);
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      class_scores[i] = scores[i * num_classes + k];
      positive[i] = labels[i] == k;
      pos += positive[i];
    }
    if (pos == 0 || pos == n) continue;
    report.roc[k] = roc_points(class_scores, std::span<const bool>(positive.get(), n));
    report.auc[k] = auc(report.roc[k]);
  }
  return report;
}

EvalReport evaluate(const NetworkSpec& spec, const WeightSet& weights, const ModelMetadata& meta,
                    const LabeledDataset& dataset, const EvalOptions& options) {
  if (const auto check = validate(weights, spec); !check.ok()) {
    throw ValidationError("evaluate: " + check.message());
  }
  if (dataset.images.size() != dataset.labels.size()) {
    throw std::invalid_argument("evaluate: dataset has mismatched image/label counts");
  }
  const std::size_t n = options.limit ? std::min(*options.limit, dataset.size()) : dataset.size();
  const std::size_t classes = spec.num_classes;

  for (std::size_t i = 0; i < n; ++i) {
    if (dataset.labels[i] >= classes) {
      throw FormatError("evaluate: label " + std::to_string(dataset.labels[i]) + " of sample " +
                        std::to_string(i) + " exceeds the class count");
    }
  }

  std::vector<std::size_t> predicted(n);
  std::vector<float> scores(n * classes);

  std::size_t workers = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));

  const auto run = [&](std::size_t begin, std::size_t end) {
    Workspace ws(spec);
    for (std::size_t i = begin; i < end; ++i) {
      const auto input = image_to_input(dataset.images[i], meta);
      const auto p = predict(spec, weights, input, &ws);
      if (p.probabilities.size() != classes) {
        throw std::invalid_argument("evaluate: network emits " +
                                    std::to_string(p.probabilities.size()) + " scores for " +
                                    std::to_string(classes) + " classes");
      }
      predicted[i] = p.label;
      std::copy(p.probabilities.begin(), p.probabilities.end(),
                scores.begin() + static_cast<std::ptrdiff_t>(i * classes));
    }
  };

  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          run(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  return summarize(classes, std::span(dataset.labels).first(n), predicted, scores);
}

std::string confusion_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "true\\pred";
  for (std::size_t k = 0; k < report.num_classes; ++k) out << ',' << k;
  out << '\n';
  for (std::size_t t = 0; t < report.num_classes; ++t) {
    out << t;
    for (std::size_t p = 0; p < report.num_classes; ++p) out << ',' << report.confusion_at(t, p);
    out << '\n';
  }
  return out.str();
}

std::string roc_csv(const std::vector<RocPoint>& points) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : points) out += format_fixed(p.fpr) + "," + format_fixed(p.tpr) + "\n";
  return out;
}

std::string summary_csv(const EvalReport& report) {
  std::string out = "metric,value\n";
  out += "samples," + std::to_string(report.sample_count) + "\n";
  out += "accuracy," + format_fixed(report.accuracy) + "\n";
  for (std::size_t k = 0; k < report.num_classes; ++k) {
    out += "auc_class_" + std::to_string(k) + "," + format_fixed(report.auc[k]) + "\n";
  }
  return out;
}

std::string report_svg(const EvalReport& report) {
  const std::size_t k = report.num_classes;
  constexpr double cell = 32.0;
  constexpr double margin = 40.0;
  constexpr double plot = 320.0;
  const double grid = cell * static_cast<double>(k);
  const double plot_x = margin * 2 + grid;
  const double width = plot_x + plot + margin;
  const double height = margin * 2 + std::max(grid, plot);

  std::uint64_t peak = 1;
  for (auto c : report.confusion) peak = std::max(peak, c);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_fixed(width, 0)
      << "\" height=\"" << format_fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << format_fixed(margin, 1) << "\" y=\"20\" font-size=\"12\">Confusion matrix (accuracy "
      << format_fixed(report.accuracy, 4) << ", n=" << report.sample_count << ")</text>\n";
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      const auto count = report.confusion_at(t, p);
      const int shade = 255 - static_cast<int>(std::lround(215.0 * count / peak));
      const double x = margin + cell * p;
      const double y = margin + cell * t;
      svg << "<rect x=\"" << format_fixed(x, 1) << "\" y=\"" << format_fixed(y, 1)
          << "\" width=\"" << format_fixed(cell, 1) << "\" height=\"" << format_fixed(cell, 1)
          << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#999\"/>\n";
      svg << "<text x=\"" << format_fixed(x + cell / 2, 1) << "\" y=\"" << format_fixed(y + cell / 2 + 3, 1)
          << "\" text-anchor=\"middle\">" << count << "</text>\n";
    }
  }

  svg << "<text x=\"" << format_fixed(plot_x, 1) << "\" y=\"20\" font-size=\"12\">ROC (one-vs-rest)</text>\n";
  svg << "<rect x=\"" << format_fixed(plot_x, 1) << "\" y=\"" << format_fixed(margin, 1) << "\" width=\""
      << format_fixed(plot, 1) << "\" height=\"" << format_fixed(plot, 1)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t c = 0; c < k; ++c) {
    if (report.roc[c].empty()) continue;
    const int hue = static_cast<int>(360 * c / k);
    svg << "<polyline fill=\"none\" stroke=\"hsl(" << hue << ",70%,45%)\" points=\"";
    for (std::size_t i = 0; i < report.roc[c].size(); ++i) {
      const auto& pt = report.roc[c][i];
      svg << (i ? " " : "") << format_fixed(plot_x + pt.fpr * plot, 2) << ","
          << format_fixed(margin + (1.0 - pt.tpr) * plot, 2);
    }
    svg << "\"><title>class " << c << " AUC " << format_fixed(report.auc[c], 4)
        << "</title></polyline>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> write_report(const EvalReport& report,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  const auto emit = [&](const std::string& name, const std::string& text) {
    written.push_back(out_dir / name);
    write_text(written.back(), text);
  };
  emit("confusion.csv", confusion_csv(report));
  for (std::size_t k = 0; k < report.num_classes; ++k) {
    emit("roc_class_" + std::to_string(k) + ".csv", roc_csv(report.roc[k]));
  }
  emit("summary.csv", summary_csv(report));
  emit("report.svg", report_svg(report));
  return written;
}

std::vector<PerturbationOutcome> run_perturbations(const NetworkSpec& spec,
                                                   const WeightSet& weights,
                                                   const ModelMetadata& meta,
                                                   std::span<const PerturbationCase> cases) {
  std::vector<PerturbationOutcome> out;
  Workspace ws(spec);
  for (const auto& c : cases) {
    if (c.original.width != c.perturbed.width || c.original.height != c.perturbed.height) {
      throw std::invalid_argument("perturbation '" + c.scenario + "': image sizes differ");
    }
    const auto before = predict(spec, weights, image_to_input(c.original, meta), &ws);
    const auto after = predict(spec, weights, image_to_input(c.perturbed, meta), &ws);
    PerturbationOutcome o;
    o.scenario = c.scenario;
    o.original_class = before.label;
    o.original_probability = before.probabilities[before.label];
    o.perturbed_class = after.label;
    o.perturbed_probability = after.probabilities[after.label];
    for (std::size_t i = 0; i < c.original.pixels.size(); ++i) {
      o.changed_pixels += c.original.pixels[i] != c.perturbed.pixels[i];
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::string perturbation_csv(std::span<const PerturbationOutcome> outcomes) {
  std::string out(kPerturbationCsvHeader);
  out += '\n';
  for (const auto& o : outcomes) {
    out += o.scenario + "," + std::to_string(o.original_class) + "," +
           format_fixed(o.original_probability) + "," + std::to_string(o.perturbed_class) + "," +
           format_fixed(o.perturbed_probability) + "," + std::to_string(o.changed_pixels) + "," +
           (o.prediction_changed() ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace flatnet

namespace flatnet {

std::vector<ParityFixture> parse_fixtures(std::string_view csv, std::size_t input_size,
                                          std::size_t num_classes) {
  const std::size_t expected_fields = 1 + input_size + num_classes + 1;
  std::vector<ParityFixture> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    auto eol = csv.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv.size();
    std::string_view line = csv.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1 && line.starts_with("input_id")) continue;

    const auto fail = [&](const std::string& what) {
      return FormatError("fixtures line " + std::to_string(line_no) + ": " + what);
    };
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != expected_fields) {
      throw fail(std::to_string(fields.size()) + " fields, expected " +
                 std::to_string(expected_fields));
    }
    const auto number = [&](std::string_view f) {
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw fail("bad number '" + std::string(f) + "'");
      }
      return v;
    };
    ParityFixture fx;
    fx.input_id = std::string(fields[0]);
    for (std::size_t i = 0; i < input_size; ++i) fx.input.push_back(number(fields[1 + i]));
    for (std::size_t k = 0; k < num_classes; ++k) {
      fx.logits.push_back(number(fields[1 + input_size + k]));
    }
    const auto label_text = fields.back();
    const auto [ptr, ec] =
        std::from_chars(label_text.data(), label_text.data() + label_text.size(), fx.label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size() || fx.label >= num_classes) {
      throw fail("bad class '" + std::string(label_text) + "'");
    }
    out.push_back(std::move(fx));
  }
  return out;
}

std::vector<ParityFixture> read_fixtures(const std::filesystem::path& path, std::size_t input_size,
                                         std::size_t num_classes) {
  const auto bytes = read_file(path);
  try {
    return parse_fixtures(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                          input_size, num_classes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ParityReport check_parity(const NetworkSpec& spec, const WeightSet& weights,
                          std::span<const ParityFixture> fixtures) {
  ParityReport report;
  Workspace ws(spec);
  for (const auto& fx : fixtures) {
    const auto p = predict(spec, weights, fx.input, &ws);
    if (p.logits.size() != fx.logits.size()) {
      throw std::invalid_argument("check_parity: fixture " + fx.input_id + " has " +
                                  std::to_string(fx.logits.size()) + " logits, network emits " +
                                  std::to_string(p.logits.size()));
    }
    ++report.count;
    report.class_agreement += p.label == fx.label;
    for (std::size_t k = 0; k < p.logits.size(); ++k) {
      const double diff = std::abs(static_cast<double>(p.logits[k]) - fx.logits[k]);
      if (diff > report.max_abs_logit_diff || report.worst_input.empty()) {
        report.max_abs_logit_diff = std::max(report.max_abs_logit_diff, diff);
        report.worst_input = fx.input_id;
      }
    }
  }
  return report;
}

}  // namespace flatnet
