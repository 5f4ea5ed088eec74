#include "flatnet/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "flatnet/codegen.h"
#include "flatnet/errors.h"
#include "flatnet/eval.h"
#include "flatnet/model.h"
#include "flatnet/preprocess.h"
#include "flatnet/weights_io.h"

namespace flatnet {

namespace {

namespace fs = std::filesystem;

// Missing inputs and bad flag combinations; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path, const char* what) {
  std::error_code ec;
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path, ec)) {
    throw UsageError(std::string(what) + " not found: " + path.string());
  }
}

struct LoadedModel {
  WeightSet weights;
  ModelMetadata meta;
  NetworkSpec spec;
};

// Reads weights plus sidecar. An explicit --meta must exist; when the default
// sidecar is absent the defaults are used with num_classes taken from fc3.
LoadedModel load_model(const std::string& weights_path, const std::string& meta_path,
                       std::ostream& err) {
  require_file(weights_path, "weights file");
  const fs::path sidecar = meta_path.empty() ? metadata_path_for(weights_path) : fs::path(meta_path);
  if (!meta_path.empty()) require_file(sidecar, "metadata file");

  LoadedModel m;
  m.weights = read_weights(fs::path(weights_path));
  std::error_code ec;
  if (fs::is_regular_file(sidecar, ec)) {
    m.meta = read_metadata(sidecar);
  } else {
    err << "note: no metadata at " << sidecar.string() << ", using default scaling [0, 1]\n";
    if (auto it = m.weights.tensors.find("fc3.bias"); it != m.weights.tensors.end() &&
                                                      it->second.dims.size() == 1) {
      m.meta.num_classes = it->second.dims.front();
    }
  }
  if (m.meta.arch != "lenet5") {
    throw ValidationError("unsupported architecture '" + m.meta.arch + "'");
  }
  m.spec = lenet5_spec(m.meta.num_classes);
  if (const auto check = validate(m.weights, m.spec); !check.ok()) {
    throw ValidationError(weights_path + ": " + check.message());
  }
  check_metadata_matches(m.meta, m.weights);
  return m;
}

GrayImage load_image(const std::string& path, std::optional<std::size_t> width,
                     std::optional<std::size_t> height) {
  require_file(path, "image");
  if (width.has_value() != height.has_value()) {
    throw UsageError("--width and --height must be given together");
  }
  if (width) return read_raw_rgb(path, *width, *height);
  return read_pgm(path);
}

std::string prediction_line(std::size_t label, float probability) {
  return "class=" + std::to_string(label) + " p=" + format_fixed(probability, 4);
}

std::string dims_text(const std::vector<std::uint32_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + ")";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flattened-array LeNet-5 inference toolchain", "flatnet"};
  app.require_subcommand(1);

  std::string weights_path;
  std::string meta_path;
  std::optional<std::size_t> width;
  std::optional<std::size_t> height;

  auto* predict_cmd = app.add_subcommand("predict", "Classify one image");
  std::string image_path;
  predict_cmd->add_option("image", image_path, "PGM (P5) image, or raw RGB with --width/--height")
      ->required();
  predict_cmd->add_option("--weights", weights_path, "FLW1 weight file")->required();
  predict_cmd->add_option("--meta", meta_path, "Metadata sidecar (default: <weights>.json)");
  predict_cmd->add_option("--width", width, "Raw RGB image width");
  predict_cmd->add_option("--height", height, "Raw RGB image height");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on an IDX dataset and write a report");
  std::string images_path;
  std::string labels_path;
  std::string out_dir = "eval_report";
  std::optional<std::size_t> limit;
  std::size_t threads = 1;
  eval_cmd->add_option("--images", images_path, "IDX image file")->required();
  eval_cmd->add_option("--labels", labels_path, "IDX label file")->required();
  eval_cmd->add_option("--weights", weights_path, "FLW1 weight file")->required();
  eval_cmd->add_option("--meta", meta_path, "Metadata sidecar (default: <weights>.json)");
  eval_cmd->add_option("--out-dir", out_dir, "Report directory")->capture_default_str();
  eval_cmd->add_option("--limit", limit, "Evaluate only the first N samples")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)")
      ->capture_default_str();

  auto* codegen_cmd = app.add_subcommand("codegen", "Emit weights as constant-array source");
  std::string template_path;
  std::string out_path;
  codegen_cmd->add_option("--weights", weights_path, "FLW1 weight file")->required();
  codegen_cmd->add_option("--template", template_path, "Template file")->required();
  codegen_cmd->add_option("--out", out_path, "Output source file")->required();

  auto* inspect_cmd = app.add_subcommand("inspect", "List tensors and validate against LeNet-5");
  inspect_cmd->add_option("--weights", weights_path, "FLW1 weight file")->required();
  inspect_cmd->add_option("--meta", meta_path, "Metadata sidecar (default: <weights>.json)");

  auto* perturb_cmd = app.add_subcommand("perturb", "Build a perturbed image fixture");
  std::string mode;
  std::vector<std::string> inputs;
  std::optional<std::size_t> split_row;
  std::optional<std::size_t> line_row;
  int intensity = 255;
  std::string report_path;
  perturb_cmd->add_option("--mode", mode, "overlap | hline")
      ->required()
      ->check(CLI::IsMember({"overlap", "hline"}));
  perturb_cmd->add_option("inputs", inputs, "Input PGM image(s): overlap takes top and bottom")
      ->required();
  perturb_cmd->add_option("--split-row", split_row, "overlap: first row taken from the bottom image");
  perturb_cmd->add_option("--row", line_row, "hline: row to overwrite");
  perturb_cmd->add_option("--intensity", intensity, "hline: pixel value")
      ->check(CLI::Range(0, 255))
      ->capture_default_str();
  perturb_cmd->add_option("--out", out_path, "Output PGM")->required();
  perturb_cmd->add_option("--weights", weights_path, "Also classify before/after with these weights");
  perturb_cmd->add_option("--meta", meta_path, "Metadata sidecar (default: <weights>.json)");
  perturb_cmd->add_option("--report", report_path, "CSV file for the prediction-change record");

  auto* parity_cmd = app.add_subcommand("parity", "Compare logits with trainer-emitted fixtures");
  std::string fixtures_path;
  double tolerance = 1e-3;
  parity_cmd->add_option("--fixtures", fixtures_path, "Fixtures CSV")->required();
  parity_cmd->add_option("--weights", weights_path, "FLW1 weight file")->required();
  parity_cmd->add_option("--meta", meta_path, "Metadata sidecar (default: <weights>.json)");
  parity_cmd->add_option("--tolerance", tolerance, "Largest allowed absolute logit difference")
      ->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*predict_cmd) {
      const auto image = load_image(image_path, width, height);
      const auto model = load_model(weights_path, meta_path, err);
      const auto p = predict(model.spec, model.weights, image_to_input(image, model.meta));
      std::vector<std::size_t> order(p.probabilities.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p.probabilities[a] > p.probabilities[b];
      });
      // argmax and the stable sort agree on ties (lowest index first).
      for (std::size_t i = 0; i < std::min<std::size_t>(3, order.size()); ++i) {
        out << prediction_line(order[i], p.probabilities[order[i]]) << "\n";
      }
    } else if (*eval_cmd) {
      require_file(images_path, "IDX image file");
      require_file(labels_path, "IDX label file");
      const auto model = load_model(weights_path, meta_path, err);
      const auto dataset = load_idx(images_path, labels_path);
      EvalOptions options;
      options.limit = limit;
      options.threads = threads;
      const auto report = evaluate(model.spec, model.weights, model.meta, dataset, options);
      const auto files = write_report(report, out_dir);
      out << "accuracy=" << format_fixed(report.accuracy, 4) << " samples=" << report.sample_count
          << "\n";
      for (std::size_t k = 0; k < report.num_classes; ++k) {
        out << "auc_class_" << k << "=" << format_fixed(report.auc[k], 4) << "\n";
      }
      out << "wrote " << files.size() << " files to " << out_dir << "\n";
    } else if (*codegen_cmd) {
      require_file(weights_path, "weights file");
      require_file(template_path, "template file");
      const auto weights = read_weights(fs::path(weights_path));
      const auto tmpl = load_template(template_path);
      const auto text = emit_source(weights, tmpl);
      if (restore_layout(extract_constants(text, tmpl), layout_of(weights)) != weights) {
        throw ValidationError("codegen: emitted source does not reproduce the weights");
      }
      write_file(out_path, text);
      out << "wrote " << weights.tensors.size() << " arrays (" << weights.total_values()
          << " values) to " << out_path << "\n";
    } else if (*inspect_cmd) {
      require_file(weights_path, "weights file");
      const auto weights = read_weights(fs::path(weights_path));
      for (const auto& [name, t] : weights.tensors) {
        const auto [lo, hi] = std::minmax_element(t.values.begin(), t.values.end());
        out << name << " dims=" << dims_text(t.dims) << " count=" << t.values.size()
            << " min=" << format_float(*lo) << " max=" << format_float(*hi) << "\n";
      }
      out << "tensors=" << weights.tensors.size() << " total=" << weights.total_values() << "\n";
      const auto model = load_model(weights_path, meta_path, err);
      out << "lenet5(num_classes=" << model.spec.num_classes << "): valid\n";
    } else if (*perturb_cmd) {
      for (const auto& in : inputs) require_file(in, "image");
      GrayImage result;
      GrayImage original = read_pgm(inputs.front());
      if (mode == "overlap") {
        if (inputs.size() != 2) throw UsageError("overlap needs exactly two input images");
        if (!split_row) throw UsageError("overlap needs --split-row");
        result = perturb_overlap(original, read_pgm(inputs[1]), *split_row);
      } else {
        if (inputs.size() != 1) throw UsageError("hline takes exactly one input image");
        if (!line_row) throw UsageError("hline needs --row");
        result = perturb_hline(original, *line_row, static_cast<std::uint8_t>(intensity));
      }
      write_pgm(result, out_path);
      std::size_t changed = 0;
      for (std::size_t i = 0; i < result.pixels.size(); ++i) {
        changed += result.pixels[i] != original.pixels[i];
      }
      out << "wrote " << out_path << " changed_pixels=" << changed << "\n";
      if (!weights_path.empty()) {
        const auto model = load_model(weights_path, meta_path, err);
        const PerturbationCase c{mode, original, result};
        const auto outcomes =
            run_perturbations(model.spec, model.weights, model.meta, std::span(&c, 1));
        const auto& o = outcomes.front();
        out << "before " << prediction_line(o.original_class, o.original_probability) << "\n";
        out << "after " << prediction_line(o.perturbed_class, o.perturbed_probability) << "\n";
        if (!report_path.empty()) write_file(report_path, perturbation_csv(outcomes));
      } else if (!report_path.empty()) {
        throw UsageError("--report needs --weights");
      }
    } else if (*parity_cmd) {
      require_file(fixtures_path, "fixtures file");
      const auto model = load_model(weights_path, meta_path, err);
      const auto fixtures = read_fixtures(fixtures_path, model.spec.input_shape().size(),
                                          model.spec.num_classes);
      const auto r = check_parity(model.spec, model.weights, fixtures);
      out << "fixtures=" << r.count << " class_agreement=" << r.class_agreement << "/" << r.count
          << " max_abs_logit_diff=" << r.max_abs_logit_diff << " worst=" << r.worst_input << "\n";
      if (r.class_agreement != r.count || r.max_abs_logit_diff > tolerance) {
        err << "error: parity outside tolerance " << tolerance << "\n";
        return kExitFailure;
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace flatnet
