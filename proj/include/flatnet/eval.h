#pragma once

// Dataset ingestion and classification metrics: accuracy, confusion matrix,
// one-vs-rest ROC curves and AUC, plus CSV/SVG report emission.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flatnet/model.h"
#include "flatnet/preprocess.h"
#include "flatnet/weights_io.h"

namespace flatnet {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct LabeledDataset {
  std::vector<GrayImage> images;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
};

/// Parses big-endian IDX image (n x 28 x 28) and label (n) containers.
/// Throws FormatError on a wrong magic, count mismatch, bad dims or truncation.
LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes);
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;

  bool operator==(const RocPoint&) const = default;
};

/// One point per distinct score threshold, descending, with tied scores
/// grouped; starts at (0,0) and ends at (1,1). Throws DegenerateInputError
/// unless both classes are present.
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const bool> positives);

/// Trapezoidal area under a ROC point list.
double auc(std::span<const RocPoint> points);

struct EvalReport {
  std::size_t num_classes = 0;
  std::size_t sample_count = 0;
  double accuracy = 0.0;
  /// Row-major num_classes x num_classes; row = true class, column = predicted.
  std::vector<std::uint64_t> confusion;
  /// Empty for a class that lacks positives or negatives in the data.
  std::vector<std::vector<RocPoint>> roc;
  /// NaN where roc is empty.
  std::vector<double> auc;

  std::uint64_t confusion_at(std::size_t truth, std::size_t predicted) const {
    return confusion[truth * num_classes + predicted];
  }
};

/// Builds a report from per-sample labels, predicted classes, and class
/// scores (row-major samples x num_classes).
EvalReport summarize(std::size_t num_classes, std::span<const std::uint8_t> labels,
                     std::span<const std::size_t> predicted, std::span<const float> scores);

struct EvalOptions {
  /// Evaluate only the first `limit` samples in file order.
  std::optional<std::size_t> limit;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 1;
};

/// Runs image_to_input -> predict on every sample; ROC scores are the softmax
/// probability of each class. Results do not depend on the thread count.
EvalReport evaluate(const NetworkSpec& spec, const WeightSet& weights, const ModelMetadata& meta,
                    const LabeledDataset& dataset, const EvalOptions& options = {});

/// Writes confusion.csv, roc_class_<k>.csv per class, summary.csv and
/// report.svg into out_dir (created if needed). Returns the paths written.
std::vector<std::filesystem::path> write_report(const EvalReport& report,
                                                const std::filesystem::path& out_dir);

std::string confusion_csv(const EvalReport& report);
std::string roc_csv(const std::vector<RocPoint>& points);
std::string summary_csv(const EvalReport& report);
std::string report_svg(const EvalReport& report);

// Robustness scenarios: compare predictions before and after a perturbation.

struct PerturbationCase {
  std::string scenario;
  GrayImage original;
  GrayImage perturbed;
};

struct PerturbationOutcome {
  std::string scenario;
  std::size_t original_class = 0;
  float original_probability = 0.0f;
  std::size_t perturbed_class = 0;
  float perturbed_probability = 0.0f;
  std::size_t changed_pixels = 0;

  bool prediction_changed() const { return original_class != perturbed_class; }
};

std::vector<PerturbationOutcome> run_perturbations(const NetworkSpec& spec,
                                                   const WeightSet& weights,
                                                   const ModelMetadata& meta,
                                                   std::span<const PerturbationCase> cases);

inline constexpr std::string_view kPerturbationCsvHeader =
    "scenario,original_class,original_p,perturbed_class,perturbed_p,changed_pixels,"
    "prediction_changed";

std::string perturbation_csv(std::span<const PerturbationOutcome> outcomes);

// Cross-implementation parity fixtures: one CSV row per preprocessed input,
//   input_id, x_0 .. x_1023, logit_0 .. logit_{K-1}, class
// An optional first row starting with "input_id" is treated as a header.
struct ParityFixture {
  std::string input_id;
  std::vector<float> input;
  std::vector<float> logits;
  std::size_t label = 0;
};

/// Throws FormatError naming the line on a wrong field count or bad number.
std::vector<ParityFixture> parse_fixtures(std::string_view csv, std::size_t input_size,
                                          std::size_t num_classes);
std::vector<ParityFixture> read_fixtures(const std::filesystem::path& path, std::size_t input_size,
                                         std::size_t num_classes);

struct ParityReport {
  std::size_t count = 0;
  std::size_t class_agreement = 0;
  double max_abs_logit_diff = 0.0;
  /// input_id of the fixture with the largest logit difference.
  std::string worst_input;
};

ParityReport check_parity(const NetworkSpec& spec, const WeightSet& weights,
                          std::span<const ParityFixture> fixtures);

/// Fixed-precision decimal used in every CSV cell ("%.6f").
std::string format_fixed(double value, int precision = 6);

}  // namespace flatnet
