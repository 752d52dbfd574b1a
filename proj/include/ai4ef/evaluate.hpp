#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ai4ef/domain.hpp"
#include "ai4ef/ingest.hpp"
#include "ai4ef/neural.hpp"
#include "ai4ef/tune.hpp"

namespace ai4ef::evaluate {

namespace fs = std::filesystem;

inline constexpr double kDecisionThreshold = 0.5;
inline constexpr int kMetricsSchemaVersion = 1;

/// Rows are actual, columns predicted.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws LengthMismatch, Empty.
ConfusionMatrix confusion_matrix(const std::vector<bool>& predictions, const std::vector<bool>& truth);

struct ClassificationMetrics {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  // Set when the corresponding denominator was zero and the value defaulted to 0.
  bool precision_degenerate = false, recall_degenerate = false, f1_degenerate = false;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

struct RegressionMetrics {
  double mae = 0.0, rmse = 0.0, mape = 0.0, r2 = 0.0;
  std::size_t mape_skipped = 0;  // zero-truth entries left out of MAPE
  bool r2_degenerate = false;    // constant truth
};

/// Throws LengthMismatch (also when fewer than two pairs are given).
RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> truth);

/// Spearman rank correlation with average ranks for ties; 0 when either side
/// is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct ParamImportance {
  std::vector<std::string> names;  // batch_size, l_rate, n_layers, layer_sizes
  std::vector<double> scores;
  bool insufficient_data = false;

  double score(std::string_view name) const;
};

/// |Spearman| between each parameter and the objective over Complete trials,
/// normalised to sum 1. Categorical parameters enter as their index in the
/// search-space choice list; layer sizes as their mean.
ParamImportance param_importance(const tune::Study& study);

struct HistoryPoint {
  std::size_t number = 0;
  std::string state;
  std::optional<double> objective;
  std::optional<double> best_so_far;  // absent until a trial completes
};

std::vector<HistoryPoint> optimization_history(const tune::Study& study);

struct TargetReport {
  std::string name;
  std::optional<ConfusionMatrix> confusion;  // classifier only
  ClassificationMetrics classification;
  RegressionMetrics regression;
};

struct EvaluationReport {
  domain::Task task = domain::Task::Classifier;
  std::size_t samples = 0;
  std::vector<TargetReport> targets;
  std::vector<HistoryPoint> history;
  ParamImportance importance;
  std::optional<tune::TrialRecord> best_trial;

  Json to_json() const;
};

/// Scores the checkpoint on the test partition. Classifier outputs are
/// thresholded at 0.5; regressor outputs and targets are mapped back to raw
/// units through `scalers` before scoring.
EvaluationReport evaluate_model(const neural::Checkpoint& checkpoint, const ingest::SplitDataset& data,
                                const ingest::ScalerSet& scalers, const tune::Study& study);

inline constexpr std::string_view kMetricsFile = "metrics.json";
inline constexpr std::string_view kHistoryFile = "optimization_history.csv";
inline constexpr std::string_view kImportanceFile = "param_importance.csv";

/// Writes metrics.json, confusion_<target>.csv per classifier target,
/// optimization_history.csv and param_importance.csv. Returns the paths written.
std::vector<fs::path> write_reports(const EvaluationReport& report, const fs::path& dir);

}  // namespace ai4ef::evaluate
