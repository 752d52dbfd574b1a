#include "ai4ef/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ai4ef/csv.hpp"
#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"

namespace ai4ef::evaluate {

namespace {

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double category_index(const std::vector<std::size_t>& choices, std::size_t value) {
  const auto it = std::find(choices.begin(), choices.end(), value);
  return static_cast<double>(it - choices.begin());
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

ConfusionMatrix confusion_matrix(const std::vector<bool>& predictions, const std::vector<bool>& truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "predictions and truth differ in length");
  }
  if (truth.empty()) throw Error(ErrorCode::Empty, "no samples to compare");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      predictions[i] ? ++cm.tp : ++cm.fn;
    } else {
      predictions[i] ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  ClassificationMetrics m;
  bool unused = false;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), unused);
  m.precision = ratio(cm.tp, cm.tp + cm.fp, m.precision_degenerate);
  m.recall = ratio(cm.tp, cm.tp + cm.fn, m.recall_degenerate);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_degenerate = true;
  }
  return m;
}

RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "predictions and truth differ in length");
  }
  if (truth.size() < 2) throw Error(ErrorCode::LengthMismatch, "at least two samples are required");
  const auto n = static_cast<double>(truth.size());
  RegressionMetrics m;
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double err = predictions[i] - truth[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    if (truth[i] == 0.0) {
      ++m.mape_skipped;
    } else {
      pct_sum += std::abs(err / truth[i]);
      ++pct_count;
    }
  }
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = pct_count ? pct_sum / static_cast<double>(pct_count) : 0.0;
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double ss_tot = 0.0;
  for (const auto t : truth) ss_tot += (t - mean) * (t - mean);
  if (ss_tot == 0.0) {
    m.r2_degenerate = true;
    m.r2 = sq_sum == 0.0 ? 1.0 : 0.0;
  } else {
    m.r2 = 1.0 - sq_sum / ss_tot;
  }
  return m;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "rank correlation inputs differ in length");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double ParamImportance::score(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return scores[i];
  }
  throw Error(ErrorCode::NotFound, "no importance score for '" + std::string(name) + "'", std::string(name));
}

ParamImportance param_importance(const tune::Study& study) {
  ParamImportance out;
  out.names = {"batch_size", "l_rate", "n_layers", "layer_sizes"};
  out.scores.assign(out.names.size(), 0.0);

  std::vector<std::vector<double>> columns(out.names.size());
  std::vector<double> objective;
  for (const auto& t : study.trials) {
    if (t.state != tune::TrialState::Complete || !t.objective) continue;
    const auto& p = t.params;
    columns[0].push_back(category_index(study.space.batch_sizes, p.batch_size));
    columns[1].push_back(p.l_rate);
    columns[2].push_back(static_cast<double>(p.n_layers));
    const double size_sum = std::accumulate(p.layer_sizes.begin(), p.layer_sizes.end(), 0.0);
    columns[3].push_back(p.layer_sizes.empty() ? 0.0 : size_sum / static_cast<double>(p.layer_sizes.size()));
    objective.push_back(*t.objective);
  }
  if (objective.size() < 3) {
    out.insufficient_data = true;
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out.scores[i] = std::abs(spearman(columns[i], objective));
    total += out.scores[i];
  }
  if (total == 0.0) {
    out.insufficient_data = true;
    return out;
  }
  for (auto& s : out.scores) s /= total;
  return out;
}

std::vector<HistoryPoint> optimization_history(const tune::Study& study) {
  std::vector<HistoryPoint> out;
  std::optional<double> best;
  for (const auto& t : study.trials) {
    HistoryPoint p{t.number, std::string(tune::to_string(t.state)), std::nullopt, std::nullopt};
    if (t.state == tune::TrialState::Complete && t.objective) {
      p.objective = t.objective;
      if (!best || *t.objective < *best) best = t.objective;
    }
    p.best_so_far = best;
    out.push_back(std::move(p));
  }
  return out;
}

Json EvaluationReport::to_json() const {
  Json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["task"] = domain::to_string(task);
  j["samples"] = samples;
  const bool classifier = task == domain::Task::Classifier;
  if (classifier) j["threshold"] = kDecisionThreshold;

  Json per_target = Json::object();
  double a = 0, b = 0, c = 0, d = 0;
  for (const auto& t : targets) {
    Json block;
    if (classifier) {
      const auto& m = t.classification;
      block["accuracy"] = m.accuracy;
      block["precision"] = m.precision;
      block["recall"] = m.recall;
      block["f1"] = m.f1;
      block["precision_degenerate"] = m.precision_degenerate;
      block["recall_degenerate"] = m.recall_degenerate;
      block["f1_degenerate"] = m.f1_degenerate;
      if (t.confusion) {
        block["confusion"] = {{"tp", t.confusion->tp}, {"fp", t.confusion->fp}, {"fn", t.confusion->fn},
                              {"tn", t.confusion->tn}};
      }
      a += m.accuracy, b += m.precision, c += m.recall, d += m.f1;
    } else {
      const auto& m = t.regression;
      block["mae"] = m.mae;
      block["rmse"] = m.rmse;
      block["mape"] = m.mape;
      block["r2"] = m.r2;
      block["mape_skipped"] = m.mape_skipped;
      block["r2_degenerate"] = m.r2_degenerate;
      a += m.mae, b += m.rmse, c += m.mape, d += m.r2;
    }
    per_target[t.name] = std::move(block);
  }
  j["targets"] = std::move(per_target);
  const double n = targets.empty() ? 1.0 : static_cast<double>(targets.size());
  if (classifier) {
    j["macro"] = {{"accuracy", a / n}, {"precision", b / n}, {"recall", c / n}, {"f1", d / n}};
  } else {
    j["macro"] = {{"mae", a / n}, {"rmse", b / n}, {"mape", c / n}, {"r2", d / n}};
  }

  Json hpo;
  hpo["best_trial"] = best_trial ? Json(best_trial->number) : Json(nullptr);
  hpo["best_objective"] = best_trial ? optional_json(best_trial->objective) : Json(nullptr);
  hpo["best_params"] = best_trial ? best_trial->params.to_json() : Json(nullptr);
  Json importance = Json::object();
  for (std::size_t i = 0; i < this->importance.names.size(); ++i) {
    importance[this->importance.names[i]] = this->importance.scores[i];
  }
  hpo["parameter_importance"] = std::move(importance);
  hpo["importance_insufficient_data"] = this->importance.insufficient_data;
  hpo["optimization_history"] = Json::array();
  for (const auto& p : history) {
    hpo["optimization_history"].push_back(
        {{"number", p.number}, {"state", p.state}, {"objective", optional_json(p.objective)},
         {"best_so_far", optional_json(p.best_so_far)}});
  }
  j["hpo"] = std::move(hpo);
  return j;
}

EvaluationReport evaluate_model(const neural::Checkpoint& checkpoint, const ingest::SplitDataset& data,
                                const ingest::ScalerSet& scalers, const tune::Study& study) {
  if (checkpoint.manifest.target_columns != data.target_names) {
    throw Error(ErrorCode::SchemaMismatch, "checkpoint targets differ from the dataset targets", "target_cols");
  }
  if (data.test_x.rows() == 0) throw Error(ErrorCode::Empty, "test partition is empty");

  EvaluationReport report;
  report.task = checkpoint.manifest.task;
  report.samples = data.test_x.rows();
  const auto outputs = neural::forward(checkpoint.model, data.test_x);
  const auto n = outputs.rows();
  const auto k = outputs.cols();

  if (report.task == domain::Task::Classifier) {
    for (std::size_t t = 0; t < k; ++t) {
      std::vector<bool> pred(n), truth(n);
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = outputs(i, t) >= kDecisionThreshold;
        truth[i] = data.test_y(i, t) >= kDecisionThreshold;
      }
      TargetReport tr{data.target_names[t], confusion_matrix(pred, truth), {}, {}};
      tr.classification = classification_metrics(*tr.confusion);
      report.targets.push_back(std::move(tr));
    }
  } else {
    std::vector<std::vector<double>> pred(k), truth(k);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = ingest::inverse_transform_targets(scalers, outputs.row(i));
      const auto y = ingest::inverse_transform_targets(scalers, data.test_y.row(i));
      for (std::size_t t = 0; t < k; ++t) {
        pred[t].push_back(p[t]);
        truth[t].push_back(y[t]);
      }
    }
    for (std::size_t t = 0; t < k; ++t) {
      TargetReport tr{data.target_names[t], std::nullopt, {}, regression_metrics(pred[t], truth[t])};
      report.targets.push_back(std::move(tr));
    }
  }

  report.history = optimization_history(study);
  report.importance = param_importance(study);
  if (study.best_trial_number) report.best_trial = study.trials.at(*study.best_trial_number);
  return report;
}

std::vector<fs::path> write_reports(const EvaluationReport& report, const fs::path& dir) {
  std::vector<fs::path> written;
  auto put = [&](const fs::path& path, const std::string& content) {
    fsutil::write_file_atomic(path, content);
    written.push_back(path);
  };

  put(dir / kMetricsFile, report.to_json().dump(2) + "\n");
  for (const auto& t : report.targets) {
    if (!t.confusion) continue;
    const auto& cm = *t.confusion;
    csv::Document doc{{"actual", "predicted_false", "predicted_true"},
                      {{"false", std::to_string(cm.tn), std::to_string(cm.fp)},
                       {"true", std::to_string(cm.fn), std::to_string(cm.tp)}}};
    put(dir / ("confusion_" + t.name + ".csv"), csv::format(doc));
  }

  const auto opt = [](const std::optional<double>& v) { return v ? fsutil::format_double(*v) : std::string(); };
  csv::Document history{{"number", "state", "objective", "best_so_far"}, {}};
  for (const auto& p : report.history) {
    history.rows.push_back({std::to_string(p.number), p.state, opt(p.objective), opt(p.best_so_far)});
  }
  put(dir / kHistoryFile, csv::format(history));

  csv::Document importance{{"param", "importance"}, {}};
  for (std::size_t i = 0; i < report.importance.names.size(); ++i) {
    importance.rows.push_back({report.importance.names[i], fsutil::format_double(report.importance.scores[i])});
  }
  put(dir / kImportanceFile, csv::format(importance));
  return written;
}

}  // namespace ai4ef::evaluate
