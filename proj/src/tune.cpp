#include "ai4ef/tune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ai4ef/csv.hpp"
#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"

namespace ai4ef::tune {

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string join_sizes(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(sizes[i]);
  }
  return out;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

template <typename F>
auto parse_guard(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidValue, "malformed " + std::string(what) + ": " + e.what());
  }
}

}  // namespace

void SearchSpace::validate() const {
  auto fail = [](const std::string& field, const std::string& message) {
    throw Error(ErrorCode::InvalidConfig, message, field);
  };
  if (batch_sizes.empty()) fail("batch_size", "at least one batch size is required");
  for (const auto b : batch_sizes) {
    if (b == 0) fail("batch_size", "batch sizes must be positive");
  }
  if (!(l_rate_min > 0.0) || !(l_rate_max >= l_rate_min) || !std::isfinite(l_rate_max)) {
    fail("l_rate", "learning-rate range must satisfy 0 < min <= max");
  }
  if (n_layers_min < 1 || n_layers_max < n_layers_min) fail("n_layers", "layer-count range must satisfy 1 <= min <= max");
  if (layer_sizes.empty()) fail("layer_sizes", "at least one layer size is required");
  for (const auto s : layer_sizes) {
    if (s == 0) fail("layer_sizes", "layer sizes must be positive");
  }
  if (max_epochs < 1) fail("max_epochs", "max_epochs must be >= 1");
  if (n_trials < 1) fail("n_trials", "n_trials must be >= 1");
  if (patience < 1) fail("patience", "patience must be >= 1");
  if (!(min_delta >= 0.0)) fail("min_delta", "min_delta must be >= 0");
}

Json SearchSpace::to_json() const {
  Json j;
  j["batch_size"] = batch_sizes;
  j["l_rate"] = {l_rate_min, l_rate_max};
  j["n_layers"] = {n_layers_min, n_layers_max};
  j["layer_sizes"] = layer_sizes;
  j["max_epochs"] = max_epochs;
  j["n_trials"] = n_trials;
  j["seed"] = seed;
  j["warmup_trials"] = warmup_trials;
  j["warmup_epochs"] = warmup_epochs;
  j["patience"] = patience;
  j["min_delta"] = min_delta;
  return j;
}

SearchSpace SearchSpace::from_json(const Json& j) {
  return parse_guard("search space", [&] {
    SearchSpace s;
    s.batch_sizes = j.at("batch_size").get<std::vector<std::size_t>>();
    s.l_rate_min = j.at("l_rate").at(0).get<double>();
    s.l_rate_max = j.at("l_rate").at(1).get<double>();
    s.n_layers_min = j.at("n_layers").at(0).get<std::size_t>();
    s.n_layers_max = j.at("n_layers").at(1).get<std::size_t>();
    s.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    s.max_epochs = j.at("max_epochs").get<std::size_t>();
    s.n_trials = j.at("n_trials").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.warmup_trials = j.at("warmup_trials").get<std::size_t>();
    s.warmup_epochs = j.at("warmup_epochs").get<std::size_t>();
    s.patience = j.at("patience").get<std::size_t>();
    s.min_delta = j.at("min_delta").get<double>();
    s.validate();
    return s;
  });
}

bool TrialParams::within(const SearchSpace& space) const {
  const auto in = [](const std::vector<std::size_t>& set, std::size_t v) {
    return std::find(set.begin(), set.end(), v) != set.end();
  };
  if (!in(space.batch_sizes, batch_size)) return false;
  if (!(l_rate >= space.l_rate_min && l_rate <= space.l_rate_max)) return false;
  if (n_layers < space.n_layers_min || n_layers > space.n_layers_max) return false;
  if (layer_sizes.size() != n_layers) return false;
  return std::all_of(layer_sizes.begin(), layer_sizes.end(), [&](auto s) { return in(space.layer_sizes, s); });
}

Json TrialParams::to_json() const {
  Json j;
  j["batch_size"] = batch_size;
  j["l_rate"] = l_rate;
  j["n_layers"] = n_layers;
  j["layer_sizes"] = layer_sizes;
  return j;
}

TrialParams TrialParams::from_json(const Json& j) {
  return parse_guard("trial params", [&] {
    TrialParams p;
    p.batch_size = j.at("batch_size").get<std::size_t>();
    p.l_rate = j.at("l_rate").get<double>();
    p.n_layers = j.at("n_layers").get<std::size_t>();
    p.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    return p;
  });
}

std::string_view to_string(TrialState state) {
  switch (state) {
    case TrialState::Complete: return "Complete";
    case TrialState::Pruned: return "Pruned";
    case TrialState::Failed: return "Failed";
  }
  return "?";
}

TrialState parse_trial_state(std::string_view text) {
  if (text == "Complete") return TrialState::Complete;
  if (text == "Pruned") return TrialState::Pruned;
  if (text == "Failed") return TrialState::Failed;
  throw Error(ErrorCode::InvalidValue, "unknown trial state '" + std::string(text) + "'", "state");
}

Json TrialRecord::to_json(bool include_timing) const {
  Json j;
  j["number"] = number;
  j["state"] = to_string(state);
  j["params"] = params.to_json();
  j["intermediate_values"] = intermediate_values;
  j["objective"] = optional_json(objective);
  if (!failure.empty()) j["failure"] = failure;
  if (include_timing) {
    j["start"] = timing.start;
    j["end"] = timing.end;
    j["duration_seconds"] = timing.duration_seconds;
  }
  return j;
}

TrialRecord TrialRecord::from_json(const Json& j) {
  return parse_guard("trial record", [&] {
    TrialRecord t;
    t.number = j.at("number").get<std::size_t>();
    t.state = parse_trial_state(j.at("state").get<std::string>());
    t.params = TrialParams::from_json(j.at("params"));
    t.intermediate_values = j.at("intermediate_values").get<std::vector<double>>();
    if (!j.at("objective").is_null()) t.objective = j.at("objective").get<double>();
    if (j.contains("failure")) t.failure = j.at("failure").get<std::string>();
    if (j.contains("start")) {
      t.timing.start = j.at("start").get<std::string>();
      t.timing.end = j.at("end").get<std::string>();
      t.timing.duration_seconds = j.at("duration_seconds").get<double>();
    }
    return t;
  });
}

Json Study::to_json(bool include_timing) const {
  Json j;
  j["task"] = domain::to_string(task);
  j["search_space"] = space.to_json();
  j["best_trial"] = best_trial_number ? Json(*best_trial_number) : Json(nullptr);
  j["trials"] = Json::array();
  for (const auto& t : trials) j["trials"].push_back(t.to_json(include_timing));
  return j;
}

Study Study::from_json(const Json& j) {
  return parse_guard("study", [&] {
    Study s;
    s.task = domain::parse_task(j.at("task").get<std::string>());
    s.space = SearchSpace::from_json(j.at("search_space"));
    if (!j.at("best_trial").is_null()) s.best_trial_number = j.at("best_trial").get<std::size_t>();
    for (const auto& t : j.at("trials")) s.trials.push_back(TrialRecord::from_json(t));
    for (std::size_t i = 0; i < s.trials.size(); ++i) {
      if (s.trials[i].number != i) {
        throw Error(ErrorCode::InvalidValue, "trial numbers must be contiguous from 0", "trials");
      }
    }
    return s;
  });
}

TrialParams sample_params(const SearchSpace& space, SplitMix64& rng) {
  TrialParams p;
  p.batch_size = space.batch_sizes[rng.below(space.batch_sizes.size())];
  if (space.l_rate_min == space.l_rate_max) {
    p.l_rate = space.l_rate_min;
    rng.next();
  } else {
    p.l_rate = std::exp(rng.uniform(std::log(space.l_rate_min), std::log(space.l_rate_max)));
    p.l_rate = std::clamp(p.l_rate, space.l_rate_min, space.l_rate_max);
  }
  p.n_layers = space.n_layers_min + rng.below(space.n_layers_max - space.n_layers_min + 1);
  for (std::size_t i = 0; i < p.n_layers; ++i) {
    p.layer_sizes.push_back(space.layer_sizes[rng.below(space.layer_sizes.size())]);
  }
  return p;
}

bool should_prune(std::span<const TrialRecord> history, std::span<const double> current, std::size_t epoch,
                  std::size_t warmup_trials, std::size_t warmup_epochs) {
  if (epoch < warmup_epochs || epoch >= current.size()) return false;
  std::size_t completed = 0;
  std::vector<double> peers;
  for (const auto& t : history) {
    if (t.state != TrialState::Complete) continue;
    ++completed;
    if (epoch < t.intermediate_values.size()) peers.push_back(t.intermediate_values[epoch]);
  }
  if (completed < warmup_trials || peers.empty()) return false;
  return current[epoch] > median(std::move(peers));
}

bool early_stop(std::span<const double> values, std::size_t patience, double min_delta) {
  if (values.empty()) return false;
  double best = values[0];
  std::size_t stale = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < best - min_delta) {
      best = values[i];
      stale = 0;
    } else {
      ++stale;
    }
  }
  return stale >= patience;
}

const TrialRecord& best_trial(const Study& study) {
  const TrialRecord* best = nullptr;
  for (const auto& t : study.trials) {
    if (t.state != TrialState::Complete || !t.objective) continue;
    if (!best || *t.objective < *best->objective) best = &t;
  }
  if (!best) throw Error(ErrorCode::NoCompleteTrial, "no trial completed");
  return *best;
}

namespace {

struct TrialOutcome {
  TrialRecord record;
  std::optional<neural::MlpModel> model;
};

TrialOutcome run_trial(const SearchSpace& space, const ingest::SplitDataset& data, domain::Task task,
                       std::size_t number, std::span<const TrialRecord> history) {
  TrialOutcome out;
  auto& rec = out.record;
  rec.number = number;
  const auto trial_seed = derive_seed(space.seed, number);
  SplitMix64 rng(trial_seed);
  rec.params = sample_params(space, rng);

  const auto kind = neural::loss_for(task);
  neural::MlpConfig config{data.train_x.cols(), rec.params.n_layers, rec.params.layer_sizes, data.train_y.cols(),
                           neural::head_for(task)};
  try {
    auto model = neural::init_model(config, derive_seed(trial_seed, 1));
    neural::AdamState state = neural::AdamState::for_model(model);
    for (std::size_t epoch = 0; epoch < space.max_epochs; ++epoch) {
      neural::train_epoch(model, state, data.train_x, data.train_y, rec.params.batch_size, rec.params.l_rate, kind,
                          derive_seed(trial_seed, 2 + epoch));
      const double value = neural::loss(neural::forward(model, data.test_x), data.test_y, kind);
      if (!std::isfinite(value)) {
        rec.state = TrialState::Failed;
        rec.failure = "validation loss is not finite at epoch " + std::to_string(epoch);
        return out;
      }
      rec.intermediate_values.push_back(value);
      if (should_prune(history, rec.intermediate_values, epoch, space.warmup_trials, space.warmup_epochs)) {
        rec.state = TrialState::Pruned;
        return out;
      }
      if (early_stop(rec.intermediate_values, space.patience, space.min_delta)) break;
    }
    rec.state = TrialState::Complete;
    rec.objective = rec.intermediate_values.back();
    out.model = std::move(model);
  } catch (const Error& e) {
    rec.state = TrialState::Failed;
    rec.failure = e.what();
  }
  return out;
}

void write_trial_artifacts(const TrialRecord& t, const fs::path& dir) {
  csv::Document doc{{"epoch", "value"}, {}};
  for (std::size_t e = 0; e < t.intermediate_values.size(); ++e) {
    doc.rows.push_back({std::to_string(e), fsutil::format_double(t.intermediate_values[e])});
  }
  fsutil::write_file_atomic(dir / ("trial_" + std::to_string(t.number)) / "intermediate_values.csv",
                            csv::format(doc));
}

std::string trials_table(const Study& study) {
  csv::Document doc{{"number", "state", "start", "end", "duration_seconds", "batch_size", "l_rate", "n_layers",
                     "layer_sizes", "objective"},
                    {}};
  for (const auto& t : study.trials) {
    doc.rows.push_back({std::to_string(t.number), std::string(to_string(t.state)), t.timing.start, t.timing.end,
                    fsutil::format_double(t.timing.duration_seconds), std::to_string(t.params.batch_size),
                    fsutil::format_double(t.params.l_rate), std::to_string(t.params.n_layers),
                    join_sizes(t.params.layer_sizes), t.objective ? fsutil::format_double(*t.objective) : ""});
  }
  return csv::format(doc);
}

}  // namespace

StudyResult run_study(const SearchSpace& space, const ingest::SplitDataset& data, domain::Task task,
                      const fs::path& artifact_dir, const StudyOptions& options) {
  space.validate();
  if (data.train_x.rows() == 0 || data.test_x.rows() == 0) {
    throw Error(ErrorCode::EmptyDataset, "both train and test partitions must be non-empty");
  }

  Study study;
  study.space = space;
  study.task = task;
  std::vector<TrialRecord> history = options.reference_trials;
  std::optional<neural::MlpModel> best_model;

  for (std::size_t n = 0; n < space.n_trials; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto start = fsutil::iso8601_now();
    auto outcome = run_trial(space, data, task, n, history);
    auto& rec = outcome.record;
    rec.timing.start = start;
    rec.timing.end = fsutil::iso8601_now();
    rec.timing.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (rec.state == TrialState::Complete &&
        (!study.best_trial_number || *rec.objective < *study.trials[*study.best_trial_number].objective)) {
      study.best_trial_number = n;
      best_model = std::move(outcome.model);
    }
    write_trial_artifacts(rec, artifact_dir);
    if (options.on_trial) options.on_trial(rec);
    history.push_back(rec);
    study.trials.push_back(std::move(rec));
  }

  fsutil::write_file_atomic(artifact_dir / kStudyFile, study.to_json().dump(2) + "\n");
  fsutil::write_file_atomic(artifact_dir / kTrialsTableFile, trials_table(study));
  if (!study.best_trial_number) throw Error(ErrorCode::NoCompleteTrial, "every trial was pruned or failed");

  const auto best_number = *study.best_trial_number;
  const auto best_objective = study.trials[best_number].objective;
  StudyResult result{std::move(study), {}};
  auto& manifest = result.best.manifest;
  manifest.config = best_model->config;
  manifest.task = task;
  manifest.feature_columns = data.feature_names;
  manifest.target_columns = data.target_names;
  manifest.scalers_fingerprint = options.scalers_fingerprint;
  manifest.objective = best_objective;
  manifest.trial_number = best_number;
  result.best.model = std::move(*best_model);
  neural::save_checkpoint(result.best.model, manifest, artifact_dir / kCheckpointDir);
  return result;
}

Study load_study(const fs::path& path) {
  const auto text = fsutil::read_file(path);
  try {
    return Study::from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidValue, "study is not valid JSON: " + std::string(e.what()), path.string());
  }
}

}  // namespace ai4ef::tune
