#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ai4ef/domain.hpp"
#include "ai4ef/ingest.hpp"
#include "ai4ef/neural.hpp"
#include "ai4ef/random.hpp"

namespace ai4ef::tune {

namespace fs = std::filesystem;

struct SearchSpace {
  std::vector<std::size_t> batch_sizes{256, 512, 1024};
  double l_rate_min = 1e-4;
  double l_rate_max = 1e-3;  // sampled log-uniformly between the bounds
  std::size_t n_layers_min = 2;
  std::size_t n_layers_max = 6;
  std::vector<std::size_t> layer_sizes{128, 256, 512, 1024, 2048};
  std::size_t max_epochs = 10;
  std::size_t n_trials = 3;
  std::uint64_t seed = 42;

  // Median pruner and early stopping.
  std::size_t warmup_trials = 1;
  std::size_t warmup_epochs = 1;
  std::size_t patience = 3;
  double min_delta = 0.0;

  /// Throws InvalidConfig naming the offending field.
  void validate() const;
  Json to_json() const;
  static SearchSpace from_json(const Json& j);

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

struct TrialParams {
  std::size_t batch_size = 0;
  double l_rate = 0.0;
  std::size_t n_layers = 0;
  std::vector<std::size_t> layer_sizes;

  bool within(const SearchSpace& space) const;
  Json to_json() const;
  static TrialParams from_json(const Json& j);

  friend bool operator==(const TrialParams&, const TrialParams&) = default;
};

enum class TrialState { Complete, Pruned, Failed };

std::string_view to_string(TrialState state);
TrialState parse_trial_state(std::string_view text);

struct TrialTiming {
  std::string start;
  std::string end;
  double duration_seconds = 0.0;

  friend bool operator==(const TrialTiming&, const TrialTiming&) = default;
};

struct TrialRecord {
  std::size_t number = 0;
  TrialState state = TrialState::Complete;
  TrialParams params;
  std::vector<double> intermediate_values;  // validation objective per epoch, from 0
  std::optional<double> objective;          // Complete trials only
  std::string failure;                      // Failed trials only
  TrialTiming timing;

  Json to_json(bool include_timing = false) const;
  static TrialRecord from_json(const Json& j);

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct Study {
  SearchSpace space;
  domain::Task task = domain::Task::Classifier;
  std::vector<TrialRecord> trials;
  std::optional<std::size_t> best_trial_number;

  /// Wall-clock timing is left out unless asked for, so that a study is a
  /// pure function of its inputs.
  Json to_json(bool include_timing = false) const;
  static Study from_json(const Json& j);

  friend bool operator==(const Study&, const Study&) = default;
};

/// Draws, in order: batch size, learning rate, layer count, then one size per
/// hidden layer.
TrialParams sample_params(const SearchSpace& space, SplitMix64& rng);

/// Median rule. `history` holds earlier trials; only Complete ones that
/// reached `epoch` take part in the median.
bool should_prune(std::span<const TrialRecord> history, std::span<const double> current, std::size_t epoch,
                  std::size_t warmup_trials, std::size_t warmup_epochs);

/// True once the best value has gone `patience` epochs without improving by
/// more than `min_delta`.
bool early_stop(std::span<const double> values, std::size_t patience, double min_delta);

/// Throws NoCompleteTrial.
const TrialRecord& best_trial(const Study& study);

struct StudyOptions {
  /// Recorded in the checkpoint manifest.
  std::string scalers_fingerprint;
  /// Completed trials from elsewhere that take part in median pruning
  /// but are not part of the resulting study.
  std::vector<TrialRecord> reference_trials;
  std::function<void(const TrialRecord&)> on_trial;
};

inline constexpr std::string_view kStudyFile = "study.json";
inline constexpr std::string_view kTrialsTableFile = "trials.csv";
inline constexpr std::string_view kCheckpointDir = "checkpoint";

struct StudyResult {
  Study study;
  neural::Checkpoint best;
};

/// Runs the trials sequentially and writes into `artifact_dir`: study.json,
/// trials.csv (with timing), trial_<n>/intermediate_values.csv and the best
/// trial's checkpoint/. Throws NoCompleteTrial when no trial completes.
StudyResult run_study(const SearchSpace& space, const ingest::SplitDataset& data, domain::Task task,
                      const fs::path& artifact_dir, const StudyOptions& options = {});

Study load_study(const fs::path& path);

}  // namespace ai4ef::tune
