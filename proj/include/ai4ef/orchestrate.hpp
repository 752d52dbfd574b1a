#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ai4ef/domain.hpp"
#include "ai4ef/ingest.hpp"
#include "ai4ef/neural.hpp"
#include "ai4ef/tune.hpp"

namespace ai4ef::orchestrate {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string input_filepath;
  std::optional<ingest::ConnectorConfig> connector;  // authorization + agent ids
  std::vector<std::string> feature_cols;             // canonical names
  std::vector<std::string> target_cols;
  domain::Task ml_class = domain::Task::Classifier;
  std::string activation = "ReLU";
  std::string optimizer_name = "Adam";
  tune::SearchSpace space;  // batch_size, l_rate, layer_sizes, n_layers, max_epochs, n_trials, seed, pruner
  std::size_t num_workers = 2;  // accepted, not used: ingestion is sequential
  double split_ratio = 0.8;
  // Relative paths are taken inside the run directory. When they differ from
  // the built-in layout the artifact is also copied there.
  std::string ml_path = "train/checkpoint";
  std::string scalers_path = "ingest/scalers.json";
  std::string optuna_viz = "eval";
  std::optional<std::string> from_run;

  domain::DatasetSchema schema() const;
  /// Canonical JSON with every key present, suitable for validate_run_config.
  Json to_json() const;
};

/// Applies defaults, rejects unknown keys and cross-checks mlClass against the
/// target columns. Throws MissingField, UnknownField, InvalidValue,
/// Inconsistent.
RunConfig validate_run_config(const Json& raw);

/// YAML mapping -> JSON. Plain scalars become numbers or booleans when they
/// parse as such; quoted scalars stay strings.
Json yaml_to_json(std::string_view text);

/// Reads a .json, .yaml or .yml document.
Json load_config_document(const fs::path& path);

/// Applies "key=value" overrides; the value is read as a YAML flow scalar or
/// sequence. Last assignment wins.
void apply_override(Json& document, std::string_view assignment);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

enum class Step { Ingestion, Training, Evaluation };
enum class RunStatus { Queued, Running, Succeeded, Failed };

std::string_view to_string(Step step);
std::string_view to_string(RunStatus status);
/// Accepts "Ingestion"/"ingest", "Training"/"train", "Evaluation"/"evaluate",
/// case-insensitively.
Step parse_step(std::string_view text);

inline const std::vector<Step> kAllSteps = {Step::Ingestion, Step::Training, Step::Evaluation};

struct ErrorDetail {
  std::string code;
  std::string message;
  std::string field;
  std::string step;
};

struct StepRecord {
  Step step = Step::Ingestion;
  RunStatus status = RunStatus::Queued;
  std::string started;
  std::string finished;
  std::map<std::string, std::string> artifacts;
};

struct RunRecord {
  std::string run_id;
  std::vector<Step> steps;
  RunStatus status = RunStatus::Queued;
  std::string created;
  std::string started;
  std::string finished;
  std::vector<StepRecord> step_records;
  std::string ingest_dir;  // where this run reads or writes each artifact set
  std::string train_dir;
  std::string eval_dir;
  std::optional<ErrorDetail> error;

  Json to_json() const;
  static RunRecord from_json(const Json& j);
};

/// 26-character Crockford base32 ULID; monotone within a process.
std::string new_ulid();

/// Synchronous step bodies, usable without the executor.
ingest::IngestArtifacts run_ingestion_step(const RunConfig& config, const fs::path& ingest_dir);
tune::StudyResult run_training_step(const RunConfig& config, const fs::path& ingest_dir, const fs::path& train_dir);
std::vector<fs::path> run_evaluation_step(const fs::path& ingest_dir, const fs::path& train_dir,
                                          const fs::path& eval_dir);

// ---------------------------------------------------------------------------
// Registry of deployed checkpoints
// ---------------------------------------------------------------------------

enum class Service { Retrofit, Pv };

std::string_view to_string(Service service);
/// Throws NotFound.
Service parse_service(std::string_view text);
domain::Task task_for(Service service);

inline constexpr std::string_view kCheckpointScalersFile = "scalers.json";

struct ModelVersion {
  Service service = Service::Retrofit;
  std::size_t version = 0;
  std::string source;
  std::string deployed_at;
  std::optional<double> objective;
  bool active = false;

  Json to_json() const;
};

struct DeployedModel {
  Service service = Service::Retrofit;
  std::size_t version = 0;
  neural::Checkpoint checkpoint;
  ingest::ScalerSet scalers;
};

/// On-disk registry under <root>/registry/<service>/. Each deploy copies the
/// checkpoint into versions/v<N> through a temporary directory and rename,
/// then flips active.json atomically.
class Registry {
 public:
  explicit Registry(fs::path root);

  /// Throws TaskMismatch, CorruptWeights, VersionMismatch, SchemaMismatch,
  /// MissingArtifact (no scalers.json next to the checkpoint).
  ModelVersion deploy(Service service, const fs::path& checkpoint_dir);
  std::vector<ModelVersion> list() const;
  std::optional<std::size_t> active_version(Service service) const;
  /// Throws NoModelDeployed.
  std::shared_ptr<const DeployedModel> load_active(Service service) const;

 private:
  fs::path service_dir(Service service) const;

  fs::path root_;
  mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Executor
// ---------------------------------------------------------------------------

/// Artifact root layout: runs/<run_id>/{run.json, ingest, train, eval} and
/// registry/. Runs execute one at a time, in launch order, on a background
/// thread.
class Orchestrator {
 public:
  explicit Orchestrator(fs::path artifact_root);
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Checks step dependencies, records the run as Queued and returns its id.
  /// Throws MissingArtifact(step, dependency) when a dependency cannot be met.
  std::string launch(const RunConfig& config, std::vector<Step> steps);
  /// Throws NotFound.
  RunRecord run_status(const std::string& run_id) const;
  /// Blocks until the run is Succeeded or Failed.
  RunRecord wait(const std::string& run_id) const;

  Registry& registry() { return registry_; }
  const fs::path& root() const { return root_; }

 private:
  struct Job {
    std::string run_id;
    RunConfig config;
  };

  void worker_loop();
  void execute(Job& job);
  void update(const RunRecord& record);
  fs::path run_dir(const std::string& run_id) const;

  fs::path root_;
  Registry registry_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, RunRecord> records_;
  std::deque<Job> queue_;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace ai4ef::orchestrate
