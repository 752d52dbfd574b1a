#include <algorithm>
#include <chrono>
#include <random>

#include "ai4ef/error.hpp"
#include "ai4ef/evaluate.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/orchestrate.hpp"
#include "ai4ef/random.hpp"

namespace ai4ef::orchestrate {

namespace {

constexpr std::string_view kRunFile = "run.json";

bool terminal(RunStatus s) { return s == RunStatus::Succeeded || s == RunStatus::Failed; }

RunStatus parse_status(std::string_view text) {
  for (const auto s : {RunStatus::Queued, RunStatus::Running, RunStatus::Succeeded, RunStatus::Failed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::InvalidValue, "unknown run status '" + std::string(text) + "'", "status");
}

bool has(const std::vector<Step>& steps, Step s) { return std::find(steps.begin(), steps.end(), s) != steps.end(); }

Error missing(Step step, std::string dependency, const std::string& detail) {
  return Error(ErrorCode::MissingArtifact,
               std::string(to_string(step)) + " requires " + dependency + (detail.empty() ? "" : ": " + detail),
               dependency)
      .with_step(std::string(to_string(step)));
}

/// Copies an artifact to a configured export location unless that location
/// already is the artifact.
void export_copy(const fs::path& artifact, const std::string& configured, const fs::path& run_dir) {
  const fs::path target = fs::path(configured).is_absolute() ? fs::path(configured) : run_dir / configured;
  if (fs::weakly_canonical(target) == fs::weakly_canonical(artifact)) return;
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::copy(artifact, target, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

void check_columns(const RunConfig& config, const ingest::ScalerSet& scalers) {
  std::vector<std::string> features;
  for (const auto& c : scalers.features) features.push_back(c.column);
  if (features != config.feature_cols || scalers.target_names() != config.target_cols) {
    throw Error(ErrorCode::SchemaMismatch, "ingestion artifacts were produced for different columns", "feature_cols");
  }
}

}  // namespace

std::string_view to_string(Step step) {
  switch (step) {
    case Step::Ingestion: return "Ingestion";
    case Step::Training: return "Training";
    case Step::Evaluation: return "Evaluation";
  }
  return "?";
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Queued: return "Queued";
    case RunStatus::Running: return "Running";
    case RunStatus::Succeeded: return "Succeeded";
    case RunStatus::Failed: return "Failed";
  }
  return "?";
}

Step parse_step(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "ingestion" || t == "ingest") return Step::Ingestion;
  if (t == "training" || t == "train") return Step::Training;
  if (t == "evaluation" || t == "evaluate") return Step::Evaluation;
  throw Error(ErrorCode::InvalidValue, "unknown step '" + std::string(text) + "'", "steps");
}

Json RunRecord::to_json() const {
  Json j;
  j["run_id"] = run_id;
  j["status"] = to_string(status);
  j["steps"] = Json::array();
  for (const auto s : steps) j["steps"].push_back(to_string(s));
  j["created"] = created;
  j["started"] = started.empty() ? Json(nullptr) : Json(started);
  j["finished"] = finished.empty() ? Json(nullptr) : Json(finished);
  j["step_records"] = Json::array();
  for (const auto& r : step_records) {
    j["step_records"].push_back({{"step", to_string(r.step)},
                                 {"status", to_string(r.status)},
                                 {"started", r.started.empty() ? Json(nullptr) : Json(r.started)},
                                 {"finished", r.finished.empty() ? Json(nullptr) : Json(r.finished)},
                                 {"artifacts", r.artifacts}});
  }
  j["ingest_dir"] = ingest_dir;
  j["train_dir"] = train_dir;
  j["eval_dir"] = eval_dir;
  if (error) {
    j["error"] = {{"code", error->code}, {"message", error->message}, {"field", error->field}, {"step", error->step}};
  } else {
    j["error"] = nullptr;
  }
  return j;
}

RunRecord RunRecord::from_json(const Json& j) {
  try {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.status = parse_status(j.at("status").get<std::string>());
    for (const auto& s : j.at("steps")) r.steps.push_back(parse_step(s.get<std::string>()));
    r.created = j.at("created").get<std::string>();
    r.started = j.at("started").is_null() ? "" : j.at("started").get<std::string>();
    r.finished = j.at("finished").is_null() ? "" : j.at("finished").get<std::string>();
    for (const auto& s : j.at("step_records")) {
      StepRecord sr;
      sr.step = parse_step(s.at("step").get<std::string>());
      sr.status = parse_status(s.at("status").get<std::string>());
      sr.started = s.at("started").is_null() ? "" : s.at("started").get<std::string>();
      sr.finished = s.at("finished").is_null() ? "" : s.at("finished").get<std::string>();
      sr.artifacts = s.at("artifacts").get<std::map<std::string, std::string>>();
      r.step_records.push_back(std::move(sr));
    }
    r.ingest_dir = j.at("ingest_dir").get<std::string>();
    r.train_dir = j.at("train_dir").get<std::string>();
    r.eval_dir = j.at("eval_dir").get<std::string>();
    if (!j.at("error").is_null()) {
      const auto& e = j.at("error");
      r.error = ErrorDetail{e.at("code").get<std::string>(), e.at("message").get<std::string>(),
                            e.at("field").get<std::string>(), e.at("step").get<std::string>()};
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidValue, std::string("malformed run record: ") + e.what());
  }
}

std::string new_ulid() {
  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  static std::mutex mutex;
  static std::uint64_t last_ms = 0;
  static std::uint64_t rand_hi = 0, rand_lo = 0;  // 16 + 64 random bits
  static SplitMix64 rng(std::random_device{}() ^ (std::uint64_t{std::random_device{}()} << 32));

  std::lock_guard lock(mutex);
  auto ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
  if (ms <= last_ms) {
    ms = last_ms;
    if (++rand_lo == 0) rand_hi = (rand_hi + 1) & 0xFFFF;
  } else {
    rand_hi = rng.next() & 0xFFFF;
    rand_lo = rng.next();
  }
  last_ms = ms;

  std::string out(26, '0');
  for (int i = 9; i >= 0; --i, ms >>= 5) out[i] = kAlphabet[ms & 31];
  // 80 random bits: 16 from hi then 64 from lo, 5 bits per character.
  std::uint64_t hi = rand_hi, lo = rand_lo;
  for (int i = 25; i >= 10; --i) {
    out[i] = kAlphabet[lo & 31];
    lo = (lo >> 5) | (hi << 59);
    hi >>= 5;
  }
  return out;
}

// ---------------------------------------------------------------------------

ingest::IngestArtifacts run_ingestion_step(const RunConfig& config, const fs::path& ingest_dir) {
  ingest::IngestOptions options{config.input_filepath, config.connector, config.schema(), config.split_ratio,
                                config.space.seed};
  return ingest::run_ingestion(options, ingest_dir);
}

tune::StudyResult run_training_step(const RunConfig& config, const fs::path& ingest_dir, const fs::path& train_dir) {
  if (!ingest::has_ingest_artifacts(ingest_dir)) throw missing(Step::Training, "train-data", ingest_dir.string());
  const auto scalers = ingest::load_scalers(ingest_dir / ingest::kScalersFile);
  check_columns(config, scalers);
  const auto data = ingest::load_split(ingest_dir);
  tune::StudyOptions options;
  options.scalers_fingerprint = scalers.fingerprint;
  auto result = tune::run_study(config.space, data, config.ml_class, train_dir, options);
  fs::copy_file(ingest_dir / ingest::kScalersFile, train_dir / tune::kCheckpointDir / kCheckpointScalersFile,
                fs::copy_options::overwrite_existing);
  return result;
}

std::vector<fs::path> run_evaluation_step(const fs::path& ingest_dir, const fs::path& train_dir,
                                          const fs::path& eval_dir) {
  const auto checkpoint_dir = train_dir / tune::kCheckpointDir;
  if (!fs::is_regular_file(checkpoint_dir / neural::kManifestFile)) {
    throw missing(Step::Evaluation, "checkpoint", checkpoint_dir.string());
  }
  if (!ingest::has_ingest_artifacts(ingest_dir)) throw missing(Step::Evaluation, "test-data", ingest_dir.string());
  const auto checkpoint = neural::load_checkpoint(checkpoint_dir);
  const auto scalers = ingest::load_scalers(ingest_dir / ingest::kScalersFile);
  if (scalers.fingerprint != checkpoint.manifest.scalers_fingerprint) {
    throw Error(ErrorCode::Inconsistent, "checkpoint was trained with different scalers", "scalers");
  }
  const auto study = tune::load_study(train_dir / tune::kStudyFile);
  const auto data = ingest::load_split(ingest_dir);
  const auto report = evaluate::evaluate_model(checkpoint, data, scalers, study);
  return evaluate::write_reports(report, eval_dir);
}

// ---------------------------------------------------------------------------

Orchestrator::Orchestrator(fs::path artifact_root)
    : root_(std::move(artifact_root)), registry_(root_), worker_([this] { worker_loop(); }) {}

Orchestrator::~Orchestrator() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
  worker_.join();
}

fs::path Orchestrator::run_dir(const std::string& run_id) const { return root_ / "runs" / run_id; }

std::string Orchestrator::launch(const RunConfig& config, std::vector<Step> steps) {
  if (steps.empty()) throw Error(ErrorCode::InvalidValue, "at least one step is required", "steps");
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

  RunRecord record;
  record.run_id = new_ulid();
  record.steps = steps;
  record.created = fsutil::iso8601_now();
  const auto dir = run_dir(record.run_id);
  record.ingest_dir = (dir / "ingest").string();
  record.train_dir = (dir / "train").string();
  record.eval_dir = (dir / "eval").string();

  const bool needs_prior = (has(steps, Step::Training) && !has(steps, Step::Ingestion)) ||
                           (has(steps, Step::Evaluation) && !has(steps, Step::Training));
  if (needs_prior) {
    // Dependencies come from the referenced run. A run still queued ahead of
    // this one is given the benefit of the doubt: it runs first, and a
    // missing artifact then fails this run's step instead.
    std::optional<RunRecord> prior;
    if (config.from_run) {
      try {
        prior = run_status(*config.from_run);
      } catch (const Error&) {
      }
    }
    const bool prior_pending = prior && !terminal(prior->status);
    if (has(steps, Step::Training) || (has(steps, Step::Evaluation) && !has(steps, Step::Ingestion))) {
      const Step who = has(steps, Step::Training) ? Step::Training : Step::Evaluation;
      const std::string what = who == Step::Training ? "train-data" : "test-data";
      if (!prior) throw missing(who, what, config.from_run ? "unknown run " + *config.from_run : "");
      if (!prior_pending && !ingest::has_ingest_artifacts(prior->ingest_dir)) {
        throw missing(who, what, "run " + prior->run_id + " has no ingestion artifacts");
      }
      record.ingest_dir = prior->ingest_dir;
    }
    if (has(steps, Step::Evaluation) && !has(steps, Step::Training)) {
      if (!prior) throw missing(Step::Evaluation, "checkpoint", config.from_run ? "unknown run " + *config.from_run : "");
      if (!prior_pending &&
          !fs::is_regular_file(fs::path(prior->train_dir) / tune::kCheckpointDir / neural::kManifestFile)) {
        throw missing(Step::Evaluation, "checkpoint", "run " + prior->run_id + " has no checkpoint");
      }
      record.train_dir = prior->train_dir;
    }
  }
  for (const auto s : steps) record.step_records.push_back(StepRecord{s, RunStatus::Queued, {}, {}, {}});

  fs::create_directories(dir);
  fsutil::write_file_atomic(dir / "config.json", config.to_json().dump(2) + "\n");
  {
    std::lock_guard lock(mutex_);
    records_[record.run_id] = record;
    fsutil::write_file_atomic(dir / kRunFile, record.to_json().dump(2) + "\n");
    queue_.push_back(Job{record.run_id, config});
  }
  changed_.notify_all();
  return record.run_id;
}

RunRecord Orchestrator::run_status(const std::string& run_id) const {
  {
    std::lock_guard lock(mutex_);
    if (const auto it = records_.find(run_id); it != records_.end()) return it->second;
  }
  const auto path = run_dir(run_id) / kRunFile;
  const bool plausible = !run_id.empty() && run_id.find_first_of("/\\.") == std::string::npos;
  if (!plausible || !fs::is_regular_file(path)) {
    throw Error(ErrorCode::NotFound, "no run with id '" + run_id + "'", "run_id");
  }
  return RunRecord::from_json(Json::parse(fsutil::read_file(path)));
}

RunRecord Orchestrator::wait(const std::string& run_id) const {
  std::unique_lock lock(mutex_);
  const auto it = records_.find(run_id);
  if (it == records_.end()) {
    lock.unlock();
    return run_status(run_id);
  }
  changed_.wait(lock, [&] { return terminal(records_.at(run_id).status); });
  return records_.at(run_id);
}

void Orchestrator::update(const RunRecord& record) {
  {
    std::lock_guard lock(mutex_);
    records_[record.run_id] = record;
    fsutil::write_file_atomic(run_dir(record.run_id) / kRunFile, record.to_json().dump(2) + "\n");
  }
  changed_.notify_all();
}

void Orchestrator::worker_loop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    execute(job);
  }
}

void Orchestrator::execute(Job& job) {
  RunRecord record = run_status(job.run_id);
  const auto dir = run_dir(job.run_id);
  record.status = RunStatus::Running;
  record.started = fsutil::iso8601_now();
  update(record);

  for (auto& sr : record.step_records) {
    sr.status = RunStatus::Running;
    sr.started = fsutil::iso8601_now();
    update(record);
    try {
      switch (sr.step) {
        case Step::Ingestion: {
          const auto a = run_ingestion_step(job.config, record.ingest_dir);
          sr.artifacts = {{"train-data", a.train_data.string()},
                          {"test-data", a.test_data.string()},
                          {"scalers", a.scalers.string()},
                          {"metadata", a.metadata.string()}};
          export_copy(a.scalers, job.config.scalers_path, dir);
          break;
        }
        case Step::Training: {
          run_training_step(job.config, record.ingest_dir, record.train_dir);
          const fs::path train(record.train_dir);
          sr.artifacts = {{"study", (train / tune::kStudyFile).string()},
                          {"trials", (train / tune::kTrialsTableFile).string()},
                          {"checkpoint", (train / tune::kCheckpointDir).string()}};
          export_copy(train / tune::kCheckpointDir, job.config.ml_path, dir);
          break;
        }
        case Step::Evaluation: {
          for (const auto& p : run_evaluation_step(record.ingest_dir, record.train_dir, record.eval_dir)) {
            sr.artifacts[p.filename().string()] = p.string();
          }
          for (const auto name : {evaluate::kHistoryFile, evaluate::kImportanceFile}) {
            export_copy(fs::path(record.eval_dir) / name, job.config.optuna_viz + "/" + std::string(name), dir);
          }
          break;
        }
      }
      sr.status = RunStatus::Succeeded;
      sr.finished = fsutil::iso8601_now();
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      sr.status = RunStatus::Failed;
      sr.finished = fsutil::iso8601_now();
      record.status = RunStatus::Failed;
      const std::string step_name(to_string(sr.step));
      std::string message = e.what();
      if (err && !err->step().empty() && err->step() != step_name) message = err->step() + ": " + message;
      record.error = ErrorDetail{err ? std::string(to_string(err->code())) : "Internal", std::move(message),
                                 err ? err->field() : "", step_name};
      record.finished = fsutil::iso8601_now();
      update(record);
      return;
    }
    update(record);
  }
  record.status = RunStatus::Succeeded;
  record.finished = fsutil::iso8601_now();
  update(record);
}

}  // namespace ai4ef::orchestrate
