#include <algorithm>
#include <set>

#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/orchestrate.hpp"

namespace ai4ef::orchestrate {

namespace {

constexpr std::string_view kActiveFile = "active.json";
constexpr std::string_view kEntryFile = "entry.json";

std::string version_name(std::size_t v) { return "v" + std::to_string(v); }

std::optional<std::size_t> parse_version_name(const std::string& name) {
  if (name.size() < 2 || name[0] != 'v' || name.find_first_not_of("0123456789", 1) != std::string::npos) {
    return std::nullopt;
  }
  return std::stoull(name.substr(1));
}

template <std::size_t N>
std::set<std::string> name_set(const std::array<std::string_view, N>& names) {
  return {names.begin(), names.end()};
}

}  // namespace

std::string_view to_string(Service service) { return service == Service::Retrofit ? "retrofit" : "pv"; }

Service parse_service(std::string_view text) {
  if (text == "retrofit") return Service::Retrofit;
  if (text == "pv") return Service::Pv;
  throw Error(ErrorCode::NotFound, "unknown service '" + std::string(text) + "'", "service");
}

domain::Task task_for(Service service) {
  return service == Service::Retrofit ? domain::Task::Classifier : domain::Task::Regressor;
}

Json ModelVersion::to_json() const {
  Json j;
  j["service"] = to_string(service);
  j["version"] = version;
  j["active"] = active;
  j["source"] = source;
  j["deployed_at"] = deployed_at;
  j["objective"] = objective ? Json(*objective) : Json(nullptr);
  return j;
}

Registry::Registry(fs::path root) : root_(std::move(root)) {}

fs::path Registry::service_dir(Service service) const { return root_ / "registry" / std::string(to_string(service)); }

ModelVersion Registry::deploy(Service service, const fs::path& checkpoint_dir) {
  const auto checkpoint = neural::load_checkpoint(checkpoint_dir);
  const auto& manifest = checkpoint.manifest;
  if (manifest.task != task_for(service)) {
    throw Error(ErrorCode::TaskMismatch,
                "a " + std::string(domain::to_string(manifest.task)) + " checkpoint cannot serve " +
                    std::string(to_string(service)),
                "task");
  }
  const auto targets = service == Service::Retrofit ? name_set(domain::kRetrofitTargetNames)
                                                    : name_set(domain::kPvTargetNames);
  if (std::set<std::string>(manifest.target_columns.begin(), manifest.target_columns.end()) != targets ||
      manifest.target_columns.size() != targets.size()) {
    throw Error(ErrorCode::SchemaMismatch, "checkpoint targets do not match the service outputs", "target_cols");
  }
  const auto scalers_path = checkpoint_dir / kCheckpointScalersFile;
  if (!fs::is_regular_file(scalers_path)) {
    throw Error(ErrorCode::MissingArtifact, "no scalers.json next to the checkpoint", "scalers");
  }
  const auto scalers = ingest::load_scalers(scalers_path);
  if (scalers.fingerprint != manifest.scalers_fingerprint) {
    throw Error(ErrorCode::SchemaMismatch, "scalers.json was not fitted for this checkpoint", "scalers");
  }
  const auto features = service == Service::Retrofit ? name_set(domain::kRetrofitFeatureNames)
                                                     : name_set(domain::kPvFeatureNames);
  for (const auto& col : scalers.features) {
    if (!features.contains(col.column)) {
      throw Error(ErrorCode::SchemaMismatch, "feature '" + col.column + "' is not a service input", "feature_cols");
    }
  }

  std::lock_guard lock(mutex_);
  const auto dir = service_dir(service);
  fsutil::DirectoryLock dir_lock(dir);
  std::size_t next = 1;
  std::error_code ec;
  if (fs::is_directory(dir / "versions")) {
    for (const auto& entry : fs::directory_iterator(dir / "versions")) {
      if (auto v = parse_version_name(entry.path().filename().string())) next = std::max(next, *v + 1);
    }
  }

  ModelVersion mv{service, next, fs::absolute(checkpoint_dir).lexically_normal().string(), fsutil::iso8601_now(),
                  manifest.objective, true};
  const auto staging = dir / (".staging-" + version_name(next));
  fs::remove_all(staging, ec);
  fs::create_directories(staging);
  for (const auto name : {neural::kManifestFile, neural::kWeightsFile, kCheckpointScalersFile}) {
    fs::copy_file(checkpoint_dir / name, staging / name, fs::copy_options::overwrite_existing);
  }
  Json entry = mv.to_json();
  entry.erase("active");
  fsutil::write_file_atomic(staging / kEntryFile, entry.dump(2) + "\n");
  fs::create_directories(dir / "versions");
  fs::rename(staging, dir / "versions" / version_name(next));
  fsutil::write_file_atomic(dir / kActiveFile, Json{{"version", next}}.dump() + "\n");
  return mv;
}

std::optional<std::size_t> Registry::active_version(Service service) const {
  const auto path = service_dir(service) / kActiveFile;
  if (!fs::is_regular_file(path)) return std::nullopt;
  try {
    return Json::parse(fsutil::read_file(path)).at("version").get<std::size_t>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::InvalidValue, "registry pointer is unreadable", path.string());
  }
}

std::vector<ModelVersion> Registry::list() const {
  std::vector<ModelVersion> out;
  for (const auto service : {Service::Retrofit, Service::Pv}) {
    const auto versions = service_dir(service) / "versions";
    if (!fs::is_directory(versions)) continue;
    const auto active = active_version(service);
    std::vector<ModelVersion> found;
    for (const auto& entry : fs::directory_iterator(versions)) {
      const auto v = parse_version_name(entry.path().filename().string());
      if (!v) continue;
      ModelVersion mv{service, *v, {}, {}, std::nullopt, active == v};
      try {
        const auto j = Json::parse(fsutil::read_file(entry.path() / kEntryFile));
        mv.source = j.value("source", "");
        mv.deployed_at = j.value("deployed_at", "");
        if (j.contains("objective") && !j["objective"].is_null()) mv.objective = j["objective"].get<double>();
      } catch (const std::exception&) {
        // entry metadata is informational only
      }
      found.push_back(std::move(mv));
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.version < b.version; });
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

std::shared_ptr<const DeployedModel> Registry::load_active(Service service) const {
  const auto version = active_version(service);
  if (!version) {
    throw Error(ErrorCode::NoModelDeployed, "no " + std::string(to_string(service)) + " model is deployed",
                std::string(to_string(service)));
  }
  const auto dir = service_dir(service) / "versions" / version_name(*version);
  auto model = std::make_shared<DeployedModel>();
  model->service = service;
  model->version = *version;
  model->checkpoint = neural::load_checkpoint(dir);
  model->scalers = ingest::load_scalers(dir / kCheckpointScalersFile);
  return model;
}

}  // namespace ai4ef::orchestrate
