#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/orchestrate.hpp"

namespace ai4ef::orchestrate {

namespace {

const std::set<std::string, std::less<>> kKnownKeys = {
    "input_filepath", "authorization", "consumer_agent_id", "provider_agent_id", "feature_cols",
    "target_cols",    "mlClass",       "activation",        "optimizer_name",    "batch_size",
    "l_rate",         "layer_sizes",   "n_layers",          "max_epochs",        "n_trials",
    "num_workers",    "seed",          "ml_path",           "scalers_path",      "optuna_viz",
    "from_run",       "split_ratio",   "warmup_trials",     "warmup_epochs",     "patience",
    "min_delta"};

[[noreturn]] void invalid(const std::string& key, const std::string& message) {
  throw Error(ErrorCode::InvalidValue, key + ": " + message, key);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    auto item = trim(std::string_view(text).substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

/// Scalar or list; comma-separated strings are split.
std::vector<Json> as_items(const std::string& key, const Json& v) {
  if (v.is_array()) return std::vector<Json>(v.begin(), v.end());
  if (v.is_string()) {
    std::vector<Json> out;
    for (auto& item : split_commas(v.get<std::string>())) out.emplace_back(std::move(item));
    return out;
  }
  if (v.is_number()) return {v};
  invalid(key, "expected a list");
}

double number_of(const std::string& key, const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = trim(v.get<std::string>());
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  invalid(key, "expected a number");
}

std::uint64_t count_of(const std::string& key, const Json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const double d = number_of(key, v);
  if (!(d >= 0.0) || d != std::floor(d) || d > 9.007199254740992e15) invalid(key, "expected a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

std::string string_of(const std::string& key, const Json& v) {
  if (!v.is_string()) invalid(key, "expected a string");
  return v.get<std::string>();
}

std::vector<std::size_t> counts_of(const std::string& key, const Json& v) {
  std::vector<std::size_t> out;
  for (const auto& item : as_items(key, v)) out.push_back(count_of(key, item));
  if (out.empty()) invalid(key, "must not be empty");
  return out;
}

/// [lo, hi] pair; a single value means lo == hi.
std::pair<double, double> range_of(const std::string& key, const Json& v) {
  const auto items = as_items(key, v);
  if (items.size() == 1) {
    const double x = number_of(key, items[0]);
    return {x, x};
  }
  if (items.size() != 2) invalid(key, "expected [min, max]");
  return {number_of(key, items[0]), number_of(key, items[1])};
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

Json convert(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      Json out = Json::array();
      for (const auto& item : node) out.push_back(convert(item));
      return out;
    }
    case YAML::NodeType::Map: {
      Json out = Json::object();
      for (const auto& kv : node) out[kv.first.as<std::string>()] = convert(kv.second);
      return out;
    }
    case YAML::NodeType::Scalar:
      break;
  }
  const auto& text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  if (text == "true" || text == "True") return true;
  if (text == "false" || text == "False") return false;
  if (text == "null" || text == "~") return nullptr;
  if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos && text.size() < 19) {
    return std::stoull(text);
  }
  if (!text.empty() && text[0] == '-' && text.size() > 1 && text.size() < 19 &&
      text.find_first_not_of("0123456789", 1) == std::string::npos) {
    return std::stoll(text);
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(text, &used);
    if (used == text.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  return text;
}

}  // namespace

domain::DatasetSchema RunConfig::schema() const { return domain::make_schema(feature_cols, target_cols, ml_class); }

Json RunConfig::to_json() const {
  Json j;
  j["input_filepath"] = input_filepath;
  if (connector) {
    j["authorization"] = connector->authorization;
    j["consumer_agent_id"] = connector->consumer_agent_id;
    j["provider_agent_id"] = connector->provider_agent_id;
  }
  j["feature_cols"] = feature_cols;
  j["target_cols"] = target_cols;
  j["mlClass"] = domain::to_string(ml_class);
  j["activation"] = activation;
  j["optimizer_name"] = optimizer_name;
  j["batch_size"] = space.batch_sizes;
  j["l_rate"] = {space.l_rate_min, space.l_rate_max};
  j["layer_sizes"] = space.layer_sizes;
  j["n_layers"] = {space.n_layers_min, space.n_layers_max};
  j["max_epochs"] = space.max_epochs;
  j["n_trials"] = space.n_trials;
  j["num_workers"] = num_workers;
  j["seed"] = space.seed;
  j["ml_path"] = ml_path;
  j["scalers_path"] = scalers_path;
  j["optuna_viz"] = optuna_viz;
  if (from_run) j["from_run"] = *from_run;
  j["split_ratio"] = split_ratio;
  j["warmup_trials"] = space.warmup_trials;
  j["warmup_epochs"] = space.warmup_epochs;
  j["patience"] = space.patience;
  j["min_delta"] = space.min_delta;
  return j;
}

RunConfig validate_run_config(const Json& raw) {
  if (!raw.is_object()) throw Error(ErrorCode::InvalidValue, "run config must be a key/value mapping");
  for (const auto& [key, value] : raw.items()) {
    if (!kKnownKeys.contains(key)) throw Error(ErrorCode::UnknownField, "unknown config key '" + key + "'", key);
  }
  const auto has = [&](const char* key) { return raw.contains(key) && !raw.at(key).is_null(); };
  const auto require = [&](const char* key) -> const Json& {
    if (!has(key)) throw Error(ErrorCode::MissingField, std::string(key) + " is required", key);
    return raw.at(key);
  };

  RunConfig c;
  c.input_filepath = trim(string_of("input_filepath", require("input_filepath")));
  if (c.input_filepath.empty()) throw Error(ErrorCode::MissingField, "input_filepath is empty", "input_filepath");

  const char* connector_keys[] = {"authorization", "consumer_agent_id", "provider_agent_id"};
  if (std::any_of(std::begin(connector_keys), std::end(connector_keys), has)) {
    ingest::ConnectorConfig conn;
    conn.authorization = trim(string_of("authorization", require("authorization")));
    conn.consumer_agent_id = trim(string_of("consumer_agent_id", require("consumer_agent_id")));
    conn.provider_agent_id = trim(string_of("provider_agent_id", require("provider_agent_id")));
    conn.validate();
    c.connector = std::move(conn);
  }

  for (const auto& [key, out] : {std::pair{"feature_cols", &c.feature_cols}, std::pair{"target_cols", &c.target_cols}}) {
    for (const auto& item : as_items(key, require(key))) {
      if (!item.is_string()) invalid(key, "expected column names");
      out->push_back(domain::canonical_column_name(item.get<std::string>()));
    }
    if (out->empty()) throw Error(ErrorCode::MissingField, std::string(key) + " is empty", key);
  }

  try {
    c.ml_class = domain::parse_task(string_of("mlClass", require("mlClass")));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingField) throw;
    invalid("mlClass", "expected Classifier or Regressor");
  }

  if (has("activation")) {
    c.activation = string_of("activation", raw.at("activation"));
    if (!iequals(c.activation, "ReLU")) invalid("activation", "only ReLU is supported");
    c.activation = "ReLU";
  }
  if (has("optimizer_name")) {
    c.optimizer_name = string_of("optimizer_name", raw.at("optimizer_name"));
    if (!iequals(c.optimizer_name, "Adam")) invalid("optimizer_name", "only Adam is supported");
    c.optimizer_name = "Adam";
  }

  auto& s = c.space;
  if (has("batch_size")) s.batch_sizes = counts_of("batch_size", raw.at("batch_size"));
  if (has("layer_sizes")) s.layer_sizes = counts_of("layer_sizes", raw.at("layer_sizes"));
  if (has("l_rate")) std::tie(s.l_rate_min, s.l_rate_max) = range_of("l_rate", raw.at("l_rate"));
  if (has("n_layers")) {
    const auto [lo, hi] = range_of("n_layers", raw.at("n_layers"));
    s.n_layers_min = count_of("n_layers", lo);
    s.n_layers_max = count_of("n_layers", hi);
  }
  if (has("max_epochs")) s.max_epochs = count_of("max_epochs", raw.at("max_epochs"));
  if (has("n_trials")) s.n_trials = count_of("n_trials", raw.at("n_trials"));
  if (has("seed")) s.seed = count_of("seed", raw.at("seed"));
  if (has("warmup_trials")) s.warmup_trials = count_of("warmup_trials", raw.at("warmup_trials"));
  if (has("warmup_epochs")) s.warmup_epochs = count_of("warmup_epochs", raw.at("warmup_epochs"));
  if (has("patience")) s.patience = count_of("patience", raw.at("patience"));
  if (has("min_delta")) s.min_delta = number_of("min_delta", raw.at("min_delta"));
  if (has("num_workers")) c.num_workers = count_of("num_workers", raw.at("num_workers"));
  if (has("split_ratio")) c.split_ratio = number_of("split_ratio", raw.at("split_ratio"));
  try {
    s.validate();
  } catch (const Error& e) {
    invalid(e.field(), e.what());
  }
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) invalid("split_ratio", "must lie strictly between 0 and 1");

  for (const auto& [key, out] : {std::pair{"ml_path", &c.ml_path}, std::pair{"scalers_path", &c.scalers_path},
                                 std::pair{"optuna_viz", &c.optuna_viz}}) {
    if (!has(key)) continue;
    *out = trim(string_of(key, raw.at(key)));
    if (out->empty()) invalid(key, "path must not be empty");
  }
  if (has("from_run")) c.from_run = trim(string_of("from_run", raw.at("from_run")));

  c.schema();  // UnknownField / Inconsistent
  return c;
}

Json yaml_to_json(std::string_view text) {
  try {
    return convert(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::InvalidValue, std::string("invalid YAML: ") + e.what());
  }
}

Json load_config_document(const fs::path& path) {
  const auto text = fsutil::read_file(path);
  if (path.extension() == ".json") {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::InvalidValue, std::string("invalid JSON: ") + e.what(), path.string());
    }
  }
  return yaml_to_json(text);
}

void apply_override(Json& document, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::InvalidValue, "override must look like key=value", std::string(assignment));
  }
  const auto key = trim(assignment.substr(0, eq));
  const auto value = std::string(assignment.substr(eq + 1));
  if (!document.is_object()) document = Json::object();
  Json parsed;
  try {
    parsed = value.empty() ? Json(nullptr) : convert(YAML::Load(value));
  } catch (const YAML::Exception&) {
    parsed = value;
  }
  if (parsed.is_object()) parsed = value;  // "a: b" is not a map override
  document[key] = std::move(parsed);
}

}  // namespace ai4ef::orchestrate
