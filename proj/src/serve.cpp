#include "ai4ef/serve.hpp"

#include <httplib.h>
#include <openssl/crypto.h>

#include <algorithm>
#include <cstdlib>

#include "ai4ef/csv.hpp"
#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/ingest.hpp"
#include "ai4ef/neural.hpp"

namespace ai4ef::serve {

namespace {

using orchestrate::Service;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string to_text(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return fsutil::format_double(v.get<double>());
  return v.dump();
}

bool is_validation(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownClass:
    case ErrorCode::MissingField:
    case ErrorCode::OutOfRange:
    case ErrorCode::UnknownField:
    case ErrorCode::InvalidValue:
    case ErrorCode::UnseenCategory:
    case ErrorCode::Inconsistent:
    case ErrorCode::InvalidConfig:
    case ErrorCode::BadRatio:
    case ErrorCode::UnrecognizedSource:
    case ErrorCode::UnsupportedSource:
      return true;
    default:
      return false;
  }
}

int status_for(ErrorCode code, int validation_status) {
  if (is_validation(code)) return validation_status;
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::NoModelDeployed: return 503;
    case ErrorCode::UnsupportedFormat: return 400;
    case ErrorCode::MissingArtifact:
    case ErrorCode::TaskMismatch:
    case ErrorCode::CorruptWeights:
    case ErrorCode::VersionMismatch:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::Busy:
      return 409;
    default:
      return 500;
  }
}

Response json_response(int status, const Json& body) { return Response{status, "application/json", body.dump(), {}}; }

Response error_response(const Error& e, int validation_status) {
  // what() carries a "Code: " prefix; the code travels separately here.
  std::string message = e.what();
  const auto prefix = std::string(to_string(e.code())) + ": ";
  if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
  return json_response(status_for(e.code(), validation_status), problem(to_string(e.code()), message, e.field()));
}

Json parse_body(const std::string& body) {
  try {
    return Json::parse(body);
  } catch (const Json::parse_error&) {
    throw Error(ErrorCode::InvalidValue, "request body is not valid JSON", "body");
  }
}

std::vector<ingest::Cell> feature_cells(const ingest::ScalerSet& scalers, const Json& inputs) {
  std::vector<ingest::Cell> cells;
  for (const auto& s : scalers.features) {
    const auto& v = inputs.at(s.column);
    if (v.is_null()) {
      cells.emplace_back(std::monostate{});
    } else if (v.is_string()) {
      cells.emplace_back(v.get<std::string>());
    } else {
      cells.emplace_back(v.get<double>());
    }
  }
  return cells;
}

std::vector<double> run_model(const orchestrate::DeployedModel& m, const Json& inputs) {
  const auto x = ingest::transform_features(m.scalers, feature_cells(m.scalers, inputs));
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.row(0).begin());
  const auto out = neural::forward(m.checkpoint.model, batch);
  return {out.row(0).begin(), out.row(0).end()};
}

std::size_t target_index(const orchestrate::DeployedModel& m, std::string_view name) {
  const auto& cols = m.checkpoint.manifest.target_columns;
  return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
}

}  // namespace

void ServeConfig::validate() const {
  if (auth_enabled && api_keys.empty()) throw Error(ErrorCode::InvalidConfig, "no API keys configured", "api_keys");
  for (const auto& k : api_keys) {
    if (k.rfind("APIKEY-", 0) != 0 || k.size() <= 7) {
      throw Error(ErrorCode::InvalidConfig, "API keys must look like APIKEY-<token>", "api_keys");
    }
  }
  if (prediction_retention == 0) {
    throw Error(ErrorCode::InvalidConfig, "prediction retention must be positive", "prediction_retention");
  }
}

ServeConfig ServeConfig::from_environment() {
  ServeConfig c;
  if (const char* keys = std::getenv("AI4EF_API_KEYS")) {
    std::string_view rest(keys);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      auto key = rest.substr(0, comma);
      while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
      while (!key.empty() && key.back() == ' ') key.remove_suffix(1);
      if (!key.empty()) c.api_keys.emplace_back(key);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  if (const char* auth = std::getenv("AI4EF_AUTH")) c.auth_enabled = lower(auth) != "off";
  if (const char* n = std::getenv("AI4EF_PREDICTION_RETENTION")) c.prediction_retention = std::strtoull(n, nullptr, 10);
  return c;
}

bool ApiKeyAuth::accepts(std::string_view header_value) const {
  if (header_value.rfind("Bearer ", 0) == 0) header_value.remove_prefix(7);
  bool ok = false;
  for (const auto& key : keys_) {
    if (key.size() == header_value.size() && CRYPTO_memcmp(key.data(), header_value.data(), key.size()) == 0) {
      ok = true;
    }
  }
  return ok;
}

std::optional<std::string> Request::header(std::string_view name) const {
  if (const auto it = headers.find(lower(name)); it != headers.end()) return it->second;
  return std::nullopt;
}

std::optional<std::string> Request::param(std::string_view name) const {
  if (const auto it = query.find(std::string(name)); it != query.end()) return it->second;
  return std::nullopt;
}

Json problem(std::string_view code, std::string_view message, std::string_view field) {
  Json j;
  j["code"] = code;
  j["message"] = message;
  if (!field.empty()) j["field"] = field;
  return j;
}

Api::Api(ServeConfig config, orchestrate::Orchestrator& orchestrator)
    : config_(std::move(config)), auth_(config_.api_keys), orchestrator_(orchestrator) {
  config_.validate();
}

std::shared_ptr<const orchestrate::DeployedModel> Api::model(Service service) {
  auto& registry = orchestrator_.registry();
  std::lock_guard lock(models_mutex_);
  const auto active = registry.active_version(service);
  auto& cached = models_[service];
  if (!active) cached.reset();
  if (active && (!cached || cached->version != *active)) cached = registry.load_active(service);
  if (!cached) {
    throw Error(ErrorCode::NoModelDeployed, "no " + std::string(orchestrate::to_string(service)) + " model is deployed",
                std::string(orchestrate::to_string(service)));
  }
  return cached;
}

Json Api::predict_retrofit(const Json& body) {
  const auto features = domain::validate_retrofit_features(body);
  const auto m = model(Service::Retrofit);
  const auto inputs = domain::to_json(features);
  const auto p = run_model(*m, inputs);

  Json outputs = Json::object(), probabilities = Json::object();
  for (const auto name : domain::kRetrofitTargetNames) {
    const double prob = p.at(target_index(*m, name));
    outputs[std::string(name)] = prob >= 0.5;
    probabilities[std::string(name)] = prob;
  }
  Json r;
  r["service"] = "retrofit";
  r["model_version"] = m->version;
  r["inputs"] = inputs;
  r["outputs"] = std::move(outputs);
  r["probabilities"] = std::move(probabilities);
  r["imputed_fields"] = Json::array();
  r["timestamp"] = fsutil::iso8601_now();
  return r;
}

Json Api::predict_pv(const Json& body) {
  const auto features = domain::validate_pv_features(body);
  const auto m = model(Service::Pv);
  const auto inputs = domain::to_json(features);
  const auto encoded = run_model(*m, inputs);
  const auto raw = ingest::inverse_transform_targets(m->scalers, encoded);

  Json imputed = Json::array();
  if (features.generation_imputed()) {
    for (const auto& s : m->scalers.features) {
      if (s.column == "average_energy_generated") imputed.push_back(s.column);
    }
  }
  Json outputs = Json::object();
  for (const auto name : domain::kPvTargetNames) outputs[std::string(name)] = raw.at(target_index(*m, name));
  Json r;
  r["service"] = "pv";
  r["model_version"] = m->version;
  r["inputs"] = inputs;
  r["outputs"] = std::move(outputs);
  r["imputed_fields"] = std::move(imputed);
  r["timestamp"] = fsutil::iso8601_now();
  return r;
}

std::string Api::store(Service service, const Json& response) {
  StoredPrediction p{orchestrate::new_ulid(), service, response};
  std::lock_guard lock(predictions_mutex_);
  predictions_.push_back(p);
  while (predictions_.size() > config_.prediction_retention) predictions_.pop_front();
  return p.id;
}

std::string Api::report_csv(const std::string& prediction_id, std::string_view format) const {
  if (lower(format) != "csv") {
    throw Error(ErrorCode::UnsupportedFormat, "only format=csv is supported", "format");
  }
  std::optional<StoredPrediction> found;
  {
    std::lock_guard lock(predictions_mutex_);
    for (const auto& p : predictions_) {
      if (p.id == prediction_id) found = p;
    }
  }
  if (!found) throw Error(ErrorCode::NotFound, "no stored prediction '" + prediction_id + "'", "run");
  const auto& r = found->response;
  const auto& imputed = r.at("imputed_fields");

  csv::Document doc{{"section", "Inputs", ""}, {}};
  doc.rows.push_back({"field", "value", "note"});
  for (const auto& [name, value] : r.at("inputs").items()) {
    const bool was_imputed = std::find(imputed.begin(), imputed.end(), Json(name)) != imputed.end();
    doc.rows.push_back({name, to_text(value), was_imputed ? "imputed" : ""});
  }
  if (found->service == Service::Retrofit) {
    doc.rows.push_back({"section", "Recommended measures", ""});
    doc.rows.push_back({"measure", "recommended", "probability"});
    for (const auto name : domain::kRetrofitTargetNames) {
      const std::string key(name);
      doc.rows.push_back({key, r.at("outputs").at(key).get<bool>() ? "true" : "false",
                          to_text(r.at("probabilities").at(key))});
    }
  } else {
    doc.rows.push_back({"section", "Predicted savings", ""});
    doc.rows.push_back({"target", "value", ""});
    for (const auto name : domain::kPvTargetNames) {
      const std::string key(name);
      doc.rows.push_back({key, to_text(r.at("outputs").at(key)), ""});
    }
  }
  return csv::format(doc);
}

Response Api::handle(const Request& request) {
  if (config_.auth_enabled) {
    const auto key = request.header("authorization");
    if (!key || !auth_.accepts(*key)) {
      return json_response(401, problem("Unauthorized", "a valid API key is required", "Authorization"));
    }
  }
  try {
    return route(request);
  } catch (const Error& e) {
    return error_response(e, 400);
  } catch (const std::exception& e) {
    return json_response(500, problem("Internal", e.what()));
  }
}

Response Api::route(const Request& request) {
  const std::string prefix(kApiPrefix);
  const auto& method = request.method;
  if (request.path.rfind(prefix + "/", 0) != 0) {
    return json_response(404, problem("NotFound", "no such route"));
  }
  const auto path = request.path.substr(prefix.size());
  const auto not_allowed = [] { return json_response(405, problem("MethodNotAllowed", "method not allowed")); };

  if (path == "/retrofit/predict" || path == "/pv/predict") {
    if (method != "POST") return not_allowed();
    const auto service = path == "/pv/predict" ? Service::Pv : Service::Retrofit;
    try {
      const auto body = parse_body(request.body);
      auto out = service == Service::Pv ? predict_pv(body) : predict_retrofit(body);
      const auto id = store(service, out);
      auto resp = json_response(200, out);
      resp.headers["X-Prediction-Id"] = id;
      return resp;
    } catch (const Error& e) {
      return error_response(e, 422);
    }
  }
  if (path == "/retrofit/report") {
    if (method != "GET") return not_allowed();
    const auto id = request.param("run");
    if (!id || id->empty()) throw Error(ErrorCode::MissingField, "query parameter 'run' is required", "run");
    auto csv_text = report_csv(*id, request.param("format").value_or("csv"));
    Response resp{200, "text/csv; charset=utf-8", std::move(csv_text), {}};
    resp.headers["Content-Disposition"] = "attachment; filename=\"report_" + *id + ".csv\"";
    return resp;
  }
  if (path == "/models") {
    if (method != "GET") return not_allowed();
    Json list = Json::array();
    for (const auto& v : orchestrator_.registry().list()) list.push_back(v.to_json());
    return json_response(200, Json{{"models", list}});
  }
  if (path.rfind("/models/", 0) == 0) {
    if (method != "POST") return not_allowed();
    const auto service = orchestrate::parse_service(path.substr(8));
    const auto body = parse_body(request.body);
    if (!body.is_object() || !body.contains("run_id") || !body["run_id"].is_string()) {
      throw Error(ErrorCode::MissingField, "run_id is required", "run_id");
    }
    const auto record = orchestrator_.run_status(body["run_id"].get<std::string>());
    const auto checkpoint = std::filesystem::path(record.train_dir) / tune::kCheckpointDir;
    return json_response(201, orchestrator_.registry().deploy(service, checkpoint).to_json());
  }
  if (path == "/runs") {
    if (method != "POST") return not_allowed();
    auto body = parse_body(request.body);
    if (!body.is_object()) throw Error(ErrorCode::InvalidValue, "run request must be a JSON object", "body");
    std::vector<orchestrate::Step> steps = orchestrate::kAllSteps;
    if (body.contains("steps")) {
      steps.clear();
      const auto& s = body["steps"];
      if (!s.is_array()) throw Error(ErrorCode::InvalidValue, "steps must be a list", "steps");
      for (const auto& item : s) {
        if (!item.is_string()) throw Error(ErrorCode::InvalidValue, "steps must be step names", "steps");
        steps.push_back(orchestrate::parse_step(item.get<std::string>()));
      }
      body.erase("steps");
    }
    const auto config = orchestrate::validate_run_config(body);
    const auto id = orchestrator_.launch(config, steps);
    auto resp = json_response(202, Json{{"run_id", id}, {"status", "Queued"}});
    resp.headers["Location"] = std::string(kApiPrefix) + "/runs/" + id;
    return resp;
  }
  if (path.rfind("/runs/", 0) == 0) {
    if (method != "GET") return not_allowed();
    return json_response(200, orchestrator_.run_status(path.substr(6)).to_json());
  }
  return json_response(404, problem("NotFound", "no such route"));
}

// ---------------------------------------------------------------------------

Server::Server(Api& api) : api_(api), server_(std::make_unique<httplib::Server>()) {
  server_->set_payload_max_length(1 << 20);
  const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    if (req.method == "OPTIONS") {
      res.status = 204;
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
      return;
    }
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) r.headers.emplace(lower(k), v);
    r.body = req.body;
    const auto out = api_.handle(r);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_header("Access-Control-Expose-Headers", "X-Prediction-Id, Location");
    res.set_content(out.body, out.content_type);
  };
  const std::string any = ".*";
  server_->Get(any, handler);
  server_->Post(any, handler);
  server_->Put(any, handler);
  server_->Delete(any, handler);
  server_->Patch(any, handler);
  server_->Options(any, handler);
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorCode::IoError, "cannot bind " + host, host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port), host);
  }
  return port;
}

void Server::run() { server_->listen_after_bind(); }

void Server::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace ai4ef::serve
