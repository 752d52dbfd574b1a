#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ai4ef/domain.hpp"
#include "ai4ef/orchestrate.hpp"

namespace httplib {
class Server;
}

namespace ai4ef::serve {

inline constexpr std::string_view kApiPrefix = "/api/v1";

struct ServeConfig {
  std::vector<std::string> api_keys;  // each "APIKEY-..."
  bool auth_enabled = true;
  std::size_t prediction_retention = 1000;

  /// Throws InvalidConfig when auth is on without keys or a key lacks the prefix.
  void validate() const;
  /// AI4EF_API_KEYS (comma-separated), AI4EF_AUTH=off, AI4EF_PREDICTION_RETENTION.
  static ServeConfig from_environment();
};

/// Static key set compared in constant time per key.
class ApiKeyAuth {
 public:
  explicit ApiKeyAuth(std::vector<std::string> keys) : keys_(std::move(keys)) {}
  /// Accepts the bare key or "Bearer <key>".
  bool accepts(std::string_view header_value) const;

 private:
  std::vector<std::string> keys_;
};

struct Request {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;

  std::optional<std::string> header(std::string_view name) const;
  std::optional<std::string> param(std::string_view name) const;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;

  Json json() const { return Json::parse(body); }
};

/// {code, message, field?}
Json problem(std::string_view code, std::string_view message, std::string_view field = {});

struct StoredPrediction {
  std::string id;
  orchestrate::Service service = orchestrate::Service::Retrofit;
  Json response;
};

/// Transport-independent request handling; the HTTP server is a thin shell
/// around it.
class Api {
 public:
  Api(ServeConfig config, orchestrate::Orchestrator& orchestrator);

  Response handle(const Request& request);

  /// Response bodies are a pure function of the body and the deployed model
  /// version, apart from "timestamp"; the stored prediction id travels in the
  /// X-Prediction-Id header.
  Json predict_retrofit(const Json& body);
  Json predict_pv(const Json& body);
  /// Throws NotFound, UnsupportedFormat.
  std::string report_csv(const std::string& prediction_id, std::string_view format) const;

 private:
  Response route(const Request& request);
  std::shared_ptr<const orchestrate::DeployedModel> model(orchestrate::Service service);
  std::string store(orchestrate::Service service, const Json& response);

  ServeConfig config_;
  ApiKeyAuth auth_;
  orchestrate::Orchestrator& orchestrator_;

  std::mutex models_mutex_;
  std::map<orchestrate::Service, std::shared_ptr<const orchestrate::DeployedModel>> models_;

  mutable std::mutex predictions_mutex_;
  std::deque<StoredPrediction> predictions_;
};

/// HTTP/1.1 front end.
class Server {
 public:
  explicit Server(Api& api);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds host:port; port 0 picks a free port. Returns the bound port or
  /// throws IoError.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void run();
  void stop();

 private:
  Api& api_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ai4ef::serve
