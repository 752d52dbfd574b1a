#include <doctest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include "ai4ef/csv.hpp"
#include "ai4ef/error.hpp"
#include "ai4ef/serve.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace ai4ef;
using namespace ai4ef::serve;
using testing::TempDir;

namespace {

const std::string kKey = "APIKEY-test-1";

ServeConfig config() {
  ServeConfig c;
  c.api_keys = {kKey, "APIKEY-other"};
  return c;
}

Request request(std::string method, std::string path, std::string body = {}, bool authorised = true) {
  Request r;
  r.method = std::move(method);
  r.path = std::string(kApiPrefix) + path;
  r.body = std::move(body);
  if (authorised) r.headers["authorization"] = kKey;
  return r;
}

std::set<std::string> keys(const Json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

template <std::size_t N>
std::set<std::string> names(const std::array<std::string_view, N>& a) {
  return {a.begin(), a.end()};
}

/// Shared artifact root with one deployed model per service.
struct Deployed {
  TempDir root{"serve"};
  orchestrate::Orchestrator orch{root.path()};
  Deployed() { testing::deploy_fixture_models(orch); }
};

Deployed& deployed() {
  static Deployed d;
  return d;
}

}  // namespace

TEST_CASE("serve configuration and key checks") {
  CHECK_NOTHROW(config().validate());
  ServeConfig none;
  CHECK_THROWS_AS(none.validate(), Error);
  none.auth_enabled = false;
  CHECK_NOTHROW(none.validate());
  ServeConfig bad;
  bad.api_keys = {"secret"};
  CHECK_THROWS_AS(bad.validate(), Error);

  ApiKeyAuth auth({kKey});
  CHECK(auth.accepts(kKey));
  CHECK(auth.accepts("Bearer " + kKey));
  CHECK_FALSE(auth.accepts("APIKEY-test-2"));
  CHECK_FALSE(auth.accepts(kKey + "x"));
  CHECK_FALSE(auth.accepts(""));
  CHECK_FALSE(auth.accepts("Bearer "));
}

TEST_CASE("every route requires a key") {
  TempDir root("serve-auth");
  orchestrate::Orchestrator orch(root.path());
  Api api(config(), orch);
  const std::vector<std::pair<std::string, std::string>> routes = {
      {"POST", "/retrofit/predict"}, {"POST", "/pv/predict"}, {"GET", "/retrofit/report"},
      {"GET", "/models"},            {"POST", "/models/retrofit"}, {"POST", "/runs"},
      {"GET", "/runs/01ARZ3NDEKTSV4RRFFQ69G5FAV"}, {"GET", "/nowhere"}};
  for (const auto& [method, path] : routes) {
    CAPTURE(path);
    CHECK(api.handle(request(method, path, "{}", false)).status == 401);
    auto wrong = request(method, path, "{}", false);
    wrong.headers["authorization"] = "APIKEY-nope";
    CHECK(api.handle(wrong).status == 401);
  }
  auto bearer = request("GET", "/models", {}, false);
  bearer.headers["authorization"] = "Bearer APIKEY-other";
  CHECK(api.handle(bearer).status == 200);
}

TEST_CASE("predictions need a deployed model") {
  TempDir root("serve-empty");
  orchestrate::Orchestrator orch(root.path());
  Api api(config(), orch);
  const auto r = api.handle(request("POST", "/retrofit/predict", testing::retrofit_example().dump()));
  CHECK(r.status == 503);
  CHECK(r.json()["code"] == "NoModelDeployed");
  CHECK(api.handle(request("GET", "/models")).json()["models"].empty());
}

TEST_CASE("retrofit prediction") {
  Api api(config(), deployed().orch);
  const auto r = api.handle(request("POST", "/retrofit/predict", testing::retrofit_example().dump()));
  REQUIRE(r.status == 200);
  const auto body = r.json();
  CHECK(body["service"] == "retrofit");
  CHECK(keys(body["outputs"]) == names(domain::kRetrofitTargetNames));
  for (const auto& [name, value] : body["outputs"].items()) {
    CHECK(value.is_boolean());
    const double p = body["probabilities"][name].get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(value.get<bool>() == (p >= 0.5));
  }
  CHECK(body["imputed_fields"].empty());
  CHECK(body["inputs"]["initial_energy_class"] == "E");
  CHECK(r.headers.count("X-Prediction-Id") == 1);

  // same body, same answer apart from the timestamp
  auto again = api.handle(request("POST", "/retrofit/predict", testing::retrofit_example().dump())).json();
  auto first = body;
  first.erase("timestamp");
  again.erase("timestamp");
  CHECK(first == again);

  auto bad = testing::retrofit_example();
  bad["initial_energy_class"] = "Z";
  const auto rejected = api.handle(request("POST", "/retrofit/predict", bad.dump()));
  CHECK(rejected.status == 422);
  CHECK(rejected.json()["field"] == "initial_energy_class");

  CHECK(api.handle(request("POST", "/retrofit/predict", "{not json")).status == 422);
  CHECK(api.handle(request("GET", "/retrofit/predict")).status == 405);
}

TEST_CASE("pv prediction") {
  Api api(config(), deployed().orch);
  const auto r = api.handle(request("POST", "/pv/predict", testing::pv_example().dump()));
  REQUIRE(r.status == 200);
  const auto body = r.json();
  CHECK(keys(body["outputs"]) == names(domain::kPvTargetNames));
  for (const auto& [name, value] : body["outputs"].items()) CHECK(value.is_number());
  CHECK(body["imputed_fields"] == Json::array({"average_energy_generated"}));

  auto generated = testing::pv_example();
  generated["average_energy_generated"] = 2400;
  const auto with = api.handle(request("POST", "/pv/predict", generated.dump()));
  REQUIRE(with.status == 200);
  CHECK(with.json()["imputed_fields"].empty());

  auto unseen = testing::pv_example();
  unseen["region"] = "Atlantis";
  const auto rejected = api.handle(request("POST", "/pv/predict", unseen.dump()));
  CHECK(rejected.status == 422);
  CHECK(rejected.json()["code"] == "UnseenCategory");
}

TEST_CASE("prediction report") {
  Api api(config(), deployed().orch);
  const auto predicted = api.handle(request("POST", "/retrofit/predict", testing::retrofit_example().dump()));
  const auto id = predicted.headers.at("X-Prediction-Id");

  auto get = request("GET", "/retrofit/report");
  get.query.emplace("run", id);
  const auto r = api.handle(get);
  REQUIRE(r.status == 200);
  CHECK(r.content_type.rfind("text/csv", 0) == 0);
  const auto doc = csv::parse(r.body);
  std::set<std::string> first_column;
  for (const auto& row : doc.rows) first_column.insert(row[0]);
  for (const auto name : domain::kRetrofitFeatureNames) CHECK(first_column.count(std::string(name)) == 1);
  for (const auto name : domain::kRetrofitTargetNames) CHECK(first_column.count(std::string(name)) == 1);

  auto unknown = request("GET", "/retrofit/report");
  unknown.query.emplace("run", "nope");
  CHECK(api.handle(unknown).status == 404);

  auto xlsx = get;
  xlsx.query.emplace("format", "xlsx");
  const auto unsupported = api.handle(xlsx);
  CHECK(unsupported.status == 400);
  CHECK(unsupported.json()["code"] == "UnsupportedFormat");

  CHECK(api.handle(request("GET", "/retrofit/report")).status == 400);
}

TEST_CASE("stored predictions are bounded") {
  auto c = config();
  c.prediction_retention = 2;
  Api api(c, deployed().orch);
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    ids.push_back(api.handle(request("POST", "/retrofit/predict", testing::retrofit_example().dump()))
                      .headers.at("X-Prediction-Id"));
  }
  CHECK_THROWS_AS(api.report_csv(ids[0], "csv"), Error);
  CHECK_NOTHROW(api.report_csv(ids[2], "csv"));
}

TEST_CASE("models and runs") {
  Api api(config(), deployed().orch);
  const auto models = api.handle(request("GET", "/models"));
  REQUIRE(models.status == 200);
  const auto list = models.json()["models"];
  CHECK(list.size() == 2);
  for (const auto& m : list) CHECK(m["active"] == true);

  auto run_body = testing::quick_retrofit_config();
  const auto launched = api.handle(request("POST", "/runs", run_body.dump()));
  REQUIRE(launched.status == 202);
  const auto id = launched.json()["run_id"].get<std::string>();
  CHECK(id.size() == 26);
  CHECK(launched.headers.at("Location") == std::string(kApiPrefix) + "/runs/" + id);
  deployed().orch.wait(id);
  const auto status = api.handle(request("GET", "/runs/" + id));
  CHECK(status.status == 200);
  CHECK(status.json()["status"] == "Succeeded");

  CHECK(api.handle(request("GET", "/runs/unknown")).status == 404);

  run_body["mlClass"] = "Regressor";
  CHECK(api.handle(request("POST", "/runs", run_body.dump())).status == 400);
  const auto missing = api.handle(request("POST", "/runs", Json{{"steps", {"Training"}}}.dump()));
  CHECK(missing.status == 400);
  auto train_only = testing::quick_retrofit_config();
  train_only["steps"] = {"Training"};
  const auto conflict = api.handle(request("POST", "/runs", train_only.dump()));
  CHECK(conflict.status == 409);
  CHECK(conflict.json()["code"] == "MissingArtifact");

  const auto redeploy = api.handle(request("POST", "/models/retrofit", Json{{"run_id", id}}.dump()));
  CHECK(redeploy.status == 201);
  CHECK(redeploy.json()["version"] == 2);
  CHECK(api.handle(request("POST", "/models/pv", Json{{"run_id", id}}.dump())).status == 409);
  CHECK(api.handle(request("POST", "/models/wind", Json{{"run_id", id}}.dump())).status == 404);

  // the newly active model is picked up without restarting
  const auto r = api.handle(request("POST", "/retrofit/predict", testing::retrofit_example().dump()));
  CHECK(r.json()["model_version"] == 2);
}

TEST_CASE("HTTP front end on a real socket") {
  Api api(config(), deployed().orch);
  Server server(api);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.run(); });

  httplib::Client client("127.0.0.1", port);
  const auto denied = client.Get("/api/v1/models");
  REQUIRE(denied);
  CHECK(denied->status == 401);

  const httplib::Headers auth = {{"Authorization", kKey}};
  const auto predicted = client.Post("/api/v1/retrofit/predict", auth, testing::retrofit_example().dump(),
                                     "application/json");
  REQUIRE(predicted);
  CHECK(predicted->status == 200);
  CHECK(predicted->has_header("X-Prediction-Id"));
  CHECK(Json::parse(predicted->body)["outputs"].size() == 4);

  const auto report = client.Get("/api/v1/retrofit/report?run=" + predicted->get_header_value("X-Prediction-Id"),
                                 auth);
  REQUIRE(report);
  CHECK(report->status == 200);

  const auto preflight = client.Options("/api/v1/pv/predict");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == "*");

  server.stop();
  t.join();
}
