#include <doctest.h>

#include <httplib.h>

#include <mutex>
#include <set>
#include <thread>

#include "ai4ef/csv.hpp"
#include "ai4ef/error.hpp"
#include "ai4ef/ingest.hpp"
#include "support.hpp"

using namespace ai4ef;
using namespace ai4ef::ingest;
using testing::TempDir;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an ai4ef::Error");
  return Error(ErrorCode::Empty, "");
}

const char* kThreeRows =
    "building_total_area,above_ground_floors,energy_consumption_before,initial_energy_class,"
    "energy_class_after,carrying_out_construction_works,reconstruction_of_engineering_systems,"
    "heat_installation,water_heating_system\n"
    "500,2,30,E,B,1,0,1,0\n"
    "1200,5,80,D,C,0,1,0,1\n"
    "90.5,1,210,G,A,1,1,1,1\n";

/// Serves a CSV on /data.csv to clients presenting the expected key, and
/// remembers the connector headers of every request.
class MockProvider {
 public:
  explicit MockProvider(std::string body) : body_(std::move(body)) {
    server_.Get("/data.csv", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        seen_.push_back({req.get_header_value("Authorization"), req.get_header_value("X-Consumer-Agent-Id"),
                         req.get_header_value("X-Provider-Agent-Id")});
      }
      if (req.get_header_value("Authorization") != "APIKEY-good") {
        res.status = 401;
        return;
      }
      res.set_content(body_, "text/csv");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockProvider() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/data.csv"; }
  std::vector<std::array<std::string, 3>> seen() {
    std::lock_guard lock(mutex_);
    return seen_;
  }

 private:
  std::string body_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
  std::vector<std::array<std::string, 3>> seen_;
};

ConnectorConfig connector(std::string key) {
  return {std::move(key), "urn:ids:consumer:1", "urn:ids:provider:7"};
}

RawTable table(const std::string& text) { return csv::parse(text); }

}  // namespace

TEST_CASE("csv parsing") {
  const auto doc = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",2\n");
  REQUIRE(doc.rows.size() == 2);
  CHECK(doc.header == csv::Record{"a", "b"});
  CHECK(doc.rows[0] == csv::Record{"x, y", "say \"hi\""});
  CHECK(doc.rows[1][0] == "multi\nline");
  CHECK(csv::parse(csv::format(doc)).rows == doc.rows);
  CHECK(error_of([] { csv::parse("a,b\n1\n"); }).code() == ErrorCode::MalformedCsv);
  CHECK(error_of([] { csv::parse("a,b\n\"1,2\n"); }).code() == ErrorCode::MalformedCsv);
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
}

TEST_CASE("source classification") {
  CHECK(std::holds_alternative<HttpEndpoint>(validate_source("https://baseurl/data-app-path/openapi/v1/endpoint")));
  CHECK(std::holds_alternative<LocalFile>(validate_source("/leif_app/shared_storage/data.csv")));
  CHECK(std::holds_alternative<LocalFile>(validate_source("data/retrofit_fixture.csv")));
  CHECK(std::holds_alternative<ConnectionString>(validate_source("postgresql://user@db:5432/energy")));
  CHECK(std::holds_alternative<ConnectionString>(validate_source("host=db dbname=energy")));
  CHECK(error_of([] { validate_source("ht!tp:::bad"); }).code() == ErrorCode::UnrecognizedSource);
  CHECK(error_of([] { validate_source(""); }).code() == ErrorCode::UnrecognizedSource);
}

TEST_CASE("fetch from a local file") {
  TempDir dir("fetch");
  testing::write_text(dir / "three.csv", kThreeRows);
  const auto raw = fetch(LocalFile{(dir / "three.csv").string()});
  CHECK(raw.rows.size() == 3);
  CHECK(raw.header.size() == 9);
  CHECK(error_of([&] { fetch(LocalFile{(dir / "absent.csv").string()}); }).code() == ErrorCode::IoError);
  CHECK(error_of([] { fetch(ConnectionString{"host=db dbname=x"}); }).code() == ErrorCode::UnsupportedSource);
}

TEST_CASE("fetch over HTTP with connector credentials") {
  MockProvider provider(kThreeRows);

  const auto raw = fetch(HttpEndpoint{provider.url()}, connector("APIKEY-good"));
  CHECK(raw.rows.size() == 3);
  auto seen = provider.seen();
  REQUIRE(seen.size() == 1);
  CHECK(seen[0][0] == "APIKEY-good");
  CHECK(seen[0][1] == "urn:ids:consumer:1");
  CHECK(seen[0][2] == "urn:ids:provider:7");

  const auto denied = error_of([&] { fetch(HttpEndpoint{provider.url()}, connector("APIKEY-wrong")); });
  CHECK(denied.code() == ErrorCode::HttpStatus);
  CHECK(denied.status() == 401);

  CHECK(error_of([&] { fetch(HttpEndpoint{provider.url()}, connector("nokey")); }).code() ==
        ErrorCode::InvalidValue);
}

TEST_CASE("cleaning drops incomplete and malformed rows") {
  std::string text = kThreeRows;
  for (int i = 0; i < 5; ++i) text += "700,3,50,F,C,0,0,1,1\n";
  text += "800,3,50,F,C,,0,1,1\n";
  text += "810,3,50,F,C,1,0,,1\n";
  const auto cleaned = clean(table(text), domain::retrofit_schema());
  CHECK(cleaned.rows_in == 10);
  CHECK(cleaned.rows.size() == 8);
  CHECK(cleaned.dropped.size() == 2);
  CHECK(cleaned.dropped[0].source_row == 8);

  const auto bad = clean(table(std::string(kThreeRows) + "abc,3,50,F,C,0,0,1,1\n"), domain::retrofit_schema());
  REQUIRE(bad.dropped.size() == 1);
  CHECK(bad.dropped[0].reason.rfind("coercion failure", 0) == 0);

  const auto unknown_class = clean(table(std::string(kThreeRows) + "5,3,50,Q,C,0,0,1,1\n"), domain::retrofit_schema());
  CHECK(unknown_class.dropped.size() == 1);
}

TEST_CASE("cleaning matches printed-label headers and reports missing columns") {
  const auto labelled = clean(table("Building total area,Above ground floors,Energy consumption before,"
                                    "Initial energy class,Energy class after,Carrying out construction works,"
                                    "Reconstruction of engineering systems,Heat installation,Water heating system\n"
                                    "500,2,30,E,B,1,0,1,0\n"),
                              domain::retrofit_schema());
  CHECK(labelled.rows.size() == 1);

  const auto pv_header =
      "average_electricity_price,average_monthly_consumption_before,installation_cost,"
      "current_inverter_set_power,planned_inverter_set_power,average_energy_generated,electricity_produced,"
      "primary_energy_consumption_after,reduction_of_primary_energy,co2_emissions_reduction,"
      "expected_annual_self_consumption,annual_financial_savings,payback_period\n";
  const auto e = error_of([&] { clean(table(pv_header), domain::pv_schema()); });
  CHECK(e.code() == ErrorCode::SchemaMismatch);
  CHECK(e.field() == "region");
}

TEST_CASE("optional generation is imputed from the training mean") {
  const auto cleaned = clean(csv::Document{{"average_electricity_price", "average_monthly_consumption_before",
                                            "installation_cost", "current_inverter_set_power",
                                            "planned_inverter_set_power", "average_energy_generated", "region",
                                            "electricity_produced", "primary_energy_consumption_after",
                                            "reduction_of_primary_energy", "co2_emissions_reduction",
                                            "expected_annual_self_consumption", "annual_financial_savings",
                                            "payback_period"},
                                           {{"0.2", "1000", "4000", "0", "2", "100", "Riga", "1", "2", "3", "4", "5", "6", "7"},
                                            {"0.3", "1500", "5000", "0", "3", "300", "Riga", "2", "3", "4", "5", "6", "7", "8"},
                                            {"0.3", "1500", "5000", "0", "3", "", "Riga", "2", "3", "4", "5", "6", "7", "8"}}},
                             domain::pv_schema());
  CHECK(cleaned.rows.size() == 3);
  CHECK(cleaned.imputed_cells == 1);
  const auto scalers = fit_scalers(cleaned);
  REQUIRE(scalers.features[5].mean.has_value());
  CHECK(*scalers.features[5].mean == doctest::Approx(200.0));
  const auto encoded = transform_features(scalers, std::span<const Cell>(cleaned.rows[2]).first(7));
  CHECK(encoded[5] == doctest::Approx(0.5));
}

namespace {

CleanTable pv_table(const std::vector<std::pair<double, std::string>>& rows) {
  csv::Document doc{{"average_electricity_price", "average_monthly_consumption_before", "installation_cost",
                     "current_inverter_set_power", "planned_inverter_set_power", "average_energy_generated",
                     "region", "electricity_produced", "primary_energy_consumption_after",
                     "reduction_of_primary_energy", "co2_emissions_reduction", "expected_annual_self_consumption",
                     "annual_financial_savings", "payback_period"},
                    {}};
  for (const auto& [price, region] : rows) {
    doc.rows.push_back({std::to_string(price), "1000", "7", "0", "2", "", region, "1", "2", "3", "4", "5", "6", "7"});
  }
  return clean(doc, domain::pv_schema());
}

}  // namespace

TEST_CASE("scaler fitting") {
  const auto t = pv_table({{0, "Riga"}, {5, "Kurzeme"}, {10, "Riga"}});
  // blank generation everywhere: no observed values to fit
  CHECK(error_of([&] { fit_scalers(t); }).code() == ErrorCode::EmptyTable);

  auto filled = t;
  for (auto& row : filled.rows) row[5] = 300.0;
  const auto s = fit_scalers(filled);
  CHECK(s.features[0].kind == ScalerKind::MinMax);
  CHECK(s.features[0].min == 0);
  CHECK(s.features[0].max == 10);
  CHECK(s.features[6].kind == ScalerKind::OneHot);
  CHECK(s.features[6].vocab == std::vector<std::string>{"Kurzeme", "Riga"});
  CHECK(s.features[2].degenerate);
  CHECK(s.targets_scaled);

  std::vector<Cell> row = filled.rows[1];
  row[0] = 5.0;
  const auto encoded = transform_features(s, std::span<const Cell>(row).first(7));
  CHECK(encoded[0] == 0.5);
  CHECK(encoded[2] == 0.0);  // degenerate column
  CHECK(s.feature_width() == 8);
  CHECK(s.encoded_feature_names().back() == "region=Riga");

  row[6] = std::string("Zemgale");
  CHECK(error_of([&] { transform_features(s, std::span<const Cell>(row).first(7)); }).code() ==
        ErrorCode::UnseenCategory);

  CHECK(ScalerSet::from_json(s.to_json()) == s);
}

TEST_CASE("classifier targets and energy classes") {
  const auto t = clean(table(kThreeRows), domain::retrofit_schema());
  const auto s = fit_scalers(t);
  CHECK_FALSE(s.targets_scaled);
  CHECK(s.features[3].kind == ScalerKind::Ordinal);
  const auto encoded = transform(s, t.rows[0]);
  CHECK(encoded[3] == doctest::Approx(5.0 / 7.0));
  CHECK(encoded[4] == doctest::Approx(2.0 / 7.0));
  CHECK(encoded[5] == 1.0);
  CHECK(inverse_transform(s, encoded) == t.rows[0]);
}

TEST_CASE("splitting") {
  const auto a = split(10, 0.8, 42);
  CHECK(a.train.size() == 8);
  CHECK(a.test.size() == 2);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 10);

  const auto b = split(10, 0.8, 42);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(split(10, 0.8, 43).train != a.train);

  CHECK(error_of([] { split(10, 1.5, 42); }).code() == ErrorCode::BadRatio);
  CHECK(error_of([] { split(10, 0.0, 42); }).code() == ErrorCode::BadRatio);
  CHECK(error_of([] { split(1, 0.8, 42); }).code() == ErrorCode::TooFewRows);
  CHECK(split(2, 0.99, 1).test.size() == 1);
}

TEST_CASE("ingestion of the bundled retrofit fixture") {
  TempDir dir("ingest");
  IngestOptions options;
  options.input = (testing::data_dir() / "retrofit_fixture.csv").string();
  options.schema = domain::retrofit_schema();

  const auto a = run_ingestion(options, dir / "a");
  CHECK(fs::exists(a.train_data));
  CHECK(fs::exists(a.test_data));
  CHECK(fs::exists(a.scalers));
  CHECK(fs::exists(a.metadata));
  CHECK(a.rows_in == 200);
  CHECK(a.rows_retained >= 190);
  const auto meta = Json::parse(testing::read_text(a.metadata));
  CHECK(meta["rows_in"] == 200);
  CHECK(meta["rows_retained"] == a.rows_retained);

  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir / "a")) names.insert(entry.path().filename().string());
  CHECK(names == std::set<std::string>{"train.csv", "test.csv", "scalers.json", "ingest_meta.json"});

  const auto b = run_ingestion(options, dir / "b");
  CHECK(testing::read_text(a.train_data) == testing::read_text(b.train_data));
  CHECK(testing::read_text(a.test_data) == testing::read_text(b.test_data));
  CHECK(testing::read_text(a.scalers) == testing::read_text(b.scalers));

  const auto split_data = load_split(dir / "a");
  CHECK(split_data.train_x.rows() + split_data.test_x.rows() == a.rows_retained);
  CHECK(split_data.target_names.size() == 4);

  // scalers are fit on the training partition only
  const auto scalers = load_scalers(a.scalers);
  const auto cleaned = clean(fetch(LocalFile{options.input}), options.schema);
  const auto parts = split(cleaned.rows.size(), 0.8, 42);
  CHECK(scalers.fingerprint == fingerprint(cleaned.subset(parts.train)));
  CHECK(scalers.fingerprint != fingerprint(cleaned));
}

TEST_CASE("ingestion failures are tagged with their step") {
  TempDir dir("ingest-fail");
  IngestOptions options;
  options.schema = domain::retrofit_schema();

  options.input = "http://127.0.0.1:1/unreachable.csv";
  const auto unreachable = error_of([&] { run_ingestion(options, dir / "x"); });
  CHECK(unreachable.step() == "fetch");

  options.input = "ht!tp:::bad";
  CHECK(error_of([&] { run_ingestion(options, dir / "y"); }).step() == "validate_source");

  testing::write_text(dir / "pv_header.csv", "region\nRiga\n");
  options.input = (dir / "pv_header.csv").string();
  const auto mismatch = error_of([&] { run_ingestion(options, dir / "z"); });
  CHECK(mismatch.code() == ErrorCode::SchemaMismatch);
  CHECK(mismatch.step() == "clean");

  CHECK_FALSE(has_ingest_artifacts(dir / "x"));
  CHECK(error_of([&] { load_split(dir / "x"); }).code() == ErrorCode::MissingArtifact);
}
