#include "ai4ef/cli.hpp"

#include <CLI11.hpp>
#include <signal.h>

#include <iostream>
#include <iterator>
#include <thread>

#include "ai4ef/error.hpp"
#include "ai4ef/evaluate.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/orchestrate.hpp"
#include "ai4ef/serve.hpp"

namespace ai4ef::cli {

namespace {

namespace fs = std::filesystem;
using orchestrate::RunRecord;
using orchestrate::RunStatus;
using orchestrate::Step;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output = "text";
  std::string artifact_root;
  std::string listen = "127.0.0.1:8080";
  std::string service;
  std::string input = "-";
  std::string checkpoint;
  std::string run_id;
};

class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

orchestrate::RunConfig load_config(const Options& o) {
  Json doc = o.config_path.empty() ? Json::object() : orchestrate::load_config_document(o.config_path);
  for (const auto& kv : o.overrides) orchestrate::apply_override(doc, kv);
  return orchestrate::validate_run_config(doc);
}

fs::path artifact_root(const Options& o) {
  if (!o.artifact_root.empty()) return o.artifact_root;
  if (const char* env = std::getenv("AI4EF_ARTIFACT_ROOT")) return env;
  return "artifacts";
}

void print_record(const RunRecord& r, const Options& o, std::ostream& out) {
  const auto metrics = fs::path(r.eval_dir) / evaluate::kMetricsFile;
  const bool has_metrics =
      std::find(r.steps.begin(), r.steps.end(), Step::Evaluation) != r.steps.end() && r.status == RunStatus::Succeeded;
  if (o.output == "json") {
    auto j = r.to_json();
    if (has_metrics) j["metrics_path"] = metrics.string();
    out << j.dump(2) << "\n";
    return;
  }
  out << "run_id: " << r.run_id << "\n";
  out << "status: " << orchestrate::to_string(r.status) << "\n";
  for (const auto& s : r.step_records) {
    out << orchestrate::to_string(s.step) << ": " << orchestrate::to_string(s.status) << "\n";
    for (const auto& [name, path] : s.artifacts) out << "  " << name << ": " << path << "\n";
  }
  if (has_metrics) out << "metrics: " << metrics.string() << "\n";
}

int run_steps(const Options& o, std::vector<Step> steps, std::ostream& out, std::ostream& err) {
  const auto config = load_config(o);
  orchestrate::Orchestrator orch(artifact_root(o));
  const auto id = orch.launch(config, std::move(steps));
  const auto record = orch.wait(id);
  print_record(record, o, out);
  if (record.status != RunStatus::Succeeded) {
    const auto& e = *record.error;
    err << "error: " << e.message;
    if (!e.step.empty()) err << " [step " << e.step << "]";
    err << "\n";
    return 1;
  }
  return 0;
}

std::pair<std::string, int> parse_listen(const std::string& text) {
  const auto colon = text.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : text.substr(0, colon);
  const std::string port = colon == std::string::npos ? text : text.substr(colon + 1);
  if (host.empty()) host = "0.0.0.0";
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used == port.size() && p >= 0 && p <= 65535) return {host, p};
  } catch (const std::exception&) {
  }
  throw Failure("--listen expects host:port, got '" + text + "'");
}

int serve(const Options& o, std::ostream& out) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const auto [host, port] = parse_listen(o.listen);
  orchestrate::Orchestrator orch(artifact_root(o));
  serve::Api api(serve::ServeConfig::from_environment(), orch);
  serve::Server server(api);
  const int bound = server.bind(host, port);
  if (o.output == "json") {
    out << Json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
  } else {
    out << "listening on " << host << ":" << bound << std::endl;
  }
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

int predict(const Options& o, std::istream& in, std::ostream& out) {
  std::string text;
  if (o.input == "-") {
    text.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    text = fsutil::read_file(o.input);
  }
  Json body;
  try {
    body = Json::parse(text);
  } catch (const Json::parse_error&) {
    throw Error(ErrorCode::InvalidValue, "prediction input is not valid JSON", "body");
  }
  orchestrate::Orchestrator orch(artifact_root(o));
  serve::ServeConfig sc;
  sc.auth_enabled = false;
  serve::Api api(sc, orch);
  const auto service = orchestrate::parse_service(o.service);
  const auto response = service == orchestrate::Service::Retrofit ? api.predict_retrofit(body) : api.predict_pv(body);
  if (o.output == "json") {
    out << response.dump(2) << "\n";
    return 0;
  }
  out << "service: " << response["service"].get<std::string>() << "\n";
  out << "model_version: " << response["model_version"] << "\n";
  for (const auto& [name, value] : response["outputs"].items()) {
    out << name << ": " << value.dump();
    if (response.contains("probabilities")) out << " (p=" << response["probabilities"][name].dump() << ")";
    out << "\n";
  }
  if (!response["imputed_fields"].empty()) out << "imputed: " << response["imputed_fields"].dump() << "\n";
  return 0;
}

int deploy(const Options& o, std::ostream& out) {
  orchestrate::Orchestrator orch(artifact_root(o));
  fs::path checkpoint = o.checkpoint;
  if (checkpoint.empty()) {
    if (o.run_id.empty()) throw Failure("deploy needs --checkpoint or --run");
    checkpoint = fs::path(orch.run_status(o.run_id).train_dir) / tune::kCheckpointDir;
  }
  const auto v = orch.registry().deploy(orchestrate::parse_service(o.service), checkpoint);
  if (o.output == "json") {
    out << v.to_json().dump(2) << "\n";
  } else {
    out << "deployed " << orchestrate::to_string(v.service) << " version " << v.version << " from " << v.source
        << "\n";
  }
  return 0;
}

void report(const std::exception& e, const Options& o, std::ostream& err) {
  const auto* ae = dynamic_cast<const Error*>(&e);
  if (o.output == "json") {
    Json j;
    j["code"] = ae ? std::string(to_string(ae->code())) : std::string("Error");
    j["message"] = e.what();
    if (ae && !ae->field().empty()) j["field"] = ae->field();
    if (ae && !ae->step().empty()) j["step"] = ae->step();
    err << j.dump() << "\n";
    return;
  }
  err << "error: " << e.what();
  if (ae && !ae->step().empty()) err << " [step " << ae->step() << "]";
  if (ae && !ae->field().empty()) err << " (" << ae->field() << ")";
  err << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Energy-efficiency decision tools: data pipeline, training and prediction service", "ai4ef"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  app.add_option("--output", o.output, "Output format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--artifact-root", o.artifact_root, "Artifact store root (default $AI4EF_ARTIFACT_ROOT or ./artifacts)");

  const auto pipeline = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config_path, "Run configuration (.yaml, .yml or .json)")->required();
    sub->add_option("--set", o.overrides, "Override a config key, key=value (repeatable)");
    return sub;
  };
  auto* ingest = pipeline("ingest", "Fetch, clean, split and scale a dataset");
  auto* train = pipeline("train", "Run the hyperparameter study on a prior run's ingestion artifacts (from_run)");
  auto* eval = pipeline("evaluate", "Score a prior run's checkpoint (from_run)");
  auto* all = pipeline("run-all", "Ingestion, training and evaluation in one run");

  auto* srv = app.add_subcommand("serve", "Start the HTTP API");
  srv->add_option("--listen", o.listen, "host:port to listen on");

  auto* pred = app.add_subcommand("predict", "Predict from a JSON body with the deployed model");
  pred->add_option("--service", o.service, "retrofit or pv")->required()->check(CLI::IsMember({"retrofit", "pv"}));
  pred->add_option("--input", o.input, "JSON body file, - for stdin");

  auto* dep = app.add_subcommand("deploy", "Make a checkpoint the active model of a service");
  dep->add_option("--service", o.service, "retrofit or pv")->required()->check(CLI::IsMember({"retrofit", "pv"}));
  auto* ck = dep->add_option("--checkpoint", o.checkpoint, "Checkpoint directory");
  dep->add_option("--run", o.run_id, "Run whose checkpoint to deploy")->excludes(ck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (ingest->parsed()) return run_steps(o, {Step::Ingestion}, out, err);
    if (train->parsed()) return run_steps(o, {Step::Training}, out, err);
    if (eval->parsed()) return run_steps(o, {Step::Evaluation}, out, err);
    if (all->parsed()) return run_steps(o, orchestrate::kAllSteps, out, err);
    if (srv->parsed()) return serve(o, out);
    if (pred->parsed()) return predict(o, in, out);
    if (dep->parsed()) return deploy(o, out);
  } catch (const Failure& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    report(e, o, err);
    return 1;
  }
  return 2;
}

}  // namespace ai4ef::cli
