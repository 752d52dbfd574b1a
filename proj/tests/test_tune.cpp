#include <doctest.h>

#include <set>

#include "ai4ef/error.hpp"
#include "ai4ef/ingest.hpp"
#include "ai4ef/tune.hpp"
#include "support.hpp"

using namespace ai4ef;
using namespace ai4ef::tune;
using testing::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ai4ef::Error");
  return ErrorCode::Empty;
}

TrialRecord complete(std::size_t number, std::vector<double> values) {
  TrialRecord t;
  t.number = number;
  t.state = TrialState::Complete;
  t.intermediate_values = std::move(values);
  t.objective = t.intermediate_values.back();
  return t;
}

TrialRecord with_state(std::size_t number, TrialState state, std::optional<double> objective = std::nullopt) {
  TrialRecord t;
  t.number = number;
  t.state = state;
  t.objective = objective;
  return t;
}

ingest::SplitDataset retrofit_split(const fs::path& dir) {
  ingest::IngestOptions options;
  options.input = (testing::data_dir() / "retrofit_fixture.csv").string();
  options.schema = domain::retrofit_schema();
  ingest::run_ingestion(options, dir);
  return ingest::load_split(dir);
}

SearchSpace small_space() {
  SearchSpace s;
  s.batch_sizes = {32};
  s.n_layers_min = 2;
  s.n_layers_max = 3;
  s.layer_sizes = {16, 32};
  s.max_epochs = 4;
  s.n_trials = 3;
  return s;
}

}  // namespace

TEST_CASE("search space defaults and validation") {
  const SearchSpace s;
  CHECK(s.batch_sizes == std::vector<std::size_t>{256, 512, 1024});
  CHECK(s.l_rate_min == 1e-4);
  CHECK(s.l_rate_max == 1e-3);
  CHECK(s.n_layers_min == 2);
  CHECK(s.n_layers_max == 6);
  CHECK(s.layer_sizes == std::vector<std::size_t>{128, 256, 512, 1024, 2048});
  CHECK(s.max_epochs == 10);
  CHECK(s.n_trials == 3);
  CHECK(s.seed == 42);
  CHECK(SearchSpace::from_json(s.to_json()) == s);

  auto bad = s;
  bad.l_rate_min = 0.01;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = s;
  bad.batch_sizes.clear();
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = s;
  bad.n_layers_min = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = s;
  bad.n_trials = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("parameter sampling stays inside the space") {
  const SearchSpace space;
  SplitMix64 rng(7);
  const std::set<std::size_t> sizes(space.layer_sizes.begin(), space.layer_sizes.end());
  const std::set<std::size_t> batches(space.batch_sizes.begin(), space.batch_sizes.end());
  double lo = 1, hi = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_params(space, rng);
    CHECK(p.within(space));
    CHECK(p.n_layers >= 2);
    CHECK(p.n_layers <= 6);
    CHECK(p.layer_sizes.size() == p.n_layers);
    for (auto w : p.layer_sizes) CHECK(sizes.count(w) == 1);
    CHECK(batches.count(p.batch_size) == 1);
    CHECK(p.l_rate >= 1e-4);
    CHECK(p.l_rate <= 1e-3);
    lo = std::min(lo, p.l_rate);
    hi = std::max(hi, p.l_rate);
  }
  // log-uniform: both decades' ends are visited
  CHECK(lo < 1.3e-4);
  CHECK(hi > 0.8e-3);

  SplitMix64 a(99), b(99);
  CHECK(sample_params(space, a) == sample_params(space, b));

  SearchSpace single;
  single.batch_sizes = {64};
  single.l_rate_min = single.l_rate_max = 5e-4;
  single.n_layers_min = single.n_layers_max = 3;
  single.layer_sizes = {32};
  SplitMix64 r(1);
  const auto p = sample_params(single, r);
  CHECK(p == TrialParams{64, 5e-4, 3, {32, 32, 32}});
}

TEST_CASE("median pruning rule") {
  const std::vector<TrialRecord> history = {complete(0, {1, 1, 1, 0.2}), complete(1, {1, 1, 1, 0.4}),
                                            complete(2, {1, 1, 1, 0.6})};
  const std::vector<double> bad = {1, 1, 1, 0.9};
  const std::vector<double> good = {1, 1, 1, 0.1};
  CHECK(should_prune(history, bad, 3, 1, 1));
  CHECK_FALSE(should_prune(history, good, 3, 1, 1));
  CHECK_FALSE(should_prune(history, std::vector<double>{1, 1, 1, 0.4}, 3, 1, 1));  // ties continue

  SUBCASE("warmups") {
    CHECK_FALSE(should_prune(history, bad, 3, 4, 1));
    CHECK_FALSE(should_prune(history, bad, 3, 1, 4));
    const std::vector<TrialRecord> one = {complete(0, {0.1, 0.1, 0.1, 0.1})};
    CHECK_FALSE(should_prune(one, bad, 3, 2, 0));
    CHECK(should_prune(one, bad, 3, 1, 0));
  }
  SUBCASE("pruned and short trials do not vote") {
    auto pruned = complete(3, {1, 1, 1, 0.01});
    pruned.state = TrialState::Pruned;
    const std::vector<TrialRecord> h = {complete(0, {0.5, 0.5}), pruned, complete(1, {1, 1, 1, 0.95})};
    CHECK_FALSE(should_prune(h, bad, 3, 1, 0));
    CHECK(should_prune(h, std::vector<double>{1, 1, 1, 0.99}, 3, 1, 0));
  }
  SUBCASE("even count uses the midpoint") {
    const std::vector<TrialRecord> h = {complete(0, {0.2}), complete(1, {0.4})};
    CHECK(should_prune(h, std::vector<double>{0.31}, 0, 1, 0));
    CHECK_FALSE(should_prune(h, std::vector<double>{0.3}, 0, 1, 0));
  }
}

TEST_CASE("early stopping") {
  const std::vector<double> plateau = {1.0, 0.9, 0.9, 0.9, 0.9};
  CHECK(early_stop(plateau, 3, 0.0));
  CHECK_FALSE(early_stop(std::span(plateau).first(4), 3, 0.0));
  const std::vector<double> falling = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  for (std::size_t n = 1; n <= falling.size(); ++n) CHECK_FALSE(early_stop(std::span(falling).first(n), 3, 0.0));
  CHECK_FALSE(early_stop(std::vector<double>{1.0, 0.95}, 3, 0.0));
  CHECK(early_stop(std::span(falling).first(4), 3, 0.35));
}

TEST_CASE("best trial selection") {
  Study s;
  s.trials = {with_state(0, TrialState::Complete, 0.3), with_state(1, TrialState::Complete, 0.2),
              with_state(2, TrialState::Complete, 0.25)};
  CHECK(best_trial(s).number == 1);
  s.trials = {with_state(0, TrialState::Complete, 0.2), with_state(1, TrialState::Complete, 0.2)};
  CHECK(best_trial(s).number == 0);
  s.trials = {with_state(0, TrialState::Pruned), with_state(1, TrialState::Failed)};
  CHECK(code_of([&] { best_trial(s); }) == ErrorCode::NoCompleteTrial);
}

TEST_CASE("study serialisation") {
  Study s;
  s.task = domain::Task::Regressor;
  auto t = complete(0, {0.5, 0.25});
  t.params = {32, 1e-3, 2, {16, 32}};
  t.timing = {"2026-01-01T00:00:00.000Z", "2026-01-01T00:00:01.000Z", 1.0};
  s.trials = {t, with_state(1, TrialState::Pruned)};
  s.trials[1].intermediate_values = {0.9};
  s.best_trial_number = 0;

  const auto j = s.to_json();
  CHECK_FALSE(j.dump().find("2026") != std::string::npos);
  auto back = Study::from_json(j);
  back.trials[0].timing = t.timing;
  CHECK(back == s);
  CHECK(s.to_json(true).dump().find("2026") != std::string::npos);
  CHECK(parse_trial_state("Pruned") == TrialState::Pruned);

  auto gap = j;
  gap["trials"][1]["number"] = 5;
  CHECK_THROWS_AS(Study::from_json(gap), Error);
}

TEST_CASE("study on the retrofit fixture with the default space") {
  TempDir dir("study");
  const auto data = retrofit_split(dir / "ingest");
  const SearchSpace space;

  const auto a = run_study(space, data, domain::Task::Classifier, dir / "a");
  CHECK(a.study.trials.size() == 3);
  REQUIRE(a.study.best_trial_number.has_value());
  std::size_t best_count = 0;
  for (const auto& t : a.study.trials) {
    CHECK(t.params.within(space));
    if (t.state == TrialState::Complete && t.objective == best_trial(a.study).objective) ++best_count;
    CHECK(t.intermediate_values.size() <= space.max_epochs);
  }
  CHECK(best_count == 1);
  CHECK(fs::exists(dir / "a" / "checkpoint" / "manifest.json"));
  CHECK(fs::exists(dir / "a" / "checkpoint" / "weights.bin"));
  CHECK(fs::exists(dir / "a" / "trials.csv"));
  CHECK(fs::exists(dir / "a" / "trial_0" / "intermediate_values.csv"));
  CHECK(a.best.manifest.trial_number == a.study.best_trial_number);
  auto untimed = a.study;
  for (auto& t : untimed.trials) t.timing = {};
  CHECK(load_study(dir / "a" / "study.json") == untimed);

  const auto b = run_study(space, data, domain::Task::Classifier, dir / "b");
  REQUIRE(b.study.trials.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.study.trials[i].params == b.study.trials[i].params);
    CHECK(a.study.trials[i].objective == b.study.trials[i].objective);
    CHECK(a.study.trials[i].intermediate_values == b.study.trials[i].intermediate_values);
  }
  CHECK(testing::read_text(dir / "a" / "study.json") == testing::read_text(dir / "b" / "study.json"));
}

TEST_CASE("a study whose every trial is pruned") {
  TempDir dir("pruned");
  const auto data = retrofit_split(dir / "ingest");
  auto space = small_space();
  space.warmup_trials = 0;
  space.warmup_epochs = 0;
  space.l_rate_min = space.l_rate_max = 1.0;

  StudyOptions options;
  options.reference_trials = {complete(99, std::vector<double>(space.max_epochs, 1e-9))};
  std::vector<TrialState> seen;
  options.on_trial = [&](const TrialRecord& t) { seen.push_back(t.state); };
  CHECK(code_of([&] { run_study(space, data, domain::Task::Classifier, dir / "out", options); }) ==
        ErrorCode::NoCompleteTrial);
  CHECK(seen.size() == space.n_trials);
  const auto study = load_study(dir / "out" / "study.json");
  CHECK(study.trials.size() == space.n_trials);
  for (const auto& t : study.trials) {
    CHECK(t.state == TrialState::Pruned);
    CHECK(t.intermediate_values.size() == 1);
  }
  CHECK_FALSE(fs::exists(dir / "out" / "checkpoint"));
}

TEST_CASE("prune decisions repeat across runs") {
  TempDir dir("prune-repeat");
  const auto data = retrofit_split(dir / "ingest");
  auto space = small_space();
  space.n_trials = 5;
  space.l_rate_min = 1e-4;
  space.l_rate_max = 1e-2;
  auto states = [&](const std::string& name) {
    std::vector<TrialState> out;
    for (const auto& t : run_study(space, data, domain::Task::Classifier, dir / name).study.trials) {
      out.push_back(t.state);
    }
    return out;
  };
  CHECK(states("a") == states("b"));
}
