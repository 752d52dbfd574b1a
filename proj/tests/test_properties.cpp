#include <doctest.h>

#include <set>

#include "ai4ef/csv.hpp"
#include "ai4ef/evaluate.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/neural.hpp"
#include "ai4ef/tune.hpp"
#include "generators.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace ai4ef;

TEST_CASE("scaler round trip on random rows") {
  SplitMix64 rng(1234);
  for (const auto& schema : {domain::pv_schema(), domain::retrofit_schema()}) {
    const auto table = testing::random_table(schema, 300, rng);
    const auto scalers = ingest::fit_scalers(table);
    for (int i = 0; i < 1000; ++i) {
      const auto row = schema.task == domain::Task::Regressor ? testing::random_pv_row(rng)
                                                              : testing::random_retrofit_row(rng);
      const auto encoded = ingest::transform(scalers, row);
      CHECK(encoded.size() == scalers.feature_width() + scalers.target_width());
      std::string why;
      CHECK_MESSAGE(testing::rows_match(row, ingest::inverse_transform(scalers, encoded), 1e-9, &why), why);
    }
  }
}

TEST_CASE("rows inside the fitted range encode into [0, 1]") {
  SplitMix64 rng(77);
  const auto table = testing::random_table(domain::pv_schema(), 200, rng);
  const auto scalers = ingest::fit_scalers(table);
  for (const auto& row : table.rows) {
    for (double v : ingest::transform(scalers, row)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("split partitions cover every row exactly once") {
  SplitMix64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + rng.below(500);
    const double ratio = rng.uniform(0.01, 0.99);
    const auto s = ingest::split(n, ratio, rng.next());
    CHECK(s.train.size() >= 1);
    CHECK(s.test.size() >= 1);
    CHECK(s.train.size() + s.test.size() == n);
    std::set<std::size_t> seen(s.train.begin(), s.train.end());
    seen.insert(s.test.begin(), s.test.end());
    CHECK(seen.size() == n);
    CHECK(*seen.rbegin() == n - 1);
  }
}

TEST_CASE("csv format and parse are inverse") {
  SplitMix64 rng(8);
  const std::string alphabet = "ab,\"\n\r x1;";
  for (int round = 0; round < 300; ++round) {
    const std::size_t cols = 1 + rng.below(5);
    csv::Document doc;
    auto field = [&] {
      std::string f;
      const auto len = rng.below(8);
      for (std::size_t i = 0; i < len; ++i) f += alphabet[rng.below(alphabet.size())];
      return f;
    };
    for (std::size_t c = 0; c < cols; ++c) doc.header.push_back("h" + std::to_string(c) + field());
    const auto rows = rng.below(6);
    for (std::size_t r = 0; r < rows; ++r) {
      csv::Record rec;
      for (std::size_t c = 0; c < cols; ++c) rec.push_back(field());
      if (cols == 1 && rec[0].empty()) rec[0] = "x";  // a lone empty field is a blank line
      doc.rows.push_back(rec);
    }
    const auto back = csv::parse(csv::format(doc));
    CHECK(back.header == doc.header);
    CHECK(back.rows == doc.rows);
  }
}

TEST_CASE("confusion counts and derived metrics match brute force") {
  SplitMix64 rng(99);
  for (int round = 0; round < 1000; ++round) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<bool> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.below(2) == 1;
      t[i] = rng.below(2) == 1;
    }
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += p[i] && t[i];
      fp += p[i] && !t[i];
      fn += !p[i] && t[i];
      tn += !p[i] && !t[i];
    }
    const auto cm = evaluate::confusion_matrix(p, t);
    CHECK(cm == evaluate::ConfusionMatrix{tp, fp, fn, tn});
    const auto m = evaluate::classification_metrics(cm);
    CHECK(m.accuracy == static_cast<double>(tp + tn) / static_cast<double>(n));
    CHECK(m.precision == (tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0));
    CHECK(m.recall == (tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0));
  }
}

TEST_CASE("rmse is never below mae") {
  SplitMix64 rng(100);
  for (int round = 0; round < 1000; ++round) {
    const std::size_t n = 2 + rng.below(50);
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(-1e3, 1e3);
      t[i] = rng.uniform(-1e3, 1e3);
    }
    const auto m = evaluate::regression_metrics(p, t);
    CHECK(m.rmse >= m.mae);
    CHECK(m.mae >= 0.0);
  }
}

TEST_CASE("weights blob round trip on random architectures") {
  SplitMix64 rng(3);
  for (int round = 0; round < 50; ++round) {
    neural::MlpConfig c;
    c.input_dim = 1 + rng.below(12);
    c.n_layers = 1 + rng.below(4);
    for (std::size_t i = 0; i < c.n_layers; ++i) c.layer_sizes.push_back(1 + rng.below(20));
    c.output_dim = 1 + rng.below(7);
    c.head = rng.below(2) ? neural::OutputHead::Linear : neural::OutputHead::Sigmoid;
    const auto model = testing::random_model(c, rng.next());
    CHECK(neural::decode_weights(neural::encode_weights(model), c) == model.layers);
  }
}

TEST_CASE("median pruning is monotone in the current value") {
  SplitMix64 rng(21);
  for (int round = 0; round < 300; ++round) {
    std::vector<tune::TrialRecord> history;
    const auto k = 1 + rng.below(6);
    for (std::size_t i = 0; i < k; ++i) {
      tune::TrialRecord t;
      t.number = i;
      t.intermediate_values = {rng.uniform(), rng.uniform(), rng.uniform()};
      t.objective = t.intermediate_values.back();
      history.push_back(t);
    }
    const double a = rng.uniform(), b = rng.uniform();
    const std::vector<double> low = {0, 0, std::min(a, b)}, high = {0, 0, std::max(a, b)};
    if (tune::should_prune(history, low, 2, 1, 0)) CHECK(tune::should_prune(history, high, 2, 1, 0));
    // below every peer: never pruned
    CHECK_FALSE(tune::should_prune(history, std::vector<double>{0, 0, -1.0}, 2, 1, 0));
  }
}

TEST_CASE("sampled parameters stay inside random spaces") {
  SplitMix64 rng(31);
  for (int round = 0; round < 200; ++round) {
    tune::SearchSpace s;
    s.batch_sizes = {1 + rng.below(64), 65 + rng.below(64)};
    s.l_rate_min = std::exp(rng.uniform(-12, -4));
    s.l_rate_max = s.l_rate_min * std::exp(rng.uniform(0, 4));
    s.n_layers_min = 1 + rng.below(3);
    s.n_layers_max = s.n_layers_min + rng.below(3);
    s.layer_sizes = {1 + rng.below(8), 9 + rng.below(8)};
    for (int i = 0; i < 20; ++i) CHECK(tune::sample_params(s, rng).within(s));
  }
}

TEST_CASE("format_double round trips") {
  SplitMix64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::exp(rng.uniform(-40, 40));
    CHECK(std::stod(fsutil::format_double(v)) == v);
  }
}
