#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "berrystack/ensemble.hpp"
#include "berrystack/errors.hpp"
#include "berrystack/synth.hpp"
#include "berrystack/weight_file.hpp"

using namespace berrystack;
using namespace berrystack::ensemble;

namespace {

StackedFeatures make_stack(const std::vector<std::vector<double>>& rows, std::vector<double> y) {
  StackedFeatures s{Tensor({rows.size(), rows.front().size()}), std::move(y)};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) s.matrix.at(i, j) = rows[i][j];
  return s;
}

double stack_accuracy(const MetaLearner& m, const StackedFeatures& s) {
  double hits = 0;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    hits += model::classify(predict_meta(m, s.matrix.row(i))) == s.labels[i];
  }
  return hits / static_cast<double>(s.labels.size());
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

StackedFeatures random_stack(std::mt19937_64& rng, std::size_t n, std::size_t b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double label = i % 3 == 0 ? 1.0 : 0.0;
    std::vector<double> r;
    for (std::size_t j = 0; j < b; ++j) r.push_back(std::clamp(0.3 * label + 0.7 * u(rng), 0.0, 1.0));
    rows.push_back(r);
    y.push_back(label);
  }
  return make_stack(rows, y);
}

struct Fixture {
  model::ExtractorPtr ex;
  model::FeatureSet train, val, test;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    synth::BispectralSpec spec;
    spec.samples = 150;
    spec.seed = 31;
    const auto splits = data::stratified_split(synth::bispectral_dataset(spec), 2);
    Fixture fx;
    fx.ex = std::make_shared<const model::FeatureExtractor>(model::FeatureExtractor::surrogate(48, 6));
    fx.train = model::extract_dataset(data::random_oversample(splits.train, 3), *fx.ex);
    fx.val = model::extract_dataset(splits.validation, *fx.ex);
    fx.test = model::extract_dataset(splits.test, *fx.ex);
    return fx;
  }();
  return f;
}

EnsembleConfig small_config(std::size_t b) {
  EnsembleConfig c;
  c.learners = b;
  c.base.fc = {16, 8};
  c.base.schedule.epochs = 8;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("fit_meta fixtures") {
  SUBCASE("separable stack") {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) {
      y.push_back(i % 4 == 0);
      rows.push_back({y.back(), 0.5});
    }
    const auto s = make_stack(rows, y);
    const auto m = fit_meta(s);
    CHECK(stack_accuracy(m, s) == 1.0);
    CHECK(std::isfinite(m.beta1[0]));
    CHECK(m.beta1[0] > 0);
    CHECK(non_increasing(m.nll_trace));
    CHECK(non_increasing(m.objective_trace));
  }
  SUBCASE("uninformative learners recover the class prior") {
    std::vector<std::vector<double>> rows(50, {0.5, 0.5, 0.5});
    std::vector<double> y(50, 0.0);
    for (int i = 0; i < 15; ++i) y[i] = 1.0;
    const auto m = fit_meta(make_stack(rows, y));
    // Only the ridge pins beta1 here (constant columns), so plain gradient
    // descent shrinks it slowly; the prediction is what must match the prior.
    for (double b : m.beta1) CHECK(std::abs(b) < 1e-2);
    CHECK(m.iterations <= 10000);
    const double row[3] = {0.5, 0.5, 0.5};
    CHECK(predict_meta(m, row) == doctest::Approx(0.3).epsilon(1e-6));
  }
  SUBCASE("zero coefficients give 0.5") {
    MetaLearner m;
    m.beta1 = {0.0, 0.0};
    const double row[2] = {0.9, 0.1};
    CHECK(predict_meta(m, row) == 0.5);
    m.beta1 = {1.0, 1.0};
    const double ones[2] = {1.0, 1.0};
    CHECK(predict_meta(m, ones) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
    const double short_row[1] = {1.0};
    CHECK_THROWS_AS(predict_meta(m, short_row), DimensionError);
  }
  SUBCASE("single-label stack") {
    CHECK_THROWS_AS(fit_meta(make_stack({{0.2}, {0.4}}, {1.0, 1.0})), ArgumentError);
  }
}

TEST_CASE("fit_meta properties on random stacks") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_stack(rng, 60, 4);
    const auto m = fit_meta(s);
    CHECK(non_increasing(m.objective_trace));
    CHECK(non_increasing(m.nll_trace));
    CHECK(m.converged);

    // Reverse the learner order.
    StackedFeatures r = s;
    for (std::size_t i = 0; i < s.matrix.rows(); ++i)
      for (std::size_t j = 0; j < 4; ++j) r.matrix.at(i, j) = s.matrix.at(i, 3 - j);
    const auto mr = fit_meta(r);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(mr.beta1[j] - m.beta1[3 - j]) < 1e-6);
    for (std::size_t i = 0; i < s.matrix.rows(); ++i) {
      CHECK(std::abs(predict_meta(m, s.matrix.row(i)) - predict_meta(mr, r.matrix.row(i))) < 1e-10);
    }

    // Monotone in any base confidence with a positive coefficient.
    std::vector<double> row(s.matrix.row(0).begin(), s.matrix.row(0).end());
    for (std::size_t j = 0; j < 4; ++j) {
      if (m.beta1[j] <= 0) continue;
      auto up = row;
      up[j] = std::min(1.0, up[j] + 0.1);
      CHECK(predict_meta(m, up) >= predict_meta(m, row));
    }
  }
}

TEST_CASE("meta-learner is at least as good as a perfect base learner") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    const double label = i % 5 == 0;
    rows.push_back({label ? 0.5 + 0.5 * u(rng) : 0.49 * u(rng), u(rng), u(rng)});
    y.push_back(label);
  }
  const auto s = make_stack(rows, y);
  CHECK(stack_accuracy(fit_meta(s), s) >= 1.0);
}

TEST_CASE("base learners") {
  const auto& fx = fixture();
  const auto cfg = small_config(2);
  const auto a = train_base_learners(fx.train, fx.val, cfg, fx.ex);
  const auto b = train_base_learners(fx.train, fx.val, cfg, fx.ex);
  REQUIRE(a.size() == 2);
  CHECK(a[0].head == b[0].head);
  CHECK(a[1].head == b[1].head);
  CHECK(nn::encode_network(a[0].head) != nn::encode_network(a[1].head));
  CHECK(a[0].config.fc == a[1].config.fc);

  auto serial = cfg;
  serial.parallel = false;
  CHECK(train_base_learners(fx.train, fx.val, serial, fx.ex)[1].head == a[1].head);

  SUBCASE("stacking") {
    const auto one = stack_predictions({a[0]}, fx.test);
    CHECK(one.learners() == 1);
    const auto p = model::forward_features(a[0], fx.test.x);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(one.matrix.at(i, 0) == p[i]);
    const auto twin = stack_predictions({a[0], a[0]}, fx.test);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(twin.matrix.at(i, 0) == twin.matrix.at(i, 1));
    for (double v : twin.matrix.values()) CHECK((v >= 0.0 && v <= 1.0));
  }
  SUBCASE("configuration errors") {
    CHECK_THROWS_AS(train_base_learners(fx.train, fx.val, small_config(1), fx.ex), ConfigError);
  }
}

TEST_CASE("train, predict, save and reload an ensemble") {
  const auto& fx = fixture();
  const auto m = train_ensemble(fx.train, fx.val, small_config(3), fx.ex);
  CHECK(m.meta.beta1.size() == 3);
  StackedFeatures stack;
  const auto p = predict_ensemble(m, fx.test, &stack);
  double hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK((p[i] >= 0.0 && p[i] <= 1.0));
    hits += model::classify(p[i]) == fx.test.y[i];
  }
  CHECK(hits / static_cast<double>(p.size()) >= 0.9);

  const auto dir = std::filesystem::temp_directory_path() / "berrystack_test_ensemble";
  std::filesystem::remove_all(dir);
  save_ensemble(m, dir);
  const auto back = load_ensemble(dir, fx.ex);
  CHECK(back.learners.size() == 3);
  CHECK(back.stack_digest == m.stack_digest);
  CHECK(back.meta.beta0 == m.meta.beta0);
  CHECK(back.meta.beta1 == m.meta.beta1);
  CHECK(predict_ensemble(back, fx.test) == p);
  CHECK_THROWS_AS(load_ensemble(dir / "nope", fx.ex), FormatError);
  std::filesystem::remove_all(dir);
}
