#include "lazydagger/env.hpp"
#include "lazydagger/errors.hpp"
#include "lazydagger/policy.hpp"
#include "lazydagger/safety.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ldg;

namespace {

EnvAction act(double a, double b) {
  Vector v(2);
  v << a, b;
  return {v};
}

}  // namespace

TEST_CASE("discrepancy") {
  CHECK(discrepancy(act(0.3, 0.1), act(0.3, 0.1)) == 0.0);
  CHECK(discrepancy(act(0, 0), act(3, 4)) == doctest::Approx(5.0));
  CHECK(discrepancy(act(1, -2), act(0.5, 7)) == discrepancy(act(0.5, 7), act(1, -2)));
  Vector one(1);
  one << 0;
  CHECK_THROWS_AS(discrepancy(act(0, 0), {one}), ContractViolation);
}

TEST_CASE("label is boundary inclusive") {
  CHECK(label_from_discrepancy(0.01, 0.005) == SafetyLabel::Unsafe);
  CHECK(label_from_discrepancy(0.001, 0.005) == SafetyLabel::Safe);
  CHECK(label_from_discrepancy(0.005, 0.005) == SafetyLabel::Unsafe);
  CHECK(label(act(0, 0), act(3, 4), 5.0) == SafetyLabel::Unsafe);
  CHECK_THROWS_AS(label_from_discrepancy(1.0, -0.1), ContractViolation);

  // Raising tau never turns a safe label unsafe.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng), lo = u(rng), hi = lo + u(rng);
    if (label_from_discrepancy(d, lo) == SafetyLabel::Safe) {
      REQUIRE(label_from_discrepancy(d, hi) == SafetyLabel::Safe);
    }
  }
}

TEST_CASE("bce_loss") {
  CHECK(bce_loss(0.5, SafetyLabel::Safe) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(0.5, SafetyLabel::Unsafe) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(bce_loss(1 - kBceEpsilon, SafetyLabel::Unsafe) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bce_loss(0.9, SafetyLabel::Safe) == doctest::Approx(2.3026).epsilon(1e-4));
  // Clamping keeps the loss finite at the extremes.
  CHECK(std::isfinite(bce_loss(0.0, SafetyLabel::Unsafe)));
  CHECK(std::isfinite(bce_loss(1.0, SafetyLabel::Safe)));
  for (auto y : {SafetyLabel::Safe, SafetyLabel::Unsafe}) {
    const double p = y == SafetyLabel::Unsafe ? 1.0 : 0.0;
    CHECK(bce_loss(p, y) <= bce_loss(1.0 - p, y));
  }
}

TEST_CASE("threshold pair validation") {
  CHECK_NOTHROW((ThresholdPair{0.2, 0.1}.validate()));
  CHECK_NOTHROW((ThresholdPair{0.2, 0.2}.validate()));
  CHECK_THROWS_AS((ThresholdPair{0.1, 0.2}.validate()), ContractViolation);
  CHECK_THROWS_AS((ThresholdPair{-0.1, -0.2}.validate()), ContractViolation);
}

TEST_CASE("predict") {
  DiscrepancyClassifier zero(nn::Mlp({4, 3, 1}, nn::OutputActivation::Sigmoid));
  CHECK(zero.predict({Vector::Random(4)}) == doctest::Approx(0.5));
  auto f = init_classifier({4, 32, 32, 1}, 8);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 1000; ++i) {
    Vector s(4);
    s << n(rng), n(rng), n(rng), n(rng);
    const double p = f.predict({s});
    REQUIRE(p >= 0.0);
    REQUIRE(p <= 1.0);
    REQUIRE(p == f.predict({s}));
  }
}

TEST_CASE("classifier gradient matches central differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = init_classifier({3, 6, 6, 1}, 300 + static_cast<std::uint64_t>(trial));
    Matrix s(3, 9);
    Vector y(9);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = n(rng) > 0 ? 1.0 : 0.0;
    const double l2 = 1e-2;
    double loss = 0;
    const Vector g = classifier_gradient(f, s, y, l2, &loss);
    CHECK(loss == doctest::Approx(classifier_loss(f, s, y, l2)));
    const Vector theta = f.network().parameters();
    DiscrepancyClassifier q = f;
    double worst = 0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vector t = theta;
      t(i) += 1e-5;
      q.network().set_parameters(t);
      const double up = classifier_loss(q, s, y, l2);
      t(i) -= 2e-5;
      q.network().set_parameters(t);
      const double num = (up - classifier_loss(q, s, y, l2)) / 2e-5;
      worst = std::max(worst, std::abs(num - g(i)) / std::max({std::abs(num), std::abs(g(i)), 1e-6}));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("classifier training") {
  TrainConfig cfg;
  cfg.gradient_steps_per_epoch = 2000;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);

  SUBCASE("linearly separable targets") {
    auto make = [&](int n, Matrix& s, Vector& y) {
      s.resize(2, n);
      y.resize(n);
      for (int i = 0; i < n; ++i) {
        s(0, i) = u(rng);
        s(1, i) = u(rng);
        y(i) = s(0, i) + 0.5 * s(1, i) > 0.1 ? 1.0 : 0.0;
      }
    };
    Matrix train, test;
    Vector ytrain, ytest;
    make(2000, train, ytrain);
    make(1000, test, ytest);
    const auto r = train_classifier_on(init_classifier({2, 32, 32, 1}, 1), train, ytrain, cfg, 2);
    const Vector p = r.classifier.predict_batch(test);
    int correct = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) correct += (p(i) >= 0.5) == (ytest(i) > 0.5);
    CHECK(correct / 1000.0 >= 0.95);
    CHECK(r.loss_curve.size() == 2000);
    CHECK_FALSE(r.single_class);
  }

  SUBCASE("all-safe targets drive predictions down and raise the flag") {
    Matrix s(2, 500);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
    const auto r = train_classifier_on(init_classifier({2, 32, 32, 1}, 1), s,
                                       Vector::Zero(500), cfg, 2);
    CHECK(r.classifier.predict_batch(s).mean() < 0.1);
    CHECK(r.single_class);
    CHECK(r.unsafe_fraction == 0.0);
  }

  SUBCASE("determinism and labels from the current policy") {
    LineTrack1D env;
    const auto data = collect_supervisor_data(env, 500, 4);
    const auto policy = init_policy({1, 8, 1}, env.spec().action_low, env.spec().action_high, 4);
    cfg.gradient_steps_per_epoch = 100;
    const auto a = train_classifier(init_classifier({1, 8, 1}, 3), data, policy, 0.3, cfg, 5);
    const auto b = train_classifier(init_classifier({1, 8, 1}, 3), data, policy, 0.3, cfg, 5);
    CHECK(a.classifier.network().parameters() == b.classifier.network().parameters());
    const Vector y = safety_targets(policy, data, 0.3);
    CHECK(a.unsafe_fraction == doctest::Approx(y.mean()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double d = discrepancy(policy.forward(data[i].state), data[i].supervisor_action);
      REQUIRE(y(static_cast<Eigen::Index>(i)) == (d >= 0.3 ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("calibration") {
  SUBCASE("ten evenly spaced discrepancies") {
    std::vector<double> d;
    for (int i = 1; i <= 10; ++i) d.push_back(i / 10.0);
    const auto c = calibrate_from_discrepancies(d, 0.2);
    CHECK(c.tau_sup == doctest::Approx(0.9));
    CHECK(c.unsafe_fraction == doctest::Approx(0.2));
    CHECK_FALSE(c.warning);
  }
  SUBCASE("uniform samples") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> d(4000);
    for (auto& x : d) x = u(rng);
    const auto c = calibrate_from_discrepancies(d, 0.2);
    CHECK(std::abs(c.tau_sup - 0.8) <= 0.02);
    CHECK(std::abs(c.unsafe_fraction - 0.2) <= 1.0 / 4000 + 1e-12);
  }
  SUBCASE("all equal") {
    const auto c = calibrate_from_discrepancies(std::vector<double>(50, 0.3), 0.2);
    CHECK(c.tau_sup == 0.3);
    CHECK(c.unsafe_fraction == 1.0);
    CHECK(c.warning);
  }
  SUBCASE("too few samples still returns a quantile") {
    const auto c = calibrate_from_discrepancies({0.1, 0.2, 0.3}, 0.2);
    CHECK(c.warning);
    CHECK(c.tau_sup == doctest::Approx(0.3));
  }
  SUBCASE("fraction within 1/n for random data and targets") {
    std::mt19937_64 rng(12);
    std::exponential_distribution<double> e(3.0);
    std::uniform_real_distribution<double> t(0.05, 0.95);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 20 + trial * 7;
      std::vector<double> d(static_cast<std::size_t>(n));
      for (auto& x : d) x = e(rng);
      const double target = t(rng);
      const auto c = calibrate_from_discrepancies(d, target);
      const double frac = static_cast<double>(std::count_if(
                              d.begin(), d.end(), [&](double x) { return x >= c.tau_sup; })) /
                          n;
      CHECK(frac == doctest::Approx(c.unsafe_fraction));
      CHECK(std::abs(frac - target) <= 1.0 / n + 1e-12);
    }
  }
  SUBCASE("bad targets") {
    CHECK_THROWS_AS(calibrate_from_discrepancies({0.1}, 0.0), ContractViolation);
    CHECK_THROWS_AS(calibrate_from_discrepancies({0.1}, 1.0), ContractViolation);
    CHECK_THROWS_AS(calibrate_from_discrepancies({}, 0.2), ContractViolation);
  }
}
