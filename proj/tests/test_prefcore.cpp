#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "tiepref/prefcore.hpp"
#include "tiepref/rng.hpp"

using namespace tiepref;

namespace {

const std::vector<double> kThetas = {1.0, 1.5, 2.0, 5.0, 10.0, 100.0};

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = lo + (hi - lo) * double(i) / double(n - 1);
  }
  return xs;
}

}  // namespace

TEST_CASE("TieModelParams validates theta") {
  CHECK_NOTHROW(TieModelParams(1.0));
  CHECK_NOTHROW(TieModelParams(100.0));
  CHECK_THROWS_AS(TieModelParams(0.999), InvalidParameterError);
  CHECK_THROWS_AS(TieModelParams(-2.0), InvalidParameterError);
  CHECK_THROWS_AS(TieModelParams(std::numeric_limits<double>::infinity()),
                  InvalidParameterError);
  CHECK_THROWS_AS(TieModelParams(std::nan("")), InvalidParameterError);
}

TEST_CASE("bt_win_prob values and stability") {
  CHECK(bt_win_prob(0.0) == 0.5);
  // High-precision logistic as oracle.
  CHECK(bt_win_prob(1.0) == doctest::Approx(0.73105857863000488).epsilon(1e-14));
  // sigma(50) lies in (1 - 1e-20, 1); the nearest double is exactly 1.0.
  const double p = bt_win_prob(50.0);
  CHECK(p >= 1.0 - 1e-20);
  CHECK(p <= 1.0);
  CHECK(std::isfinite(bt_win_prob(700.0)));
  CHECK(std::isfinite(bt_win_prob(-700.0)));
  CHECK(bt_win_prob(-700.0) > 0.0);
  CHECK_THROWS_AS(bt_win_prob(std::nan("")), DomainError);
  CHECK_THROWS_AS(bt_win_prob(std::numeric_limits<double>::infinity()),
                  DomainError);
}

TEST_CASE("btt_win_prob values") {
  CHECK(btt_win_prob(0.7, 0.7, TieModelParams(1.0)) == 0.5);
  CHECK(btt_win_prob(0.0, 0.0, TieModelParams(2.0)) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  // Shift invariance plus the 1/(1+theta) oracle at equal rewards.
  CHECK(btt_win_prob(3.0, 3.0, TieModelParams(5.0)) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(btt_win_prob(std::nan(""), 0.0, TieModelParams(2.0)),
                  DomainError);
}

TEST_CASE("btt_tie_prob values") {
  CHECK(btt_tie_prob(1.3, -0.2, TieModelParams(1.0)) == 0.0);
  CHECK(btt_tie_prob(-5.0, 17.0, TieModelParams(1.0)) == 0.0);
  // Hand evaluation (theta^2 - 1) / (1 + theta)^2 at equal rewards.
  CHECK(btt_tie_prob(0.0, 0.0, TieModelParams(2.0)) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(btt_tie_prob(0.0, 0.0, TieModelParams(5.0)) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("collapsed_win_prob values") {
  CHECK(collapsed_win_prob(0.4, 0.4, TieModelParams(7.0)) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(collapsed_win_prob(0.0, 0.0, TieModelParams(2.0)) ==
        doctest::Approx(0.5).epsilon(1e-14));
  // theta = 1 collapses to plain BT exactly (tie mass vanishes).
  for (double d : {-3.0, -0.25, 0.0, 1.7}) {
    CHECK(collapsed_win_prob(d, 0.0, TieModelParams(1.0)) ==
          bt_win_prob(d));
  }
}

TEST_CASE("normalization over the (r1, r2, theta) grid") {
  for (double th : kThetas) {
    const TieModelParams params(th);
    for (double r1 : linspace(-20.0, 20.0, 41)) {
      for (double r2 : linspace(-20.0, 20.0, 41)) {
        const double total = btt_win_prob(r1, r2, params) +
                             btt_win_prob(r2, r1, params) +
                             btt_tie_prob(r1, r2, params);
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("BT reduction at theta = 1") {
  const TieModelParams params(1.0);
  for (double r1 : linspace(-20.0, 20.0, 33)) {
    for (double r2 : linspace(-20.0, 20.0, 33)) {
      CHECK(std::abs(btt_win_prob(r1, r2, params) - bt_win_prob(r1 - r2)) <
            1e-14);
    }
  }
}

TEST_CASE("shift invariance is bit-exact") {
  for (double th : kThetas) {
    const TieModelParams params(th);
    for (double c : {-100.0, 0.0, 100.0}) {
      for (double r1 : linspace(-20.0, 20.0, 21)) {
        for (double r2 : linspace(-20.0, 20.0, 21)) {
          CHECK(btt_win_prob(r1 + c, r2 + c, params) ==
                btt_win_prob(r1, r2, params));
          CHECK(btt_tie_prob(r1 + c, r2 + c, params) ==
                btt_tie_prob(r1, r2, params));
        }
      }
    }
  }
}

TEST_CASE("tie probability is exactly symmetric") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double r1 = rng.uniform(-30.0, 30.0);
    const double r2 = rng.uniform(-30.0, 30.0);
    const double th = 1.0 + rng.uniform(0.0, 20.0);
    const TieModelParams params(th);
    CHECK(btt_tie_prob(r1, r2, params) == btt_tie_prob(r2, r1, params));
  }
}

TEST_CASE("collapsed complement") {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double r1 = rng.uniform(-20.0, 20.0);
    const double r2 = rng.uniform(-20.0, 20.0);
    const TieModelParams params(1.0 + rng.uniform(0.0, 30.0));
    const double s = collapsed_win_prob(r1, r2, params) +
                     collapsed_win_prob(r2, r1, params);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("bias_bound values") {
  CHECK(bias_bound(TieModelParams(1.0)) == 0.0);
  CHECK(bias_bound(TieModelParams(2.0)) ==
        doctest::Approx(0.22314355131420976).epsilon(1e-12));
  CHECK(bias_bound(TieModelParams(5.0)) ==
        doctest::Approx(0.95551144502743636).epsilon(1e-12));
}

TEST_CASE("bias_term values and sign") {
  CHECK(bias_term(0.0, TieModelParams(3.0)) == 0.0);
  for (double x : {-4.0, -0.3, 0.9, 12.0}) {
    CHECK(bias_term(x, TieModelParams(1.0)) == 0.0);
  }
  // High-precision evaluation of the bias formula as oracle.
  CHECK(bias_term(1.5, TieModelParams(2.0)) ==
        doctest::Approx(-0.14137923359877436).epsilon(1e-10));
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const double x = rng.uniform(-15.0, 15.0);
    const TieModelParams params(1.0 + rng.uniform(0.001, 20.0));
    const double b = bias_term(x, params);
    if (x > 0) CHECK(b < 0.0);
    if (x < 0) CHECK(b > 0.0);
  }
}

TEST_CASE("bias_term is exactly odd") {
  Rng rng(10);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(0.0, 40.0);
    const TieModelParams params(1.0 + rng.uniform(0.0, 50.0));
    CHECK(bias_term(-x, params) == -bias_term(x, params));
    CHECK(forward_bias_map(-x, params) == -forward_bias_map(x, params));
  }
}

TEST_CASE("bias stays strictly inside the bound and attains it in the limit") {
  // Past |x| ~ 37 the computed bias rounds onto the bound itself, so the
  // strictness samples stay within the +-30 attainment points.
  for (double th : {1.5, 2.0, 5.0, 10.0, 100.0}) {
    const TieModelParams params(th);
    const double bound = bias_bound(params);
    Rng rng(11);
    for (int i = 0; i < 5000; ++i) {
      const double x = rng.uniform(-30.0, 30.0);
      CHECK(std::abs(bias_term(x, params)) < bound);
    }
    CHECK(std::abs(bias_term(30.0, params)) > 0.999 * bound);
    CHECK(std::abs(bias_term(-30.0, params)) > 0.999 * bound);
  }
}

TEST_CASE("bias_term_derivative matches central differences") {
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const double x = rng.uniform(-10.0, 10.0);
    const TieModelParams params(1.0 + rng.uniform(0.0, 12.0));
    const double h = 1e-6;
    const double fd =
        (bias_term(x + h, params) - bias_term(x - h, params)) / (2.0 * h);
    CHECK(bias_term_derivative(x, params) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("forward_bias_map values and monotonicity") {
  CHECK(forward_bias_map(0.0, TieModelParams(4.0)) == 0.0);
  CHECK(forward_bias_map(1.5, TieModelParams(2.0)) ==
        doctest::Approx(1.3586207664012256).epsilon(1e-10));
  for (double x : {-7.0, -0.1, 0.4, 3.3}) {
    CHECK(forward_bias_map(x, TieModelParams(1.0)) == x);
  }
  for (double th : {1.5, 2.0, 5.0, 10.0}) {
    const TieModelParams params(th);
    double prev = forward_bias_map(-10.0, params);
    const auto xs = linspace(-10.0, 10.0, 10000);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double cur = forward_bias_map(xs[i], params);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("the bias map matches the collapsed probabilities") {
  // The substantive identity: sigma(forward(delta*)) equals the collapsed
  // win probability of the underlying rewards.
  Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const double r1 = rng.uniform(-8.0, 8.0);
    const double r2 = rng.uniform(-8.0, 8.0);
    const TieModelParams params(1.0 + rng.uniform(0.0, 15.0));
    const double lhs = bt_win_prob(forward_bias_map(r1 - r2, params));
    const double rhs = collapsed_win_prob(r1, r2, params);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("invert_bias_map") {
  CHECK(std::abs(invert_bias_map(0.0, TieModelParams(6.0))) <= 1e-10);
  CHECK(invert_bias_map(2.71, TieModelParams(1.0)) == 2.71);
  CHECK(invert_bias_map(1.35862, TieModelParams(2.0)) ==
        doctest::Approx(1.5).epsilon(1e-3));
  for (double x : {-3.0, -0.5, 0.7, 2.94}) {
    for (double th : {2.0, 5.0, 10.0}) {
      const TieModelParams params(th);
      CHECK(std::abs(invert_bias_map(forward_bias_map(x, params), params) - x) <
            1e-8);
    }
  }
  CHECK_THROWS_AS(invert_bias_map(std::nan(""), TieModelParams(2.0)),
                  DomainError);
}
