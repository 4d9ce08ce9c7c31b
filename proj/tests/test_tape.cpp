#include "test_util.hpp"

#include "relrl/error.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace relrl;
using namespace relrl::testing;

namespace {

/// sum_i y_i . w with a fixed random row w, so every output entry gets a
/// distinct upstream gradient.
Var project(Tape<double>& t, Var y, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const Matd& v = t.value(y);
  Var w = t.constant(random_matrix(1, static_cast<int>(v.cols()), rng));
  Var b = t.constant(Matd::Zero(1, 1));
  return sum(t, linear(t, y, w, b));
}

void check_gradient(const TapeFn& f, const Matd& x, double tol = 1e-6) {
  const Matd a = analytic_grad(f, x);
  const Matd n = numeric_grad(f, x);
  CHECK(max_abs_diff(a, n) < tol);
}

}  // namespace

TEST_SUITE("tape") {
  TEST_CASE("linear computes x W^T + b") {
    Tape<double> t;
    Matd x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    Matd w(2, 3);
    w << 1, 0, -1, 0.5, 0.5, 0.5;
    Matd b(1, 2);
    b << 10, 20;
    const Matd& y = t.value(linear(t, t.constant(x), t.constant(w), t.constant(b)));
    Matd expected(2, 2);
    expected << 1 - 3 + 10, 3 + 20, 4 - 6 + 10, 7.5 + 20;
    CHECK(max_abs_diff(y, expected) < 1e-12);
  }

  TEST_CASE("gradients match central differences for every primitive") {
    std::mt19937_64 rng(1);
    const Matd x = random_matrix(5, 3, rng);
    const Matd other = random_matrix(5, 3, rng);
    const Matd w = random_matrix(4, 3, rng);
    const Matd b = random_matrix(1, 4, rng);

    SUBCASE("linear input") {
      check_gradient([&](Tape<double>& t, Var v) { return project(t, linear(t, v, t.constant(w), t.constant(b))); }, x);
    }
    SUBCASE("linear weight") {
      check_gradient([&](Tape<double>& t, Var v) { return project(t, linear(t, t.constant(x), v, t.constant(b))); }, w);
    }
    SUBCASE("linear bias") {
      check_gradient([&](Tape<double>& t, Var v) { return project(t, linear(t, t.constant(x), t.constant(w), v)); }, b);
    }
    SUBCASE("leaky_relu") { check_gradient([](Tape<double>& t, Var v) { return project(t, leaky_relu(t, v)); }, x); }
    SUBCASE("add") {
      check_gradient([&](Tape<double>& t, Var v) { return project(t, add(t, v, t.constant(other))); }, x);
    }
    SUBCASE("concat_cols") {
      check_gradient(
          [&](Tape<double>& t, Var v) {
            const std::array<Var, 3> parts{v, t.constant(other), v};
            return project(t, concat_cols<double>(t, parts));
          },
          x);
    }
    SUBCASE("gather_rows with repeats") {
      check_gradient([](Tape<double>& t, Var v) { return project(t, gather_rows(t, v, {4, 0, 0, 2, 4, 4})); }, x);
    }
    SUBCASE("row_slice") {
      check_gradient([](Tape<double>& t, Var v) { return project(t, row_slice(t, v, 1, 3)); }, x);
    }
    SUBCASE("segment_max") {
      check_gradient([](Tape<double>& t, Var v) { return project(t, segment_max(t, v, {0, 2, 0, 2, 0}, 4)); }, x);
    }
    SUBCASE("segment_sum") {
      check_gradient([](Tape<double>& t, Var v) { return project(t, segment_sum(t, v, {1, 1, 0, 2, 1}, 3)); }, x);
    }
    SUBCASE("segment_softmax") {
      check_gradient([](Tape<double>& t, Var v) { return project(t, segment_softmax(t, v, {0, 1, 0, 1, 1}, 2)); },
                     random_matrix(5, 1, rng));
    }
    SUBCASE("scale_rows") {
      check_gradient([&](Tape<double>& t, Var v) { return project(t, scale_rows(t, v, t.constant(other.col(0)))); },
                     x);
      check_gradient([&](Tape<double>& t, Var v) { return project(t, scale_rows(t, t.constant(x), v)); },
                     random_matrix(5, 1, rng));
    }
    SUBCASE("element and weighted_sum") {
      check_gradient(
          [](Tape<double>& t, Var v) {
            const std::array<Var, 3> s{element(t, v, 0, 1), element(t, v, 4, 2), element(t, v, 0, 1)};
            const std::array<double, 3> c{2.0, -3.0, 0.5};
            return weighted_sum<double>(t, s, c);
          },
          x);
    }
    SUBCASE("categorical_log_prob") {
      const Mask mask{1, 0, 1, 1, 1};
      check_gradient([&](Tape<double>& t, Var v) { return categorical_log_prob(t, v, mask, 3); },
                     random_matrix(5, 1, rng));
    }
    SUBCASE("bernoulli_log_prob") {
      const Mask selected{1, 0, 0, 1, 0};
      const Mask allowed{1, 1, 0, 1, 1};
      check_gradient([&](Tape<double>& t, Var v) { return bernoulli_log_prob(t, v, selected, allowed); },
                     random_matrix(5, 1, rng, 3.0));
    }
  }

  TEST_CASE("segment_max gives zero rows for empty segments") {
    Tape<double> t;
    Matd x(2, 2);
    x << -1, -2, -3, 4;
    const Matd& y = t.value(segment_max(t, t.constant(x), {0, 0}, 2));
    CHECK(y(0, 0) == -1);
    CHECK(y(0, 1) == 4);
    CHECK(y(1, 0) == 0);
    CHECK(y(1, 1) == 0);
  }

  TEST_CASE("segment_softmax sums to one per segment") {
    Tape<double> t;
    std::mt19937_64 rng(3);
    const Matd& p = t.value(segment_softmax(t, t.constant(random_matrix(6, 1, rng, 50.0)), {0, 1, 1, 0, 2, 1}, 3));
    CHECK(p(0, 0) + p(3, 0) == doctest::Approx(1.0));
    CHECK(p(1, 0) + p(2, 0) + p(5, 0) == doctest::Approx(1.0));
    CHECK(p(4, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("categorical_log_prob equals the log of the masked softmax") {
    Tape<double> t;
    Matd logits(1, 4);
    logits << 0.5, -1.0, 2.0, 0.0;
    const Mask mask{1, 1, 0, 1};
    const double lp = t.value(categorical_log_prob(t, t.constant(logits), mask, 0))(0, 0);
    const double z = std::exp(0.5) + std::exp(-1.0) + std::exp(0.0);
    CHECK(lp == doctest::Approx(0.5 - std::log(z)).epsilon(1e-12));
    CHECK_THROWS_AS(categorical_log_prob(t, t.constant(logits), mask, 2), Error);
  }

  TEST_CASE("bernoulli_log_prob sums independent terms over allowed entries") {
    Tape<double> t;
    Matd s(3, 1);
    s << 0.3, -2.0, 5.0;
    const double lp = t.value(bernoulli_log_prob(t, t.constant(s), Mask{1, 0, 0}, Mask{1, 1, 0}))(0, 0);
    const double expected = std::log(1.0 / (1.0 + std::exp(-0.3))) + std::log(1.0 - 1.0 / (1.0 + std::exp(2.0)));
    CHECK(lp == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("softmax_masked zeroes masked entries and rejects an empty mask") {
    const std::vector<double> logits{1000.0, 0.0, 1001.0};
    const auto p = softmax_masked(logits, Mask{1, 1, 0});
    CHECK(p[2] == 0.0);
    CHECK(p[0] + p[1] == doctest::Approx(1.0));
    CHECK(std::isfinite(p[0]));
    CHECK_THROWS_AS(softmax_masked(logits, Mask{0, 0, 0}), Error);
  }

  TEST_CASE("log_sigmoid is stable for large arguments") {
    CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
    CHECK(log_sigmoid(800.0) == doctest::Approx(0.0));
    CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  }

  TEST_CASE("parameter gradients accumulate across uses") {
    BasicParameterStore<double> store;
    auto& e = store.add("p", Matd::Constant(1, 1, 2.0));
    Tape<double> t;
    Var p = t.parameter(e);
    Var q = t.parameter(e);
    CHECK(p.id == q.id);
    const std::array<Var, 2> s{p, q};
    const std::array<double, 2> c{3.0, 4.0};
    t.backward(weighted_sum<double>(t, s, c));
    CHECK(e.grad(0, 0) == doctest::Approx(7.0));
  }

  TEST_CASE("shape mismatches are reported") {
    Tape<double> t;
    Var a = t.constant(Matd::Zero(2, 3));
    Var w = t.constant(Matd::Zero(4, 2));
    Var b = t.constant(Matd::Zero(1, 4));
    CHECK_THROWS_AS(linear(t, a, w, b), Error);
    CHECK_THROWS_AS(add(t, a, t.constant(Matd::Zero(3, 3))), Error);
  }
}
