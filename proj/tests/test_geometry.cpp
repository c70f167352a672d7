#include <cmath>
#include <limits>

#include "doctest.h"

#include "banker/geometry.hpp"
#include "banker/rng.hpp"
#include "oracles.hpp"

using namespace banker;

namespace {

Vec uniform(std::size_t k) { return Vec(k, 1.0 / static_cast<double>(k)); }

Vec random_simplex(Rng& rng, std::size_t k) {
  Vec x(k);
  double s = 0.0;
  for (double& e : x) {
    e = 0.05 + rng.uniform();
    s += e;
  }
  for (double& e : x) e /= s;
  return x;
}

}  // namespace

TEST_CASE("psi values at reference points") {
  CHECK(psi_value(Regularizer::tsallis_half(4), uniform(4)) == doctest::Approx(-4.0));
  CHECK(psi_value(Regularizer::log_barrier_simplex(2), Vec{0.5, 0.5}) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(psi_value(Regularizer::hypercube_barrier(3), Vec{0, 0, 0}) == 0.0);
  CHECK(psi_value(Regularizer::ball_barrier(2), Vec{0, 0}) == 0.0);
}

TEST_CASE("psi rejects points outside the domain") {
  CHECK_THROWS_AS(psi_value(Regularizer::log_barrier_simplex(2), Vec{0.0, 1.0}),
                  DomainError);
  CHECK_THROWS_AS(psi_value(Regularizer::hypercube_barrier(1), Vec{1.0}), DomainError);
  CHECK_THROWS_AS(psi_value(Regularizer::ball_barrier(2), Vec{0.8, 0.6}), DomainError);
  CHECK_THROWS_AS(psi_value(Regularizer::tsallis_half(2), Vec{-0.1, 1.1}), DomainError);
  CHECK_THROWS_AS(psi_grad(Regularizer::tsallis_half(2), Vec{0.0, 1.0}), DomainError);
  // The Tsallis value itself is finite on the boundary.
  CHECK(psi_value(Regularizer::tsallis_half(2), Vec{0.0, 1.0}) == doctest::Approx(-2.0));
}

TEST_CASE("bregman reference values") {
  for (auto reg : {Regularizer::tsallis_half(4), Regularizer::log_barrier_simplex(4),
                   Regularizer::neg_entropy(4)}) {
    CHECK(std::abs(bregman(reg, uniform(4), uniform(4))) < 1e-15);
  }
  CHECK(bregman(Regularizer::tsallis_half(4), Vec{1, 0, 0, 0}, uniform(4)) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("tsallis divergence from uniform is at most 2 sqrt K over the simplex") {
  for (std::size_t k = 1; k <= 32; ++k) {
    const Regularizer reg = Regularizer::tsallis_half(k);
    for (std::size_t a = 0; a < k; ++a) {
      Vec y(k, 0.0);
      y[a] = 1.0;
      CHECK(bregman(reg, y, uniform(k)) <= 2.0 * std::sqrt(static_cast<double>(k)) + 1e-12);
    }
  }
}

TEST_CASE("unconstrained mirror map closed forms") {
  const Vec x = mirror_unconstrained(Regularizer::tsallis_half(3), Vec{-2, -2, -2});
  for (double e : x) CHECK(e == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(mirror_unconstrained(Regularizer::hypercube_barrier(1), Vec{0.0})[0] == 0.0);
  CHECK(mirror_unconstrained(Regularizer::ball_barrier(3), Vec{0, 0, 0}) == Vec{0, 0, 0});
  CHECK_THROWS_AS(mirror_unconstrained(Regularizer::tsallis_half(2), Vec{-1.0, 0.5}),
                  DomainError);
  CHECK_THROWS_AS(mirror_unconstrained(Regularizer::log_barrier_simplex(2), Vec{-1.0, 0.0}),
                  DomainError);
  // Hypercube inverse against (-1 + sqrt(1 + t^2)) / t, written without the
  // cancellation near zero.
  for (double t : {-50.0, -3.0, -0.2, 1e-9, 0.7, 8.0}) {
    const double expected = t / (1.0 + std::sqrt(1.0 + t * t));
    CHECK(mirror_unconstrained(Regularizer::hypercube_barrier(1), Vec{t})[0] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("unconstrained round trip on random points") {
  Rng rng(1);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (auto reg : {Regularizer::tsallis_half(n), Regularizer::log_barrier_simplex(n),
                     Regularizer::neg_entropy(n), Regularizer::hypercube_barrier(n),
                     Regularizer::ball_barrier(n)}) {
      for (int i = 0; i < 100; ++i) {
        Vec x(n);
        if (reg.is_simplex()) {
          x = random_simplex(rng, n);
        } else {
          for (double& e : x) e = 0.9 * (2 * rng.uniform() - 1) / std::sqrt(double(n));
        }
        const Vec back = mirror_unconstrained(reg, psi_grad(reg, x));
        for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(back[j] - x[j]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("simplex mirror map: symmetry and reference root") {
  for (double c : {-5.0, 0.0, 3.0}) {
    const Vec x = mirror_simplex(Regularizer::tsallis_half(5), Vec(5, c));
    for (double e : x) CHECK(e == doctest::Approx(0.2).epsilon(1e-12));
  }
  double lambda = 0.0;
  const Vec expected = oracle::simplex_by_bisection({-1.0, -2.0}, 2, &lambda);
  CHECK(lambda == doctest::Approx(0.1323).epsilon(1e-3));
  const Vec x = mirror_simplex(Regularizer::tsallis_half(2), Vec{-1.0, -2.0});
  CHECK(std::abs(x[0] - expected[0]) < 1e-6);
  CHECK(std::abs(x[1] - expected[1]) < 1e-6);
  // The root is lambda = 0.13224..., x = (0.78005, 0.21995); four-digit
  // figures quoted elsewhere round this loosely.
  CHECK(x[0] == doctest::Approx(0.7800).epsilon(1e-3));
  CHECK(x[1] == doctest::Approx(0.2200).epsilon(1e-3));
}

TEST_CASE("simplex mirror map agrees with bisection on random duals") {
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform() * 9);
    Vec theta(k);
    for (double& e : theta) e = -20.0 * rng.uniform() + 5.0;
    const Vec t2 = mirror_simplex(Regularizer::tsallis_half(k), theta);
    const Vec o2 = oracle::simplex_by_bisection(theta, 2);
    const Vec t1 = mirror_simplex(Regularizer::log_barrier_simplex(k), theta);
    const Vec o1 = oracle::simplex_by_bisection(theta, 1);
    double s2 = 0.0;
    double s1 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(std::abs(t2[j] - o2[j]) < 1e-9);
      CHECK(std::abs(t1[j] - o1[j]) < 1e-9);
      CHECK(t2[j] > 0.0);
      CHECK(t1[j] > 0.0);
      s2 += t2[j];
      s1 += t1[j];
    }
    CHECK(std::abs(s2 - 1.0) < 1e-9);
    CHECK(std::abs(s1 - 1.0) < 1e-9);
  }
}

TEST_CASE("simplex mirror map fixed point and softmax") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec x = random_simplex(rng, 6);
    for (auto reg : {Regularizer::tsallis_half(6), Regularizer::log_barrier_simplex(6),
                     Regularizer::neg_entropy(6)}) {
      const Vec back = mirror_simplex(reg, psi_grad(reg, x));
      for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(back[j] - x[j]) <= 1e-9);
    }
  }
  const Vec theta{0.3, -1.0, 2.0};
  const Vec sm = mirror_simplex(Regularizer::neg_entropy(3), theta);
  double z = 0.0;
  for (double t : theta) z += std::exp(t);
  for (std::size_t j = 0; j < 3; ++j) CHECK(sm[j] == doctest::Approx(std::exp(theta[j]) / z));
}

TEST_CASE("simplex mirror map rejects non-finite duals") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(mirror_simplex(Regularizer::tsallis_half(2), Vec{-1.0, std::nan("")}),
                  ConvergenceError);
  CHECK_THROWS_AS(mirror_simplex(Regularizer::log_barrier_simplex(2), Vec{-inf, -1.0}),
                  ConvergenceError);
}

TEST_CASE("omd step with zero loss is a no-op") {
  const Vec x{0.2, 0.3, 0.5};
  for (auto reg : {Regularizer::tsallis_half(3), Regularizer::log_barrier_simplex(3)}) {
    const OmdStep s = omd_step(reg, x, Vec{0, 0, 0}, 4.0);
    CHECK(s.z == x);
    CHECK(s.z_unconstrained == x);
  }
}

TEST_CASE("single-step inequality for the tsallis step") {
  const Regularizer reg = Regularizer::tsallis_half(2);
  const Vec x{0.5, 0.5};
  const Vec lhat{2.0, 0.0};
  const double sigma = 10.0;
  const OmdStep s = omd_step(reg, x, lhat, sigma);
  // z from the library against the bisection oracle.
  Vec theta = oracle::tsallis_grad(x);
  theta[0] -= lhat[0] / sigma;
  const Vec z = oracle::simplex_by_bisection(theta, 2);
  CHECK(std::abs(s.z[0] - z[0]) < 1e-9);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform();
    const Vec y{a, 1.0 - a};
    const double lhs = lhat[0] * (x[0] - y[0]) + lhat[1] * (x[1] - y[1]);
    const double rhs = sigma * oracle::tsallis_bregman(y, x) -
                       sigma * oracle::tsallis_bregman(y, s.z) +
                       sigma * oracle::tsallis_bregman(x, s.z_unconstrained);
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("log-barrier step stays within twice x for losses above -sigma/2") {
  const Regularizer reg = Regularizer::log_barrier_simplex(2);
  const Vec x{0.5, 0.5};
  const double sigma = 3.0;
  const double loss = -0.3 * sigma;
  const OmdStep s = omd_step(reg, x, Vec{loss / x[0], 0.0}, sigma);
  CHECK(s.z_unconstrained[0] <= 2.0 * x[0]);
  CHECK(s.z_unconstrained[0] == doctest::Approx(x[0] / (1.0 + loss / sigma)));
  CHECK(s.z[0] <= 2.0 * x[0]);
  // A raw loss of -sigma moves the dual coordinate to zero.
  CHECK_THROWS_AS(omd_step(reg, x, Vec{-sigma / x[0], 0.0}, sigma), DomainError);
}

TEST_CASE("hypercube hessian eigensystem") {
  const Eigensystem e0 = barrier_hessian_eigensystem(Regularizer::hypercube_barrier(3),
                                                     Vec{0, 0, 0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(e0.values[i] == doctest::Approx(2.0));
    for (std::size_t j = 0; j < 3; ++j) CHECK(e0.vectors[i][j] == (i == j ? 1.0 : 0.0));
  }
  const Eigensystem e1 =
      barrier_hessian_eigensystem(Regularizer::hypercube_barrier(1), Vec{0.5});
  CHECK(e1.values[0] == doctest::Approx(40.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("barrier eigensystems diagonalize the hessian") {
  Rng rng(5);
  for (std::size_t n = 1; n <= 5; ++n) {
    for (auto reg : {Regularizer::hypercube_barrier(n), Regularizer::ball_barrier(n)}) {
      for (int it = 0; it < 200; ++it) {
        Vec x(n);
        for (double& e : x) e = 0.95 * (2 * rng.uniform() - 1) / std::sqrt(double(n));
        const Eigensystem es = barrier_hessian_eigensystem(reg, x);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(es.values[i] > 0.0);
          CHECK(hessian_quadratic_form(reg, x, es.vectors[i]) ==
                doctest::Approx(es.values[i]).epsilon(1e-10));
          for (std::size_t j = i + 1; j < n; ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < n; ++c) d += es.vectors[i][c] * es.vectors[j][c];
            CHECK(std::abs(d) < 1e-12);
            // Off-diagonal of H in the eigenbasis vanishes by polarization.
            Vec sum(n);
            for (std::size_t c = 0; c < n; ++c) sum[c] = es.vectors[i][c] + es.vectors[j][c];
            CHECK(hessian_quadratic_form(reg, x, sum) ==
                  doctest::Approx(es.values[i] + es.values[j]).epsilon(1e-10));
          }
        }
      }
    }
  }
}

TEST_CASE("barrier hessian at the boundary is an error") {
  CHECK_THROWS_AS(barrier_hessian_eigensystem(Regularizer::hypercube_barrier(2), Vec{1.0, 0.0}),
                  DomainError);
  CHECK_THROWS_AS(barrier_hessian_eigensystem(Regularizer::tsallis_half(2), Vec{0.5, 0.5}),
                  DomainError);
}

TEST_CASE("regularizer names and parameters") {
  CHECK(Regularizer::from_name("ball", 3) == Regularizer::ball_barrier(3));
  CHECK_THROWS_AS(Regularizer::from_name("nope", 3), ConfigError);
  CHECK(Regularizer::hypercube_barrier(4).barrier_parameter() == 8.0);
  CHECK(Regularizer::ball_barrier(4).barrier_parameter() == 1.0);
  CHECK(Regularizer::tsallis_half(3).default_point() == uniform(3));
  CHECK(Regularizer::hypercube_barrier(2).default_point() == Vec{0.0, 0.0});
}
