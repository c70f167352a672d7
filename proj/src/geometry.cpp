#include "banker/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

namespace banker {
namespace {

constexpr double kNormalizationTolerance = 1e-12;
constexpr int kMaxRootIterations = 200;
constexpr double kUnderflowFloor = 1e-300;

std::atomic<std::size_t> g_underflow_count{0};

void check_dim(const Regularizer& reg, std::size_t size, const char* what) {
  if (size != reg.dim()) {
    throw DomainError(std::string(what) + ": expected dimension " +
                      std::to_string(reg.dim()) + ", got " +
                      std::to_string(size));
  }
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return s;
}

[[noreturn]] void outside(const Regularizer& reg, const char* what) {
  throw DomainError(std::string(what) + ": point outside the interior of the " +
                    reg.name() + " domain");
}

// Strict interior of the positive orthant.
void require_positive(const Regularizer& reg, std::span<const double> x,
                      const char* what) {
  for (double e : x) {
    if (!(e > 0.0) || !std::isfinite(e)) outside(reg, what);
  }
}

void require_nonnegative(const Regularizer& reg, std::span<const double> x,
                         const char* what) {
  for (double e : x) {
    if (!(e >= 0.0) || !std::isfinite(e)) outside(reg, what);
  }
}

void require_barrier_interior(const Regularizer& reg, std::span<const double> x,
                              const char* what) {
  if (reg.kind() == RegularizerKind::kHypercubeBarrier) {
    for (double e : x) {
      if (!(std::abs(e) < 1.0)) outside(reg, what);
    }
  } else if (!(squared_norm(x) < 1.0)) {
    outside(reg, what);
  }
}

void require_finite(std::span<const double> v, const char* what) {
  for (double e : v) {
    if (!std::isfinite(e)) {
      throw DomainError(std::string(what) + ": non-finite coordinate");
    }
  }
}

// Inverse of r -> 2r / (1 - r^2), written without cancellation.
double barrier_radius(double theta) {
  return theta / (1.0 + std::sqrt(1.0 + theta * theta));
}

// Conjugate of r -> -ln(1 - r^2) evaluated at theta:
// sqrt(1+theta^2) - 1 + ln 2 - ln(1 + sqrt(1+theta^2)).
double barrier_conjugate(double theta) {
  const double s = std::sqrt(1.0 + theta * theta);
  return (s - 1.0) + std::log(2.0) - std::log1p(s);
}

Vec softmax(std::span<const double> theta) {
  const double top = *std::max_element(theta.begin(), theta.end());
  Vec x(theta.size());
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    x[i] = std::exp(theta[i] - top);
    total += x[i];
  }
  for (double& e : x) e /= total;
  return x;
}

// Solves sum_i (mu - shifted_i)^(-power) = 1 for mu, where shifted <= 0 with
// max 0. The left side is strictly decreasing in mu and is >= 1 at mu = 1
// and <= 1 at mu = upper, so the root is bracketed in [1, upper].
double normalization_root(std::span<const double> shifted, double power,
                          double upper) {
  double lo = 1.0;
  double hi = upper;
  double mu = upper;
  for (int iter = 0; iter < kMaxRootIterations; ++iter) {
    double f = -1.0;
    double df = 0.0;
    for (double s : shifted) {
      const double gap = mu - s;
      const double term = std::pow(gap, -power);
      f += term;
      df -= power * term / gap;
    }
    if (std::abs(f) <= kNormalizationTolerance) return mu;
    if (f > 0.0) {
      lo = mu;
    } else {
      hi = mu;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return mu;
    }
    double next = mu - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  throw ConvergenceError(
      "mirror_simplex: normalization root not found within 200 iterations");
}

}  // namespace

Regularizer::Regularizer(RegularizerKind kind, std::size_t dim)
    : kind_(kind), dim_(dim) {
  if (dim == 0) throw DomainError("regularizer dimension must be positive");
}

Regularizer Regularizer::tsallis_half(std::size_t arms) {
  return {RegularizerKind::kTsallisHalf, arms};
}
Regularizer Regularizer::log_barrier_simplex(std::size_t arms) {
  return {RegularizerKind::kLogBarrierSimplex, arms};
}
Regularizer Regularizer::neg_entropy(std::size_t arms) {
  return {RegularizerKind::kNegEntropy, arms};
}
Regularizer Regularizer::hypercube_barrier(std::size_t dim) {
  return {RegularizerKind::kHypercubeBarrier, dim};
}
Regularizer Regularizer::ball_barrier(std::size_t dim) {
  return {RegularizerKind::kBallBarrier, dim};
}

Regularizer Regularizer::from_name(std::string_view name, std::size_t dim) {
  if (name == "tsallis") return tsallis_half(dim);
  if (name == "log_barrier") return log_barrier_simplex(dim);
  if (name == "neg_entropy") return neg_entropy(dim);
  if (name == "hypercube") return hypercube_barrier(dim);
  if (name == "ball") return ball_barrier(dim);
  throw ConfigError("unknown regularizer '" + std::string(name) + "'");
}

bool Regularizer::is_simplex() const {
  return kind_ == RegularizerKind::kTsallisHalf ||
         kind_ == RegularizerKind::kLogBarrierSimplex ||
         kind_ == RegularizerKind::kNegEntropy;
}

std::string Regularizer::name() const {
  switch (kind_) {
    case RegularizerKind::kTsallisHalf:
      return "tsallis";
    case RegularizerKind::kLogBarrierSimplex:
      return "log_barrier";
    case RegularizerKind::kNegEntropy:
      return "neg_entropy";
    case RegularizerKind::kHypercubeBarrier:
      return "hypercube";
    case RegularizerKind::kBallBarrier:
      return "ball";
  }
  return "unknown";
}

double Regularizer::barrier_parameter() const {
  switch (kind_) {
    case RegularizerKind::kHypercubeBarrier:
      return 2.0 * static_cast<double>(dim_);
    case RegularizerKind::kBallBarrier:
      return 1.0;
    default:
      throw DomainError(name() + " is not a self-concordant barrier");
  }
}

Vec Regularizer::default_point() const {
  if (is_simplex()) return Vec(dim_, 1.0 / static_cast<double>(dim_));
  return Vec(dim_, 0.0);
}

double psi_value(const Regularizer& reg, std::span<const double> x) {
  check_dim(reg, x.size(), "psi_value");
  double value = 0.0;
  switch (reg.kind()) {
    case RegularizerKind::kTsallisHalf:
      require_nonnegative(reg, x, "psi_value");
      for (double e : x) value -= 2.0 * std::sqrt(e);
      return value;
    case RegularizerKind::kLogBarrierSimplex:
      require_positive(reg, x, "psi_value");
      for (double e : x) value -= std::log(e);
      return value;
    case RegularizerKind::kNegEntropy:
      require_nonnegative(reg, x, "psi_value");
      for (double e : x) {
        if (e > 0.0) value += e * std::log(e);
      }
      return value;
    case RegularizerKind::kHypercubeBarrier:
      require_barrier_interior(reg, x, "psi_value");
      for (double e : x) value -= std::log1p(-e) + std::log1p(e);
      return value;
    case RegularizerKind::kBallBarrier:
      require_barrier_interior(reg, x, "psi_value");
      return -std::log1p(-squared_norm(x));
  }
  return value;
}

Vec psi_grad(const Regularizer& reg, std::span<const double> x) {
  check_dim(reg, x.size(), "psi_grad");
  Vec g(x.size());
  switch (reg.kind()) {
    case RegularizerKind::kTsallisHalf:
      require_positive(reg, x, "psi_grad");
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = -1.0 / std::sqrt(x[i]);
      break;
    case RegularizerKind::kLogBarrierSimplex:
      require_positive(reg, x, "psi_grad");
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = -1.0 / x[i];
      break;
    case RegularizerKind::kNegEntropy:
      require_positive(reg, x, "psi_grad");
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = std::log(x[i]) + 1.0;
      break;
    case RegularizerKind::kHypercubeBarrier:
      require_barrier_interior(reg, x, "psi_grad");
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = 2.0 * x[i] / ((1.0 - x[i]) * (1.0 + x[i]));
      }
      break;
    case RegularizerKind::kBallBarrier: {
      require_barrier_interior(reg, x, "psi_grad");
      const double scale = 2.0 / (1.0 - squared_norm(x));
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = scale * x[i];
      break;
    }
  }
  return g;
}

double hessian_quadratic_form(const Regularizer& reg, std::span<const double> x,
                              std::span<const double> h) {
  check_dim(reg, x.size(), "hessian_quadratic_form");
  check_dim(reg, h.size(), "hessian_quadratic_form");
  double q = 0.0;
  switch (reg.kind()) {
    case RegularizerKind::kTsallisHalf:
      require_positive(reg, x, "hessian_quadratic_form");
      for (std::size_t i = 0; i < x.size(); ++i) {
        q += h[i] * h[i] * 0.5 * std::pow(x[i], -1.5);
      }
      return q;
    case RegularizerKind::kLogBarrierSimplex:
      require_positive(reg, x, "hessian_quadratic_form");
      for (std::size_t i = 0; i < x.size(); ++i) q += h[i] * h[i] / (x[i] * x[i]);
      return q;
    case RegularizerKind::kNegEntropy:
      require_positive(reg, x, "hessian_quadratic_form");
      for (std::size_t i = 0; i < x.size(); ++i) q += h[i] * h[i] / x[i];
      return q;
    case RegularizerKind::kHypercubeBarrier:
      require_barrier_interior(reg, x, "hessian_quadratic_form");
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double gap = (1.0 - x[i]) * (1.0 + x[i]);
        q += h[i] * h[i] * (2.0 + 2.0 * x[i] * x[i]) / (gap * gap);
      }
      return q;
    case RegularizerKind::kBallBarrier: {
      require_barrier_interior(reg, x, "hessian_quadratic_form");
      const double gap = 1.0 - squared_norm(x);
      const double xh = std::inner_product(x.begin(), x.end(), h.begin(), 0.0);
      return 2.0 * squared_norm(h) / gap + 4.0 * xh * xh / (gap * gap);
    }
  }
  return q;
}

double conjugate_value(const Regularizer& reg, std::span<const double> theta) {
  check_dim(reg, theta.size(), "conjugate_value");
  require_finite(theta, "conjugate_value");
  double value = 0.0;
  switch (reg.kind()) {
    case RegularizerKind::kTsallisHalf:
      for (double e : theta) {
        if (!(e < 0.0)) outside(reg, "conjugate_value");
        value -= 1.0 / e;
      }
      return value;
    case RegularizerKind::kLogBarrierSimplex:
      for (double e : theta) {
        if (!(e < 0.0)) outside(reg, "conjugate_value");
        value += -1.0 - std::log(-e);
      }
      return value;
    case RegularizerKind::kNegEntropy:
      for (double e : theta) value += std::exp(e - 1.0);
      return value;
    case RegularizerKind::kHypercubeBarrier:
      for (double e : theta) value += barrier_conjugate(e);
      return value;
    case RegularizerKind::kBallBarrier:
      return barrier_conjugate(std::sqrt(squared_norm(theta)));
  }
  return value;
}

double bregman(const Regularizer& reg, std::span<const double> y,
               std::span<const double> x) {
  check_dim(reg, y.size(), "bregman");
  const Vec grad = psi_grad(reg, x);
  double inner = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) inner += grad[i] * (y[i] - x[i]);
  return psi_value(reg, y) - psi_value(reg, x) - inner;
}

Vec mirror_unconstrained(const Regularizer& reg, std::span<const double> theta) {
  check_dim(reg, theta.size(), "mirror_unconstrained");
  require_finite(theta, "mirror_unconstrained");
  Vec x(theta.size());
  switch (reg.kind()) {
    case RegularizerKind::kTsallisHalf:
      for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!(theta[i] < 0.0)) outside(reg, "mirror_unconstrained (dual)");
        x[i] = 1.0 / (theta[i] * theta[i]);
      }
      break;
    case RegularizerKind::kLogBarrierSimplex:
      for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!(theta[i] < 0.0)) outside(reg, "mirror_unconstrained (dual)");
        x[i] = -1.0 / theta[i];
      }
      break;
    case RegularizerKind::kNegEntropy:
      for (std::size_t i = 0; i < theta.size(); ++i) {
        x[i] = std::exp(theta[i] - 1.0);
      }
      break;
    case RegularizerKind::kHypercubeBarrier:
      for (std::size_t i = 0; i < theta.size(); ++i) {
        x[i] = barrier_radius(theta[i]);
      }
      break;
    case RegularizerKind::kBallBarrier: {
      // x is parallel to theta with |x| = barrier_radius(|theta|), which
      // reduces to theta / (1 + sqrt(1 + |theta|^2)).
      const double scale = 1.0 / (1.0 + std::sqrt(1.0 + squared_norm(theta)));
      for (std::size_t i = 0; i < theta.size(); ++i) x[i] = scale * theta[i];
      break;
    }
  }
  return x;
}

Vec mirror_simplex(const Regularizer& reg, std::span<const double> theta) {
  check_dim(reg, theta.size(), "mirror_simplex");
  if (!reg.is_simplex()) {
    throw DomainError("mirror_simplex: " + reg.name() +
                      " is not a simplex regularizer");
  }
  for (double e : theta) {
    if (!std::isfinite(e)) {
      throw ConvergenceError("mirror_simplex: malformed dual point");
    }
  }
  if (reg.kind() == RegularizerKind::kNegEntropy) return softmax(theta);

  // Only differences lambda - theta_i matter, so solve in shifted
  // coordinates where the largest entry is zero.
  const double top = *std::max_element(theta.begin(), theta.end());
  Vec shifted(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) shifted[i] = theta[i] - top;

  const bool tsallis = reg.kind() == RegularizerKind::kTsallisHalf;
  const double power = tsallis ? 2.0 : 1.0;
  const double arms = static_cast<double>(theta.size());
  const double upper = tsallis ? std::sqrt(arms) : arms;
  const double mu = normalization_root(shifted, power, upper);

  Vec x(theta.size());
  bool clamped = false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    x[i] = std::pow(mu - shifted[i], -power);
    if (!(x[i] >= kUnderflowFloor)) {
      x[i] = kUnderflowFloor;
      clamped = true;
    }
  }
  if (clamped) {
    const std::size_t seen = ++g_underflow_count;
    if (seen <= 10) {
      log_warning("mirror_simplex: coordinate underflow clamped to 1e-300");
    }
  }
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  for (double& e : x) e /= total;
  return x;
}

Vec mirror_map(const Regularizer& reg, std::span<const double> theta) {
  return reg.is_simplex() ? mirror_simplex(reg, theta)
                          : mirror_unconstrained(reg, theta);
}

OmdStep omd_step(const Regularizer& reg, std::span<const double> x,
                 std::span<const double> lhat, double sigma) {
  check_dim(reg, x.size(), "omd_step");
  check_dim(reg, lhat.size(), "omd_step");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("omd_step: sigma must be positive and finite");
  }
  require_finite(lhat, "omd_step");
  if (std::all_of(lhat.begin(), lhat.end(), [](double e) { return e == 0.0; })) {
    Vec copy(x.begin(), x.end());
    return {copy, copy};
  }
  Vec theta = psi_grad(reg, x);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lhat[i] / sigma;
  OmdStep step;
  step.z_unconstrained = mirror_unconstrained(reg, theta);
  step.z = reg.is_simplex() ? mirror_simplex(reg, theta) : step.z_unconstrained;
  return step;
}

Eigensystem barrier_hessian_eigensystem(const Regularizer& reg,
                                        std::span<const double> x) {
  check_dim(reg, x.size(), "barrier_hessian_eigensystem");
  if (!reg.is_barrier()) {
    throw DomainError("barrier_hessian_eigensystem: " + reg.name() +
                      " is not a barrier");
  }
  require_barrier_interior(reg, x, "barrier_hessian_eigensystem");
  const std::size_t n = x.size();
  Eigensystem eig;
  eig.values.resize(n);
  eig.vectors.assign(n, Vec(n, 0.0));

  if (reg.kind() == RegularizerKind::kHypercubeBarrier) {
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = (1.0 - x[i]) * (1.0 + x[i]);
      eig.values[i] = (2.0 + 2.0 * x[i] * x[i]) / (gap * gap);
      eig.vectors[i][i] = 1.0;
    }
    return eig;
  }

  // Ball: 2/(1-r^2) I + 4/(1-r^2)^2 x x^T. Radial eigenvalue
  // (2+2r^2)/(1-r^2)^2, every orthogonal direction 2/(1-r^2).
  const double r2 = squared_norm(x);
  const double gap = 1.0 - r2;
  if (r2 == 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      eig.values[i] = 2.0;
      eig.vectors[i][i] = 1.0;
    }
    return eig;
  }
  const double r = std::sqrt(r2);
  std::vector<Vec> basis;
  basis.reserve(n);
  Vec radial(n);
  for (std::size_t i = 0; i < n; ++i) radial[i] = x[i] / r;
  basis.push_back(radial);
  // Gram-Schmidt over the standard basis, visiting the axes least aligned
  // with the radial direction first.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(radial[a]) < std::abs(radial[b]);
  });
  for (std::size_t axis : order) {
    if (basis.size() == n) break;
    Vec v(n, 0.0);
    v[axis] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& b : basis) {
        const double proj = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i] -= proj * b[i];
      }
    }
    const double norm = std::sqrt(squared_norm(v));
    if (norm < 1e-6) continue;
    for (double& e : v) e /= norm;
    basis.push_back(std::move(v));
  }
  eig.values[0] = (2.0 + 2.0 * r2) / (gap * gap);
  for (std::size_t i = 1; i < n; ++i) eig.values[i] = 2.0 / gap;
  eig.vectors = std::move(basis);
  return eig;
}

std::size_t mirror_underflow_count() { return g_underflow_count.load(); }

}  // namespace banker
