#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "banker/common.hpp"

namespace banker {

enum class RegularizerKind {
  kTsallisHalf,        // -2 sum sqrt(x_i) on the nonnegative orthant
  kLogBarrierSimplex,  // -sum ln x_i on the positive orthant
  kNegEntropy,         // sum x_i ln x_i, the EXP3 regularizer
  kHypercubeBarrier,   // -sum ln(1 - x_i^2) on (-1, 1)^n
  kBallBarrier,        // -ln(1 - |x|^2) on the open unit ball
};

// A Legendre function together with its dimension. The first three kinds
// are used over the probability simplex (with restricted mirror maps), the
// barriers over continuous action sets.
class Regularizer {
 public:
  static Regularizer tsallis_half(std::size_t arms);
  static Regularizer log_barrier_simplex(std::size_t arms);
  static Regularizer neg_entropy(std::size_t arms);
  static Regularizer hypercube_barrier(std::size_t dim);
  static Regularizer ball_barrier(std::size_t dim);

  // Parses "tsallis", "log_barrier", "neg_entropy", "hypercube", "ball".
  static Regularizer from_name(std::string_view name, std::size_t dim);

  RegularizerKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  bool is_simplex() const;
  bool is_barrier() const { return !is_simplex(); }
  std::string name() const;

  // Self-concordance parameter of a barrier (2n for the hypercube, 1 for
  // the ball). DomainError for the simplex regularizers.
  double barrier_parameter() const;

  // Default investment point: uniform for simplex kinds, the analytic
  // center grad Psi*(0) = 0 for barriers.
  Vec default_point() const;

  friend bool operator==(const Regularizer&, const Regularizer&) = default;

 private:
  Regularizer(RegularizerKind kind, std::size_t dim);

  RegularizerKind kind_;
  std::size_t dim_;
};

double psi_value(const Regularizer& reg, std::span<const double> x);
Vec psi_grad(const Regularizer& reg, std::span<const double> x);

// h^T Hess Psi(x) h, evaluated from the closed-form Hessian.
double hessian_quadratic_form(const Regularizer& reg, std::span<const double> x,
                              std::span<const double> h);

// Fenchel conjugate Psi*(theta) of the unrestricted regularizer.
double conjugate_value(const Regularizer& reg, std::span<const double> theta);

// D_Psi(y, x) = Psi(y) - Psi(x) - <grad Psi(x), y - x>.
double bregman(const Regularizer& reg, std::span<const double> y,
               std::span<const double> x);

// grad Psi*(theta), the inverse of grad Psi.
Vec mirror_unconstrained(const Regularizer& reg, std::span<const double> theta);

// grad of the conjugate of Psi restricted to the simplex: the minimizer of
// <-theta, x> + Psi(x) over the simplex. Every output coordinate is > 0.
Vec mirror_simplex(const Regularizer& reg, std::span<const double> theta);

// Constrained mirror map for simplex kinds, unconstrained for barriers.
Vec mirror_map(const Regularizer& reg, std::span<const double> theta);

struct OmdStep {
  Vec z;                // constrained image
  Vec z_unconstrained;  // same dual point through grad Psi*
};

// One mirror-descent step from x with loss estimate lhat at scale sigma.
OmdStep omd_step(const Regularizer& reg, std::span<const double> x,
                 std::span<const double> lhat, double sigma);

struct Eigensystem {
  Vec values;
  std::vector<Vec> vectors;  // vectors[i] pairs with values[i], unit norm
};

Eigensystem barrier_hessian_eigensystem(const Regularizer& reg,
                                        std::span<const double> x);

// Number of mirror_simplex calls that had to clamp an underflowed
// coordinate. Process-wide diagnostic.
std::size_t mirror_underflow_count();

}  // namespace banker
