#include "banker/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "banker/algorithms.hpp"
#include "banker/environment.hpp"
#include "banker/harness.hpp"
#include "banker/rng.hpp"

namespace banker {
namespace {

// Accumulates normalized slacks for one property.
class Tracker {
 public:
  Tracker(std::string name, double tolerance) {
    result_.name = std::move(name);
    result_.tolerance = tolerance;
    result_.worst_slack = std::numeric_limits<double>::infinity();
  }

  // Checks value <= bound.
  void le(double value, double bound, const std::string& what) {
    const double slack = (bound - value) / std::max(1.0, std::abs(bound));
    record(std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack,
           what);
  }

  // Checks |a - b| <= tolerance after normalization by max(1, |b|).
  void equal(double a, double b, const std::string& what) {
    // + 0.0 keeps an exact match printing as 0 rather than -0.
    const double slack = -std::abs(a - b) / std::max(1.0, std::abs(b)) + 0.0;
    record(std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack,
           what);
  }

  void fail(const std::string& what) {
    record(-std::numeric_limits<double>::infinity(), what);
  }

  PropertyResult finish() {
    if (result_.checks == 0) result_.worst_slack = 0.0;
    return result_;
  }

 private:
  void record(double slack, const std::string& what) {
    ++result_.checks;
    if (slack < result_.worst_slack) result_.worst_slack = slack;
    if (slack < -result_.tolerance && result_.passed) {
      result_.passed = false;
      std::ostringstream os;
      os << what << " (slack " << slack << ")";
      result_.detail = os.str();
    }
  }

  PropertyResult result_;
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  const auto span = static_cast<double>(hi - lo + 1);
  return std::min(hi, lo + static_cast<std::size_t>(rng.uniform() * span));
}

double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform();
}

// Random simplex point mixed with uniform so it stays strictly interior.
Vec random_simplex(Rng& rng, std::size_t k, double mix = 0.02) {
  Vec x(k);
  double total = 0.0;
  for (double& e : x) {
    e = -std::log1p(-rng.uniform());
    total += e;
  }
  for (double& e : x) e = (1.0 - mix) * e / total + mix / static_cast<double>(k);
  return x;
}

Vec random_cube(Rng& rng, std::size_t n, double radius) {
  Vec x(n);
  for (double& e : x) e = radius * (2.0 * rng.uniform() - 1.0);
  return x;
}

Vec random_ball(Rng& rng, std::size_t n, double radius) {
  Vec x(n);
  double norm2 = 0.0;
  for (double& e : x) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    e = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    norm2 += e * e;
  }
  const double r =
      radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n)) / std::sqrt(norm2);
  for (double& e : x) e *= r;
  return x;
}

Vec random_point(const Regularizer& reg, Rng& rng) {
  switch (reg.kind()) {
    case RegularizerKind::kHypercubeBarrier:
      return random_cube(rng, reg.dim(), 0.9);
    case RegularizerKind::kBallBarrier:
      return random_ball(rng, reg.dim(), 0.9);
    default:
      return random_simplex(rng, reg.dim());
  }
}

std::vector<Regularizer> all_regularizers(std::size_t dim) {
  return {Regularizer::tsallis_half(dim), Regularizer::log_barrier_simplex(dim),
          Regularizer::neg_entropy(dim), Regularizer::hypercube_barrier(dim),
          Regularizer::ball_barrier(dim)};
}

std::string at(const Regularizer& reg, std::size_t i) {
  return reg.name() + " instance " + std::to_string(i);
}

PropertyResult bregman_nonnegativity() {
  Tracker tr("geometry.bregman_nonnegativity", 1e-12);
  Rng rng(101);
  for (std::size_t dim = 1; dim <= 6; ++dim) {
    for (const Regularizer& reg : all_regularizers(dim)) {
      for (std::size_t i = 0; i < 200; ++i) {
        Vec y = random_point(reg, rng);
        // The Tsallis value is finite on the boundary, so vertices are valid.
        if (reg.kind() == RegularizerKind::kTsallisHalf && i % 10 == 0) {
          std::fill(y.begin(), y.end(), 0.0);
          y[uniform_index(rng, 0, dim - 1)] = 1.0;
        }
        const Vec x = random_point(reg, rng);
        tr.le(-bregman(reg, y, x), 0.0, at(reg, i));
      }
    }
  }
  return tr.finish();
}

PropertyResult mirror_roundtrip() {
  Tracker tr("geometry.mirror_roundtrip", 1e-9);
  Rng rng(102);
  for (std::size_t dim = 1; dim <= 8; ++dim) {
    for (const Regularizer& reg : all_regularizers(dim)) {
      for (std::size_t i = 0; i < 200; ++i) {
        const Vec x = random_point(reg, rng);
        const Vec g = psi_grad(reg, x);
        const Vec back = mirror_unconstrained(reg, g);
        for (std::size_t j = 0; j < dim; ++j) tr.equal(back[j], x[j], at(reg, i));
        if (reg.is_simplex()) {
          const Vec proj = mirror_simplex(reg, g);
          for (std::size_t j = 0; j < dim; ++j) {
            tr.equal(proj[j], x[j], at(reg, i) + " (simplex)");
          }
        }
      }
    }
  }
  return tr.finish();
}

PropertyResult duality() {
  Tracker tr("geometry.duality", 1e-8);
  Rng rng(103);
  for (std::size_t dim = 1; dim <= 6; ++dim) {
    for (const Regularizer& reg : all_regularizers(dim)) {
      for (std::size_t i = 0; i < 200; ++i) {
        const Vec y = random_point(reg, rng);
        const Vec x = random_point(reg, rng);
        const Vec gx = psi_grad(reg, x);
        const Vec gy = psi_grad(reg, y);
        // D*(a, b) with a = grad Psi(x), b = grad Psi(y); grad Psi*(b) = y.
        Vec diff(dim);
        for (std::size_t j = 0; j < dim; ++j) diff[j] = gx[j] - gy[j];
        const double dual =
            conjugate_value(reg, gx) - conjugate_value(reg, gy) - dot(y, diff);
        tr.equal(dual, bregman(reg, y, x), at(reg, i));
      }
    }
  }
  return tr.finish();
}

PropertyResult gradient_check() {
  Tracker tr("geometry.gradient_check", 1e-5);
  Rng rng(104);
  const double h = 1e-6;
  for (std::size_t dim = 1; dim <= 6; ++dim) {
    for (const Regularizer& reg : all_regularizers(dim)) {
      for (std::size_t i = 0; i < 100; ++i) {
        const Vec x = random_point(reg, rng);
        const Vec g = psi_grad(reg, x);
        for (std::size_t j = 0; j < dim; ++j) {
          Vec plus = x;
          Vec minus = x;
          plus[j] += h;
          minus[j] -= h;
          const double fd = (psi_value(reg, plus) - psi_value(reg, minus)) / (2 * h);
          tr.equal(fd, g[j], at(reg, i));
        }
      }
    }
  }
  return tr.finish();
}

PropertyResult tsallis_immediate_cost() {
  Tracker tr("geometry.tsallis_immediate_cost", 1e-12);
  Rng rng(105);
  for (std::size_t i = 0; i < 2000; ++i) {
    const std::size_t k = uniform_index(rng, 2, 10);
    const Regularizer reg = Regularizer::tsallis_half(k);
    const Vec x = random_simplex(rng, k, 0.01);
    const double scale = uniform_in(rng, 0.1, 5.0);
    Vec l(k);
    for (double& e : l) e = scale * rng.uniform();
    const double sigma = uniform_in(rng, 0.2, 30.0);
    // Exact expectation over the played arm.
    double expected = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const OmdStep step = omd_step(reg, x, mab_estimator(x, a, l[a]), sigma);
      expected += x[a] * sigma * bregman(reg, x, step.z_unconstrained);
    }
    const double linf = *std::max_element(l.begin(), l.end());
    tr.le(expected, std::sqrt(static_cast<double>(k)) * linf * linf / sigma,
          "instance " + std::to_string(i));
  }
  return tr.finish();
}

PropertyResult log_barrier_immediate_cost() {
  Tracker tr("geometry.log_barrier_immediate_cost", 1e-12);
  Rng rng(106);
  for (std::size_t i = 0; i < 2000; ++i) {
    const std::size_t k = uniform_index(rng, 2, 10);
    const Regularizer reg = Regularizer::log_barrier_simplex(k);
    const Vec x = random_simplex(rng, k, 0.01);
    const double sigma = uniform_in(rng, 0.2, 30.0);
    const std::size_t a = uniform_index(rng, 0, k - 1);
    const double loss = uniform_in(rng, -0.5 * sigma, 2.0 * sigma);
    const OmdStep step = omd_step(reg, x, mab_estimator(x, a, loss), sigma);
    const std::string what = "instance " + std::to_string(i);
    for (std::size_t j = 0; j < k; ++j) {
      tr.le(step.z_unconstrained[j], 2.0 * x[j], what + " (2x condition)");
    }
    tr.le(sigma * bregman(reg, x, step.z_unconstrained), 2.0 * loss * loss / sigma,
          what);
  }
  return tr.finish();
}

// ---- ledger ----------------------------------------------------------------

struct MabTrace {
  std::unique_ptr<MabPolicy> policy;
  std::unique_ptr<Environment> env;
};

struct BoloTrace {
  std::unique_ptr<BoloPolicy> policy;
  std::unique_ptr<Environment> env;
};

template <typename P>
void drive(P& policy, Environment& env, Round horizon, bool linear, bool drain) {
  for (Round t = 1; t <= horizon; ++t) {
    policy.ingest(env.release(t));
    const Decision d = policy.decide(t);
    if (linear) {
      env.play_point(t, d.action);
    } else {
      env.play_arm(t, d.arm);
    }
  }
  if (drain) policy.ingest(env.drain());
}

std::vector<std::int64_t> random_delays(Rng& rng, Round horizon, std::int64_t max_delay) {
  std::vector<std::int64_t> d(static_cast<std::size_t>(horizon));
  for (auto& e : d) {
    const double u = rng.uniform();
    e = static_cast<std::int64_t>(u * u * static_cast<double>(max_delay + 1));
    e = std::min(e, max_delay);
  }
  return d;
}

std::vector<Vec> random_matrix(Rng& rng, Round horizon, std::size_t k) {
  std::vector<Vec> rows(static_cast<std::size_t>(horizon), Vec(k));
  Vec bias(k);
  for (double& b : bias) b = rng.uniform();
  for (Vec& r : rows) {
    for (std::size_t i = 0; i < k; ++i) {
      r[i] = std::clamp(bias[i] + 0.4 * (rng.uniform() - 0.5), 0.0, 1.0);
    }
  }
  return rows;
}

MabTrace mab_trace(MabAlgorithm algorithm, std::size_t k, Round horizon,
                   LossModel loss, DelaySchedule delays, AllocationStrategy strategy,
                   bool spend_skipped, std::uint64_t seed) {
  MabConfig c;
  c.algorithm = algorithm;
  c.arms = k;
  c.horizon = horizon;
  c.allocation = strategy;
  c.record_history = true;
  c.spend_skipped_savings = spend_skipped;
  MabTrace tr;
  tr.policy = std::make_unique<MabPolicy>(c, seed);
  tr.env = std::make_unique<Environment>(std::move(loss), std::move(delays));
  return tr;
}

}  // namespace

PropertyResult check_lemma1(RegularizerKind kind, std::size_t instances,
                            std::size_t comparators, std::uint64_t seed) {
  Tracker tr(std::string("geometry.lemma1.") +
                 (kind == RegularizerKind::kTsallisHalf ? "tsallis" : "log_barrier"),
             1e-8);
  Rng rng(seed);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t k = uniform_index(rng, 2, 8);
    const Regularizer reg = kind == RegularizerKind::kTsallisHalf
                                ? Regularizer::tsallis_half(k)
                                : Regularizer::log_barrier_simplex(k);
    const Vec x0 = reg.default_point();
    const auto strategy =
        i % 2 == 0 ? AllocationStrategy::kGreedy : AllocationStrategy::kProportional;
    Ledger ledger(LedgerOptions{strategy, false, false});
    const std::size_t h = uniform_index(rng, 1, 5);
    std::map<Round, Vec> z;
    double available = 0.0;
    for (std::size_t s = 1; s <= h; ++s) {
      const double sigma = uniform_in(rng, 0.1, 5.0);
      ledger.open_round(static_cast<Round>(s), sigma);
      Vec zs = random_simplex(rng, k, 0.005);
      ledger.settle_feedback(static_cast<Round>(s), psi_grad(reg, zs), zs);
      z.emplace(static_cast<Round>(s), std::move(zs));
      available += sigma;
    }
    // Opening round h+1 also spends savings; only the final allocation is
    // audited.
    const double sigma = uniform_in(rng, 0.3, 1.3) * available;
    const Allocation alloc = ledger.open_round(static_cast<Round>(h + 1), sigma);
    const Vec x = compose_action(reg, ledger, alloc, x0);
    for (std::size_t c = 0; c < comparators; ++c) {
      const Vec y = random_simplex(rng, k, 0.001);
      double rhs = alloc.investment * bregman(reg, y, x0);
      for (const Spend& sp : alloc.spends) rhs += sp.amount * bregman(reg, y, z.at(sp.source));
      tr.le(alloc.sigma * bregman(reg, y, x), rhs, "instance " + std::to_string(i));
    }
  }
  return tr.finish();
}

LedgerStreamResults check_ledger_streams(std::size_t streams, Round rounds,
                                         AllocationStrategy strategy,
                                         bool spend_skipped_savings,
                                         std::uint64_t seed) {
  const std::string prefix = "ledger.";
  Tracker exact(prefix + "allocation_exactness", 1e-12);
  Tracker greedy(prefix + "greedy_optimality", 1e-12);
  Tracker balance(prefix + "balance_identity", 1e-9);
  Tracker lemma2(prefix + "lemma2", 1e-9);
  Rng rng(seed);
  const Regularizer reg = Regularizer::tsallis_half(3);
  for (std::size_t stream = 0; stream < streams; ++stream) {
    Ledger ledger(LedgerOptions{strategy, spend_skipped_savings, false});
    const auto n = static_cast<std::size_t>(rounds);
    Vec sigmas(n + 1, 0.0);
    std::vector<Round> arrival(n + 1, 0);  // round at whose start s resolved
    std::vector<char> arrived(n + 1, 0);
    std::multimap<Round, Round> pending;  // release round -> s
    CompensatedSum sigma_sum;
    CompensatedSum spent;
    CompensatedSum arrived_unspent;  // independent count of spendable savings
    Round t0 = 0;
    const double skip_rate = 0.1;
    const std::string where = "stream " + std::to_string(stream);
    for (Round t = 1; t <= rounds; ++t) {
      for (auto it = pending.begin(); it != pending.end() && it->first <= t;
           it = pending.erase(it)) {
        const Round s = it->second;
        arrival[static_cast<std::size_t>(s)] = t;
        Vec z = random_simplex(rng, 3, 0.01);
        if (rng.uniform() < skip_rate) {
          if (spend_skipped_savings) {
            ledger.mark_skipped(s, psi_grad(reg, z), z);
            arrived_unspent.add(sigmas[static_cast<std::size_t>(s)]);
          } else {
            ledger.mark_skipped(s);
          }
        } else {
          Vec grad = psi_grad(reg, z);
          ledger.settle_feedback(s, std::move(grad), std::move(z));
          arrived[static_cast<std::size_t>(s)] = 1;
          arrived_unspent.add(sigmas[static_cast<std::size_t>(s)]);
        }
      }
      const double sigma = uniform_in(rng, 0.1, 10.0);
      sigmas[static_cast<std::size_t>(t)] = sigma;
      sigma_sum.add(sigma);
      const Allocation alloc = ledger.open_round(t, sigma);
      exact.equal(alloc.exactness_residual(), 0.0,
                  where + " round " + std::to_string(t));
      for (const Spend& sp : alloc.spends) {
        if (!(sp.amount > 0.0)) exact.fail(where + ": nonpositive spend");
        spent.add(sp.amount);
        arrived_unspent.add(-sp.amount);
      }
      if (alloc.investment > 0.0) {
        t0 = t;
        greedy.le(arrived_unspent.value(), 0.0, where + " round " + std::to_string(t));
      }
      // B_t against sum sigma - sum spends, both tracked outside the ledger.
      balance.equal(ledger.total_investment(), sigma_sum.value() - spent.value(),
                    where + " round " + std::to_string(t));
      const std::int64_t d = static_cast<std::int64_t>(
          std::pow(rng.uniform(), 3.0) * 40.0);
      pending.emplace(t + d + 1, t);
    }
    if (t0 > 0) {
      CompensatedSum rhs;
      rhs.add(sigmas[static_cast<std::size_t>(t0)]);
      for (Round s = 1; s < t0; ++s) {
        const auto i = static_cast<std::size_t>(s);
        const bool in_time = arrived[i] && arrival[i] != 0 && arrival[i] <= t0;
        if (!in_time) rhs.add(sigmas[i]);
      }
      lemma2.equal(ledger.total_investment(), rhs.value(), where);
      const Lemma2Check check = lemma2_decomposition(ledger);
      lemma2.equal(check.lhs, check.rhs, where + " (ledger evaluation)");
    }
  }
  return {exact.finish(), greedy.finish(), balance.finish(), lemma2.finish()};
}

namespace {

// Lemma 2 on policy traces: SFTINF with hidden range and delays skips often.
void lemma2_on_policy_traces(Tracker& tr, bool spend_skipped) {
  Rng rng(207);
  for (std::size_t i = 0; i < 8; ++i) {
    const std::size_t k = uniform_index(rng, 2, 6);
    const Round horizon = 400;
    const auto base = LossModel::matrix(random_matrix(rng, horizon, k));
    const double range = 20.0 + 30.0 * rng.uniform();
    auto trace = mab_trace(
        MabAlgorithm::kSfTinf, k, horizon, LossModel::scale_free(base, range, false),
        DelaySchedule::per_round(random_delays(rng, horizon, 15)),
        i % 2 == 0 ? AllocationStrategy::kGreedy : AllocationStrategy::kProportional,
        spend_skipped, 9000 + i);
    drive(*trace.policy, *trace.env, horizon, false, false);
    const Ledger& ledger = *trace.policy->ledger();
    const Lemma2Check check = lemma2_decomposition(ledger);
    const std::string where = "sftinf trace " + std::to_string(i);
    if (ledger.skipped_count() == 0) tr.fail(where + ": no skips exercised");
    tr.equal(check.lhs, check.rhs, where);
  }
}

PropertyResult theorem_audit_property() {
  AuditTraceSpec spec;
  return check_theorem_audit(spec, 301);
}

}  // namespace

PropertyResult check_theorem_audit(const AuditTraceSpec& spec, std::uint64_t seed) {
  Tracker tr("ledger.theorem_audit", 1e-6);
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.traces; ++i) {
    const std::size_t variant = i % 5;
    const std::size_t k = uniform_index(rng, 2, std::max<std::size_t>(2, spec.max_arms));
    const Round horizon =
        static_cast<Round>(uniform_index(rng, 20, static_cast<std::size_t>(spec.max_horizon)));
    const auto delays =
        DelaySchedule::per_round(random_delays(rng, horizon, spec.max_delay));
    const auto strategy =
        i % 2 == 0 ? AllocationStrategy::kGreedy : AllocationStrategy::kProportional;
    const std::uint64_t policy_seed = derive_stream_seed(seed, i);
    const std::string where = "trace " + std::to_string(i);

    std::vector<AuditStep> steps;
    Regularizer reg = Regularizer::tsallis_half(k);
    Vec x0;
    double total_investment = 0.0;
    try {
      if (variant < 3) {
        const auto base = LossModel::matrix(random_matrix(rng, horizon, k));
        MabAlgorithm algorithm = MabAlgorithm::kTinf;
        LossModel loss = base;
        if (variant == 1) {
          algorithm = MabAlgorithm::kSfTinf;
          loss = LossModel::scale_free(base, uniform_in(rng, 0.5, 20.0), false);
        } else if (variant == 2) {
          algorithm = MabAlgorithm::kSfLbInf;
          loss = LossModel::scale_free(base, uniform_in(rng, 0.5, 20.0), true);
        }
        auto trace = mab_trace(algorithm, k, horizon, std::move(loss), delays,
                               strategy, false, policy_seed);
        drive(*trace.policy, *trace.env, horizon, false, true);
        steps = audit_steps(*trace.policy);
        reg = trace.policy->regularizer();
        x0 = trace.policy->default_action();
        total_investment = trace.policy->ledger()->total_investment();
      } else {
        const ActionSet set = variant == 3 ? ActionSet::kHypercube : ActionSet::kBall;
        const std::size_t n = std::min<std::size_t>(k, 5);
        Vec mean = set == ActionSet::kHypercube ? random_cube(rng, n, 1.0)
                                                : random_ball(rng, n, 0.8);
        if (set == ActionSet::kHypercube) {
          double l1 = 0.0;
          for (double e : mean) l1 += std::abs(e);
          for (double& e : mean) e *= 0.7 / l1;
        }
        auto loss = LossModel::linear_stochastic(mean, 0.2, policy_seed, set);
        BoloConfig c;
        c.dim = n;
        c.horizon = horizon;
        c.set = set;
        c.allocation = strategy;
        c.record_history = true;
        BoloPolicy policy(c, policy_seed);
        Environment env(std::move(loss), delays);
        drive(policy, env, horizon, true, true);
        steps = audit_steps(policy);
        reg = policy.regularizer();
        x0 = policy.default_action();
        total_investment = policy.ledger()->total_investment();
      }
    } catch (const Error& e) {
      tr.fail(where + ": " + e.what());
      continue;
    }
    for (std::size_t c = 0; c < spec.comparators; ++c) {
      const Vec y = random_point(reg, rng);
      const AuditRecord rec = theorem_audit(reg, x0, total_investment, steps, y);
      const double scale = std::max({1.0, std::abs(rec.lhs), std::abs(rec.rhs)});
      tr.le(rec.lhs / scale, rec.rhs / scale, where + " (" + reg.name() + ")");
    }
  }
  return tr.finish();
}

PropertyResult check_mab_estimator(std::size_t states, std::uint64_t seed) {
  Tracker tr("algorithms.mab_estimator_unbiased", 1e-12);
  Rng rng(seed);
  const MabAlgorithm variants[] = {MabAlgorithm::kTinf, MabAlgorithm::kSfTinf,
                                   MabAlgorithm::kSfLbInf,
                                   MabAlgorithm::kConstantScale};
  for (std::size_t i = 0; i < states; ++i) {
    const MabAlgorithm algorithm = variants[i % 4];
    const std::size_t k = uniform_index(rng, 2, 10);
    const Vec x = random_simplex(rng, k, 0.01);
    const double lhat = uniform_in(rng, 0.5, 3.0);
    const double sigma = uniform_in(rng, 0.5, 6.0);
    Vec l(k);
    for (double& e : l) {
      e = algorithm == MabAlgorithm::kSfLbInf ? uniform_in(rng, -3.5, 3.5)
          : algorithm == MabAlgorithm::kSfTinf ? uniform_in(rng, 0.0, 3.5)
                                               : rng.uniform();
    }
    Vec expected(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
      if (mab_skip(algorithm, l[a], lhat, sigma)) continue;
      const Vec est = mab_estimator(x, a, l[a]);
      for (std::size_t j = 0; j < k; ++j) expected[j] += x[a] * est[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double target = mab_skip(algorithm, l[j], lhat, sigma) ? 0.0 : l[j];
      tr.equal(expected[j], target, "state " + std::to_string(i));
    }
  }
  return tr.finish();
}

PropertyResult check_bolo_estimator(std::size_t states, std::uint64_t seed) {
  Tracker tr("algorithms.bolo_estimator_unbiased", 1e-12);
  Rng rng(seed);
  for (std::size_t i = 0; i < states; ++i) {
    const std::size_t n = uniform_index(rng, 1, 6);
    const bool cube = i % 2 == 0;
    const Regularizer reg =
        cube ? Regularizer::hypercube_barrier(n) : Regularizer::ball_barrier(n);
    const Vec x = random_point(reg, rng);
    Vec l = cube ? random_cube(rng, n, 1.0) : random_ball(rng, n, 1.0);
    if (cube) {
      double l1 = 0.0;
      for (double e : l) l1 += std::abs(e);
      if (l1 > 1.0) {
        for (double& e : l) e /= l1;
      }
    }
    const Eigensystem eig = barrier_hessian_eigensystem(reg, x);
    Vec average(n, 0.0);
    for (std::size_t dir = 0; dir < n; ++dir) {
      for (double sign : {-1.0, 1.0}) {
        Vec action(n);
        const double step = sign / std::sqrt(eig.values[dir]);
        for (std::size_t j = 0; j < n; ++j) action[j] = x[j] + step * eig.vectors[dir][j];
        const Vec est =
            bolo_estimator(dot(l, action), n, sign, eig.values[dir], eig.vectors[dir]);
        for (std::size_t j = 0; j < n; ++j) {
          average[j] += est[j] / static_cast<double>(2 * n);
        }
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      tr.equal(average[j], l[j], "state " + std::to_string(i));
    }
  }
  return tr.finish();
}

namespace {

PropertyResult sftinf_immediate_cost() {
  Tracker tr("algorithms.sftinf_immediate_cost", 1e-9);
  Rng rng(401);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t k = uniform_index(rng, 2, 8);
    const Round horizon = 500;
    const auto base = LossModel::matrix(random_matrix(rng, horizon, k));
    auto trace = mab_trace(MabAlgorithm::kSfTinf, k, horizon,
                           LossModel::scale_free(base, uniform_in(rng, 0.5, 50.0), false),
                           DelaySchedule::per_round(random_delays(rng, horizon, 10)),
                           AllocationStrategy::kGreedy, false, 4100 + i);
    drive(*trace.policy, *trace.env, horizon, false, true);
    const Regularizer& reg = trace.policy->regularizer();
    for (const MabRoundRecord& r : trace.policy->history()) {
      if (r.status != SavingStatus::kArrived) continue;
      const double lhs = r.sigma * bregman(reg, r.x, r.z_unconstrained);
      const double rhs = (*r.loss) * (*r.loss) / std::sqrt(r.x[r.arm]) / r.sigma;
      tr.le(lhs, rhs, "trace " + std::to_string(i) + " round " + std::to_string(r.round));
    }
  }
  return tr.finish();
}

PropertyResult sflbinf_safety() {
  Tracker tr("algorithms.sflbinf_safety", 1e-12);
  Rng rng(402);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t k = uniform_index(rng, 2, 8);
    const Round horizon = 600;
    const auto base = LossModel::matrix(random_matrix(rng, horizon, k));
    auto trace = mab_trace(MabAlgorithm::kSfLbInf, k, horizon,
                           LossModel::scale_free(base, uniform_in(rng, 0.5, 80.0), true),
                           DelaySchedule::per_round(random_delays(rng, horizon, 12)),
                           i % 2 ? AllocationStrategy::kProportional
                                 : AllocationStrategy::kGreedy,
                           false, 4200 + i);
    const std::string where = "trace " + std::to_string(i);
    try {
      drive(*trace.policy, *trace.env, horizon, false, true);
    } catch (const DomainError& e) {
      tr.fail(where + ": " + e.what());
      continue;
    }
    for (const MabRoundRecord& r : trace.policy->history()) {
      if (r.status != SavingStatus::kArrived) continue;
      const std::string w = where + " round " + std::to_string(r.round);
      tr.le(-0.5 * r.sigma, *r.loss, w + " (loss >= -sigma/2)");
      tr.le(r.z_unconstrained[r.arm], 2.0 * r.x[r.arm], w + " (z~ <= 2x)");
    }
  }
  return tr.finish();
}

PropertyResult sftinf_skip_budget() {
  Tracker tr("algorithms.sftinf_skip_budget", 0.0);
  Rng rng(403);
  std::size_t i = 0;
  for (double range : {2.0, 10.0, 100.0}) {
    for (std::int64_t d : {0, 5, 20}) {
      const std::size_t k = 5;
      const Round horizon = 1500;
      Vec means(k);
      for (double& m : means) m = rng.uniform();
      auto trace = mab_trace(
          MabAlgorithm::kSfTinf, k, horizon,
          LossModel::scale_free(LossModel::bernoulli(means, 4300 + i), range, false),
          DelaySchedule::uniform(d), AllocationStrategy::kGreedy, false, 4400 + i);
      drive(*trace.policy, *trace.env, horizon, false, false);
      const double budget =
          (std::ceil(std::log2(4.0 * range)) + 1.0) *
          static_cast<double>(trace.policy->max_backlog() + 1);
      tr.le(static_cast<double>(trace.policy->skip_count()), budget,
            "L=" + format_double(range) + " d=" + std::to_string(d));
      ++i;
    }
  }
  return tr.finish();
}

PropertyResult bolo_clamp(bool drop_clamp) {
  Tracker tr("algorithms.bolo_clamp", 0.0);
  Rng rng(404);
  std::size_t i = 0;
  for (ActionSet set : {ActionSet::kHypercube, ActionSet::kBall}) {
    for (std::size_t n : {1, 2, 4}) {
      for (std::int64_t d : {0, 10}) {
        const Round horizon = 800;
        Vec mean = random_ball(rng, n, 0.5);
        BoloConfig c;
        c.dim = n;
        c.horizon = horizon;
        c.set = set;
        c.apply_clamp = !drop_clamp;
        c.record_history = true;
        BoloPolicy policy(c, 4500 + i);
        Environment env(LossModel::linear_stochastic(mean, 0.3, 4600 + i, set),
                        DelaySchedule::uniform(d));
        const std::string where = std::string(to_string(set)) + " n=" +
                                  std::to_string(n) + " d=" + std::to_string(d);
        try {
          drive(policy, env, horizon, true, false);
        } catch (const DomainError& e) {
          tr.fail(where + ": " + e.what());
          continue;
        }
        for (const BoloRoundRecord& r : policy.history()) {
          tr.le(8.0 * static_cast<double>(n), r.sigma, where + " (sigma >= 8n)");
          double outside = 0.0;  // > 0 when A leaves the open set
          if (set == ActionSet::kHypercube) {
            for (double a : r.action) outside = std::max(outside, std::abs(a) - 1.0 + 1e-15);
          } else {
            outside = std::sqrt(dot(r.action, r.action)) - 1.0 + 1e-15;
          }
          tr.le(outside, 0.0, where + " (A strictly inside)");
        }
        ++i;
      }
    }
  }
  return tr.finish();
}

std::string serialize(const RunRecord& r) {
  std::ostringstream os;
  os << r.seed << ';' << format_double(r.total_investment) << ';' << r.skip_count
     << ';' << r.total_delay << ';' << format_double(r.loss_square_sum) << ';'
     << format_double(r.regret) << '\n';
  for (const RoundRow& row : r.rows) {
    os << row.t << ',' << row.x_hash << ',' << row.arm << ',' << row.action_hash
       << ',' << format_double(row.loss) << ',' << row.observed << ','
       << format_double(row.sigma) << ',' << format_double(row.investment) << ','
       << format_double(row.total_investment) << ',' << row.backlog << ','
       << row.skipped << '\n';
  }
  return os.str();
}

PropertyResult determinism() {
  Tracker tr("algorithms.determinism", 0.0);
  const char* configs[] = {
      R"({"schema_version":1,"algorithm":{"name":"tinf","arms":4,"horizon":300},
          "environment":{"loss":{"kind":"bernoulli","means":[0.2,0.5,0.5,0.6],"seed":3},
                         "delay":{"kind":"uniform","d":4}},
          "runs":2,"master_seed":11})",
      R"({"schema_version":1,"algorithm":{"name":"sflbinf","arms":3,"horizon":300,
          "allocation":"proportional"},
          "environment":{"loss":{"kind":"scale_free","multiplier":7,"signed":true,
                                  "base":{"kind":"bernoulli","means":[0.3,0.5,0.7],"seed":5}},
                         "delay":{"kind":"geometric","p":0.3,"seed":9}},
          "runs":2,"master_seed":12})",
      R"({"schema_version":1,"algorithm":{"name":"bolo","dim":3,"horizon":300},
          "environment":{"loss":{"kind":"linear_stochastic","mean":[0.2,-0.1,0.3],
                                  "noise":0.2,"seed":4,"action_set":"ball"},
                         "delay":{"kind":"uniform","d":3}},
          "runs":2,"master_seed":13})"};
  for (const char* text : configs) {
    const ExperimentConfig config = parse_config(nlohmann::json::parse(text));
    for (std::size_t run = 0; run < config.runs; ++run) {
      const std::string a = serialize(run_single(config, run));
      const std::string b = serialize(run_single(config, run));
      if (a != b) {
        tr.fail(config.algorithm.name + " run " + std::to_string(run) + " differs");
      } else {
        tr.le(0.0, 0.0, config.algorithm.name);
      }
    }
  }
  return tr.finish();
}

// ---- environment -----------------------------------------------------------

struct ScheduleCase {
  std::string name;
  DelaySchedule schedule;
};

std::vector<ScheduleCase> schedule_cases(Rng& rng, Round horizon, std::size_t k) {
  std::vector<std::vector<std::int64_t>> matrix(static_cast<std::size_t>(horizon),
                                                std::vector<std::int64_t>(k));
  for (auto& row : matrix) {
    for (auto& e : row) e = static_cast<std::int64_t>(rng.uniform() * 15.0);
  }
  return {{"zero", DelaySchedule::zero()},
          {"uniform", DelaySchedule::uniform(3)},
          {"per_round", DelaySchedule::per_round(random_delays(rng, horizon, 25))},
          {"arm_dependent", DelaySchedule::arm_dependent(std::move(matrix))},
          {"geometric", DelaySchedule::geometric(0.15, 77, 10 * horizon)}};
}

PropertyResult release_timing() {
  Tracker tr("environment.release_timing", 0.0);
  Rng rng(501);
  const Round horizon = 400;
  const std::size_t k = 3;
  const auto model = LossModel::bernoulli({0.2, 0.5, 0.8}, 21);
  for (const ScheduleCase& sc : schedule_cases(rng, horizon, k)) {
    Environment env(model, sc.schedule);
    std::vector<std::size_t> arms(static_cast<std::size_t>(horizon) + 1);
    std::vector<int> seen(static_cast<std::size_t>(horizon) + 1, 0);
    auto check = [&](const std::vector<FeedbackEvent>& events, Round now, bool drained) {
      for (std::size_t e = 0; e < events.size(); ++e) {
        const FeedbackEvent& ev = events[e];
        const auto s = static_cast<std::size_t>(ev.round);
        ++seen[s];
        const std::int64_t d = sc.schedule.delay(ev.round, arms[s]);
        const Round expected = ev.round + d + 1;
        if (drained) {
          if (expected <= horizon) tr.fail(sc.name + ": drained an overdue event");
        } else if (now - ev.round - 1 != d) {
          tr.fail(sc.name + ": round " + std::to_string(ev.round) + " released at " +
                  std::to_string(now));
        }
        if (env.release_round(ev.round) != expected) tr.fail(sc.name + ": release_round");
        if (ev.loss != model.arm_loss(ev.round, arms[s])) tr.fail(sc.name + ": loss");
        if (e > 0 && events[e - 1].round >= ev.round) tr.fail(sc.name + ": order");
        tr.le(0.0, 0.0, sc.name);
      }
    };
    for (Round t = 1; t <= horizon; ++t) {
      check(env.release(t), t, false);
      const std::size_t arm = uniform_index(rng, 0, k - 1);
      arms[static_cast<std::size_t>(t)] = arm;
      env.play_arm(t, arm);
    }
    check(env.drain(), horizon + 1, true);
    for (Round s = 1; s <= horizon; ++s) {
      if (seen[static_cast<std::size_t>(s)] != 1) {
        tr.fail(sc.name + ": round " + std::to_string(s) + " released " +
                std::to_string(seen[static_cast<std::size_t>(s)]) + " times");
      }
    }
  }
  return tr.finish();
}

PropertyResult delay_accounting() {
  Tracker tr("environment.delay_accounting", 0.0);
  Rng rng(502);
  const Round horizon = 400;
  const std::size_t k = 3;
  const auto model = LossModel::bernoulli({0.2, 0.5, 0.8}, 22);
  for (const ScheduleCase& sc : schedule_cases(rng, horizon, k)) {
    Environment env(model, sc.schedule);
    std::int64_t from_log = 0;
    for (Round t = 1; t <= horizon; ++t) {
      env.release(t);
      const std::size_t arm = uniform_index(rng, 0, k - 1);
      env.play_arm(t, arm);
      from_log += sc.schedule.delay(t, arm);
    }
    std::int64_t realized = 0;
    for (std::int64_t d : env.realized_delays()) realized += d;
    tr.equal(static_cast<double>(env.total_delay()), static_cast<double>(from_log),
             sc.name + " (action log)");
    tr.equal(static_cast<double>(realized), static_cast<double>(from_log),
             sc.name + " (realized)");
  }
  return tr.finish();
}

PropertyResult summation_lemma() {
  Tracker tr("environment.summation_lemma", 1e-12);
  Rng rng(503);
  for (std::size_t i = 0; i < 500; ++i) {
    const std::size_t len = uniform_index(rng, 1, 400);
    const double scale = std::pow(10.0, uniform_in(rng, -3.0, 3.0));
    CompensatedSum total;
    CompensatedSum lhs;
    for (std::size_t t = 0; t < len; ++t) {
      const double u = rng.uniform();
      const double x = u < 0.2 ? 0.0 : scale * u * u * u;
      total.add(x);
      lhs.add(x / std::sqrt(1.0 + total.value()));
    }
    tr.le(lhs.value(), 2.0 * std::sqrt(1.0 + total.value()),
          "sequence " + std::to_string(i));
  }
  return tr.finish();
}

using PropertyFn = std::function<std::vector<PropertyResult>(const VerifyOptions&)>;

struct PropertyGroup {
  std::vector<std::string> names;
  PropertyFn run;
};

std::vector<PropertyResult> one(PropertyResult r) { return {std::move(r)}; }

PropertyResult merge(std::string name, const std::vector<PropertyResult>& parts) {
  PropertyResult out;
  out.name = std::move(name);
  out.worst_slack = std::numeric_limits<double>::infinity();
  for (const PropertyResult& p : parts) {
    out.tolerance = std::max(out.tolerance, p.tolerance);
    out.checks += p.checks;
    out.worst_slack = std::min(out.worst_slack, p.worst_slack);
    if (!p.passed && out.passed) {
      out.passed = false;
      out.detail = p.detail;
    }
  }
  if (out.checks == 0) out.worst_slack = 0.0;
  return out;
}

std::vector<PropertyGroup> registry() {
  std::vector<PropertyGroup> g;
  g.push_back({{"geometry.bregman_nonnegativity"},
               [](const VerifyOptions&) { return one(bregman_nonnegativity()); }});
  g.push_back({{"geometry.mirror_roundtrip"},
               [](const VerifyOptions&) { return one(mirror_roundtrip()); }});
  g.push_back({{"geometry.duality"}, [](const VerifyOptions&) { return one(duality()); }});
  g.push_back({{"geometry.gradient_check"},
               [](const VerifyOptions&) { return one(gradient_check()); }});
  g.push_back({{"geometry.lemma1"}, [](const VerifyOptions&) {
                 return one(merge(
                     "geometry.lemma1",
                     {check_lemma1(RegularizerKind::kTsallisHalf, 200, 50, 111),
                      check_lemma1(RegularizerKind::kLogBarrierSimplex, 200, 50, 112)}));
               }});
  g.push_back({{"geometry.tsallis_immediate_cost"},
               [](const VerifyOptions&) { return one(tsallis_immediate_cost()); }});
  g.push_back({{"geometry.log_barrier_immediate_cost"},
               [](const VerifyOptions&) { return one(log_barrier_immediate_cost()); }});
  g.push_back(
      {{"ledger.allocation_exactness", "ledger.greedy_optimality",
        "ledger.balance_identity", "ledger.lemma2"},
       [](const VerifyOptions& o) {
         const auto greedy = check_ledger_streams(3, 20000, AllocationStrategy::kGreedy,
                                                  o.spend_skipped_savings, 201);
         const auto prop = check_ledger_streams(3, 20000,
                                                AllocationStrategy::kProportional,
                                                o.spend_skipped_savings, 202);
         Tracker traces("ledger.lemma2", 1e-9);
         lemma2_on_policy_traces(traces, o.spend_skipped_savings);
         return std::vector<PropertyResult>{
             merge("ledger.allocation_exactness", {greedy.exactness, prop.exactness}),
             merge("ledger.greedy_optimality",
                   {greedy.greedy_optimality, prop.greedy_optimality}),
             merge("ledger.balance_identity", {greedy.balance, prop.balance}),
             merge("ledger.lemma2", {greedy.lemma2, prop.lemma2, traces.finish()})};
       }});
  g.push_back({{"ledger.theorem_audit"},
               [](const VerifyOptions&) { return one(theorem_audit_property()); }});
  g.push_back({{"algorithms.mab_estimator_unbiased"},
               [](const VerifyOptions&) { return one(check_mab_estimator(1000, 601)); }});
  g.push_back({{"algorithms.bolo_estimator_unbiased"},
               [](const VerifyOptions&) { return one(check_bolo_estimator(1000, 602)); }});
  g.push_back({{"algorithms.sftinf_immediate_cost"},
               [](const VerifyOptions&) { return one(sftinf_immediate_cost()); }});
  g.push_back({{"algorithms.sflbinf_safety"},
               [](const VerifyOptions&) { return one(sflbinf_safety()); }});
  g.push_back({{"algorithms.sftinf_skip_budget"},
               [](const VerifyOptions&) { return one(sftinf_skip_budget()); }});
  g.push_back({{"algorithms.bolo_clamp"},
               [](const VerifyOptions& o) { return one(bolo_clamp(o.drop_bolo_clamp)); }});
  g.push_back({{"algorithms.determinism"},
               [](const VerifyOptions&) { return one(determinism()); }});
  g.push_back({{"environment.release_timing"},
               [](const VerifyOptions&) { return one(release_timing()); }});
  g.push_back({{"environment.delay_accounting"},
               [](const VerifyOptions&) { return one(delay_accounting()); }});
  g.push_back({{"environment.summation_lemma"},
               [](const VerifyOptions&) { return one(summation_lemma()); }});
  return g;
}

bool matches(const std::string& name, const std::string& filter) {
  return filter.empty() || name.find(filter) != std::string::npos;
}

}  // namespace

std::vector<std::string> property_names() {
  std::vector<std::string> names;
  for (const PropertyGroup& g : registry()) {
    names.insert(names.end(), g.names.begin(), g.names.end());
  }
  return names;
}

std::vector<PropertyResult> run_verify(const VerifyOptions& options) {
  std::vector<PropertyResult> out;
  bool any = false;
  for (const PropertyGroup& g : registry()) {
    const bool wanted = std::any_of(g.names.begin(), g.names.end(), [&](const auto& n) {
      return matches(n, options.filter);
    });
    if (!wanted) continue;
    any = true;
    std::vector<PropertyResult> results;
    try {
      results = g.run(options);
    } catch (const std::exception& e) {
      for (const std::string& n : g.names) {
        PropertyResult r;
        r.name = n;
        r.passed = false;
        r.worst_slack = -std::numeric_limits<double>::infinity();
        r.detail = std::string("exception: ") + e.what();
        results.push_back(r);
      }
    }
    for (PropertyResult& r : results) {
      if (matches(r.name, options.filter)) out.push_back(std::move(r));
    }
  }
  if (!any) throw ConfigError("no property matches '" + options.filter + "'");
  return out;
}

bool write_report(const std::vector<PropertyResult>& results, std::ostream& out) {
  bool all = true;
  for (const PropertyResult& r : results) {
    all = all && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "  checks=" << r.checks
        << "  worst_slack=" << format_double(r.worst_slack)
        << "  tolerance=" << format_double(r.tolerance);
    if (!r.passed) out << "  first_failure: " << r.detail;
    out << '\n';
  }
  out << (all ? "all properties passed" : "some properties FAILED") << '\n';
  return all;
}

}  // namespace banker
