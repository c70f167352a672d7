#include "banker/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace banker {
namespace {

Regularizer mab_regularizer(const MabConfig& c) {
  RegularizerKind kind = c.algorithm == MabAlgorithm::kSfLbInf
                             ? RegularizerKind::kLogBarrierSimplex
                             : RegularizerKind::kTsallisHalf;
  if (c.regularizer) kind = *c.regularizer;
  switch (kind) {
    case RegularizerKind::kTsallisHalf:
      return Regularizer::tsallis_half(c.arms);
    case RegularizerKind::kLogBarrierSimplex:
      return Regularizer::log_barrier_simplex(c.arms);
    case RegularizerKind::kNegEntropy:
      return Regularizer::neg_entropy(c.arms);
    default:
      throw ConfigError("bandit policies need a simplex regularizer");
  }
}

Regularizer bolo_regularizer(const BoloConfig& c) {
  return c.set == ActionSet::kHypercube ? Regularizer::hypercube_barrier(c.dim)
                                        : Regularizer::ball_barrier(c.dim);
}

LedgerOptions ledger_options(AllocationStrategy strategy, bool spend_skipped,
                             bool record_trace) {
  LedgerOptions o;
  o.strategy = strategy;
  o.spend_skipped_savings = spend_skipped;
  o.record_trace = record_trace;
  return o;
}

template <typename Record>
Record* find_record(std::vector<Record>& history, Round s) {
  auto it = std::lower_bound(
      history.begin(), history.end(), s,
      [](const Record& r, Round round) { return r.round < round; });
  return it != history.end() && it->round == s ? &*it : nullptr;
}

std::vector<FeedbackEvent> sorted_events(std::span<const FeedbackEvent> events) {
  std::vector<FeedbackEvent> out(events.begin(), events.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const FeedbackEvent& a, const FeedbackEvent& b) {
                     return a.round < b.round;
                   });
  return out;
}

bool strictly_inside(std::span<const double> a, ActionSet set) {
  if (set == ActionSet::kHypercube) {
    return std::all_of(a.begin(), a.end(),
                       [](double e) { return std::abs(e) < 1.0; });
  }
  double s = 0.0;
  for (double e : a) s += e * e;
  return s < 1.0;
}

}  // namespace

double log_horizon(Round horizon) {
  return std::log(static_cast<double>(std::max<Round>(horizon, 2)));
}

double tinf_scale(Round t, std::int64_t backlog, double experienced_delay) {
  double inverse = 1.0 / std::sqrt(static_cast<double>(t));
  if (backlog > 0 && experienced_delay > 0.0) {
    inverse += static_cast<double>(backlog) *
               std::sqrt(std::log(experienced_delay + 1.0) / experienced_delay);
  }
  return 1.0 / inverse;
}

double sftinf_scale(std::int64_t backlog, double weighted_delay, double lhat) {
  const double ratio =
      std::log(3.0 + weighted_delay / (lhat * lhat)) / (3.0 + weighted_delay);
  return 1.0 / (static_cast<double>(backlog + 1) * std::sqrt(ratio));
}

SflbinfScale sflbinf_scale(std::int64_t backlog, double weighted_delay,
                           double experienced_delay, double lhat,
                           std::size_t arms, Round horizon, double prefactor) {
  SflbinfScale s;
  const double k = static_cast<double>(arms);
  s.base = prefactor * sftinf_scale(backlog, weighted_delay, lhat) /
           std::sqrt(k * log_horizon(horizon));
  s.guard = static_cast<double>(backlog) <= std::sqrt(experienced_delay / k);
  s.sigma = s.guard ? std::max(s.base, 2.0 * lhat) : s.base;
  return s;
}

BoloScale bolo_scale(Round t, std::int64_t backlog, double experienced_delay,
                     std::size_t dim, Round horizon, double prefactor,
                     bool apply_clamp) {
  const double n = static_cast<double>(dim);
  const double log_t = log_horizon(horizon);
  double inverse = std::sqrt(log_t / (n * static_cast<double>(t)));
  if (backlog > 0 && experienced_delay > 0.0) {
    inverse += static_cast<double>(backlog) *
               std::sqrt(std::log(experienced_delay + 1.0) * log_t /
                         (n * experienced_delay));
  }
  BoloScale s;
  s.base = prefactor / inverse;
  s.sigma = apply_clamp ? std::max(s.base, 8.0 * n) : s.base;
  return s;
}

const char* to_string(MabAlgorithm algorithm) {
  switch (algorithm) {
    case MabAlgorithm::kTinf:
      return "tinf";
    case MabAlgorithm::kSfTinf:
      return "sftinf";
    case MabAlgorithm::kSfLbInf:
      return "sflbinf";
    case MabAlgorithm::kConstantScale:
      return "constant";
  }
  return "unknown";
}

std::size_t sample_arm(std::span<const double> x, double u) {
  double cumulative = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cumulative += x[i];
    if (u < cumulative) return i;
  }
  // Rounding left the total just below u: take the last arm with mass.
  for (std::size_t i = x.size(); i-- > 0;) {
    if (x[i] > 0.0) return i;
  }
  return x.size() - 1;
}

MabPolicy::MabPolicy(MabConfig config, std::uint64_t seed)
    : config_(config),
      reg_(mab_regularizer(config)),
      x0_(reg_.default_point()),
      ledger_(ledger_options(config.allocation, config.spend_skipped_savings,
                             config.record_ledger_trace)),
      rng_(seed) {
  if (config_.horizon < 1) throw ConfigError("horizon must be positive");
  if (config_.algorithm == MabAlgorithm::kConstantScale &&
      !(config_.constant_scale > 0.0)) {
    throw ConfigError("constant scale must be positive");
  }
  if (!(config_.scale_prefactor > 0.0)) {
    throw ConfigError("scale prefactor must be positive");
  }
  if (config_.algorithm == MabAlgorithm::kSfLbInf) experienced_ = 1.0;
}

double MabPolicy::weighted_delay_for_round(Round t, std::int64_t backlog) {
  const double own = static_cast<double>(backlog + 1) * lhat_ * lhat_;
  if (config_.algorithm == MabAlgorithm::kSfTinf) {
    weighted_.add(own);
    return weighted_.value();
  }
  // Missing rounds enter with their decision-time range estimate, arrived
  // rounds with their observed loss; skipped rounds drop out.
  CompensatedSum d;
  d.add(arrived_weighted_.value());
  for (const auto& [s, p] : pending_) {
    if (s < t) d.add(static_cast<double>(p.backlog + 1) * p.lhat * p.lhat);
  }
  d.add(own);
  return d.value();
}

Decision MabPolicy::decide(Round t) {
  if (t <= last_round_) {
    throw OrderError("decide: round " + std::to_string(t) + " after round " +
                     std::to_string(last_round_));
  }
  last_round_ = t;
  const auto backlog = static_cast<std::int64_t>(ledger_.missing_count());
  max_backlog_ = std::max(max_backlog_, backlog);
  experienced_ += static_cast<double>(backlog);

  double sigma = 0.0;
  double weighted = 0.0;
  switch (config_.algorithm) {
    case MabAlgorithm::kTinf:
      sigma = config_.scale_prefactor * tinf_scale(t, backlog, experienced_);
      break;
    case MabAlgorithm::kSfTinf:
      weighted = weighted_delay_for_round(t, backlog);
      sigma = config_.scale_prefactor * sftinf_scale(backlog, weighted, lhat_);
      break;
    case MabAlgorithm::kSfLbInf:
      weighted = weighted_delay_for_round(t, backlog);
      sigma = sflbinf_scale(backlog, weighted, experienced_, lhat_, config_.arms,
                            config_.horizon, config_.scale_prefactor)
                  .sigma;
      break;
    case MabAlgorithm::kConstantScale:
      sigma = config_.constant_scale;
      break;
  }

  const Allocation alloc = ledger_.open_round(t, sigma);
  Vec x = compose_action(reg_, ledger_, alloc, x0_);
  const std::size_t arm = sample_arm(x, rng_.uniform());

  Pending p;
  p.x = x;
  p.arm = arm;
  p.sigma = sigma;
  p.lhat = lhat_;
  p.backlog = backlog;
  pending_.emplace(t, std::move(p));

  if (config_.record_history) {
    MabRoundRecord r;
    r.round = t;
    r.x = x;
    r.arm = arm;
    r.sigma = sigma;
    r.investment = alloc.investment;
    r.backlog = backlog;
    r.experienced_delay = experienced_;
    r.weighted_delay = weighted;
    r.lhat = lhat_;
    history_.push_back(std::move(r));
  }

  Decision d;
  d.round = t;
  d.x = std::move(x);
  d.arm = arm;
  d.sigma = sigma;
  d.investment = alloc.investment;
  d.backlog = backlog;
  return d;
}

Vec mab_estimator(std::span<const double> x, std::size_t arm, double loss) {
  if (arm >= x.size()) throw DomainError("mab_estimator: arm out of range");
  if (!(x[arm] > 0.0)) throw DomainError("mab_estimator: zero probability");
  Vec out(x.size(), 0.0);
  out[arm] = loss / x[arm];
  return out;
}

bool mab_skip(MabAlgorithm algorithm, double loss, double lhat, double sigma) {
  switch (algorithm) {
    case MabAlgorithm::kSfTinf:
      return loss > lhat;
    case MabAlgorithm::kSfLbInf:
      return std::abs(loss) > lhat || loss < -0.5 * sigma;
    default:
      return false;
  }
}

void MabPolicy::ingest(std::span<const FeedbackEvent> events) {
  for (const FeedbackEvent& ev : sorted_events(events)) {
    auto it = pending_.find(ev.round);
    if (it == pending_.end()) {
      throw StateError("ingest: no pending decision for round " +
                       std::to_string(ev.round));
    }
    if (!std::isfinite(ev.loss)) {
      throw DomainError("ingest: non-finite loss for round " +
                        std::to_string(ev.round));
    }
    const Pending p = std::move(it->second);
    pending_.erase(it);
    const double loss = ev.loss;

    if (config_.algorithm == MabAlgorithm::kSfTinf) {
      lhat_ = std::max(lhat_, 2.0 * loss);
    } else if (config_.algorithm == MabAlgorithm::kSfLbInf) {
      lhat_ = std::max(lhat_, 2.0 * std::abs(loss));
    }

    MabRoundRecord* record =
        config_.record_history ? find_record(history_, ev.round) : nullptr;
    if (mab_skip(config_.algorithm, loss, p.lhat, p.sigma)) {
      if (ledger_.options().spend_skipped_savings) {
        ledger_.mark_skipped(ev.round, psi_grad(reg_, p.x), p.x);
      } else {
        ledger_.mark_skipped(ev.round);
      }
      if (record) {
        record->status = SavingStatus::kSkipped;
        record->loss = loss;
        record->estimate = 0.0;
        record->z = p.x;
        record->z_unconstrained = p.x;
      }
      continue;
    }

    const Vec lhat = mab_estimator(p.x, p.arm, loss);
    const double estimate = lhat[p.arm];
    OmdStep step = omd_step(reg_, p.x, lhat, p.sigma);
    ledger_.settle_feedback(ev.round, psi_grad(reg_, step.z), step.z);
    if (config_.algorithm == MabAlgorithm::kSfLbInf) {
      arrived_weighted_.add(static_cast<double>(p.backlog + 1) * loss * loss);
    }
    if (record) {
      record->status = SavingStatus::kArrived;
      record->loss = loss;
      record->estimate = estimate;
      record->z = std::move(step.z);
      record->z_unconstrained = std::move(step.z_unconstrained);
    }
  }
}

Vec bolo_estimator(double loss, std::size_t dim, double sign, double eigenvalue,
                   std::span<const double> eigenvector) {
  const double scale =
      loss * static_cast<double>(dim) * sign * std::sqrt(eigenvalue);
  Vec out(eigenvector.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * eigenvector[i];
  return out;
}

BoloPolicy::BoloPolicy(BoloConfig config, std::uint64_t seed)
    : config_(config),
      reg_(bolo_regularizer(config)),
      x0_(reg_.default_point()),
      ledger_(ledger_options(config.allocation, false, config.record_ledger_trace)),
      rng_(seed) {
  if (config_.horizon < 1) throw ConfigError("horizon must be positive");
  if (!(config_.scale_prefactor > 0.0)) {
    throw ConfigError("scale prefactor must be positive");
  }
}

Decision BoloPolicy::decide(Round t) {
  if (t <= last_round_) {
    throw OrderError("decide: round " + std::to_string(t) + " after round " +
                     std::to_string(last_round_));
  }
  last_round_ = t;
  const auto backlog = static_cast<std::int64_t>(ledger_.missing_count());
  experienced_ += static_cast<double>(backlog);
  const double sigma = bolo_scale(t, backlog, experienced_, config_.dim,
                                  config_.horizon, config_.scale_prefactor,
                                  config_.apply_clamp)
                           .sigma;

  const Allocation alloc = ledger_.open_round(t, sigma);
  Vec x = compose_action(reg_, ledger_, alloc, x0_);
  Eigensystem eig = barrier_hessian_eigensystem(reg_, x);

  const std::size_t n = config_.dim;
  const auto direction = std::min(
      n - 1, static_cast<std::size_t>(rng_.uniform() * static_cast<double>(n)));
  const double sign = rng_.uniform() < 0.5 ? -1.0 : 1.0;
  const double eigenvalue = eig.values[direction];
  Vec& e = eig.vectors[direction];
  Vec action(n);
  const double step = sign / std::sqrt(eigenvalue);
  for (std::size_t i = 0; i < n; ++i) action[i] = x[i] + step * e[i];
  if (!strictly_inside(action, config_.set)) {
    throw DomainError("decide: Dikin sample left the action set at round " +
                      std::to_string(t));
  }

  Pending p;
  p.x = x;
  p.sigma = sigma;
  p.sign = sign;
  p.eigenvalue = eigenvalue;
  p.eigenvector = e;
  pending_.emplace(t, std::move(p));

  if (config_.record_history) {
    BoloRoundRecord r;
    r.round = t;
    r.x = x;
    r.action = action;
    r.sigma = sigma;
    r.investment = alloc.investment;
    r.backlog = backlog;
    r.direction = direction;
    r.sign = sign;
    r.eigenvalue = eigenvalue;
    r.eigenvector = e;
    history_.push_back(std::move(r));
  }

  Decision d;
  d.round = t;
  d.x = std::move(x);
  d.action = std::move(action);
  d.sigma = sigma;
  d.investment = alloc.investment;
  d.backlog = backlog;
  return d;
}

void BoloPolicy::ingest(std::span<const FeedbackEvent> events) {
  for (const FeedbackEvent& ev : sorted_events(events)) {
    auto it = pending_.find(ev.round);
    if (it == pending_.end()) {
      throw StateError("ingest: no pending decision for round " +
                       std::to_string(ev.round));
    }
    if (!std::isfinite(ev.loss)) {
      throw DomainError("ingest: non-finite loss for round " +
                        std::to_string(ev.round));
    }
    const Pending p = std::move(it->second);
    pending_.erase(it);
    Vec estimate =
        bolo_estimator(ev.loss, config_.dim, p.sign, p.eigenvalue, p.eigenvector);
    OmdStep step = omd_step(reg_, p.x, estimate, p.sigma);
    ledger_.settle_feedback(ev.round, psi_grad(reg_, step.z), step.z);
    if (config_.record_history) {
      if (BoloRoundRecord* record = find_record(history_, ev.round)) {
        record->status = SavingStatus::kArrived;
        record->loss = ev.loss;
        record->estimate = std::move(estimate);
        record->z = std::move(step.z);
        record->z_unconstrained = std::move(step.z_unconstrained);
      }
    }
  }
}

UniformMabPolicy::UniformMabPolicy(std::size_t arms, std::uint64_t seed)
    : arms_(arms), rng_(seed) {
  if (arms == 0) throw ConfigError("arms must be positive");
}

Decision UniformMabPolicy::decide(Round t) {
  Decision d;
  d.round = t;
  d.x.assign(arms_, 1.0 / static_cast<double>(arms_));
  d.arm = sample_arm(d.x, rng_.uniform());
  return d;
}

UniformLinearPolicy::UniformLinearPolicy(std::size_t dim, ActionSet set,
                                         std::uint64_t seed)
    : dim_(dim), set_(set), rng_(seed) {
  if (dim == 0) throw ConfigError("dimension must be positive");
}

Decision UniformLinearPolicy::decide(Round t) {
  Decision d;
  d.round = t;
  d.x.assign(dim_, 0.0);
  d.action.assign(dim_, 0.0);
  if (set_ == ActionSet::kHypercube) {
    for (double& a : d.action) a = 2.0 * rng_.uniform() - 1.0;
    return d;
  }
  // Gaussian direction (Box-Muller) with radius U^(1/n).
  double norm = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double u1 = 1.0 - rng_.uniform();
    const double u2 = rng_.uniform();
    d.action[i] = std::sqrt(-2.0 * std::log(u1)) *
                  std::cos(2.0 * std::numbers::pi * u2);
    norm += d.action[i] * d.action[i];
  }
  norm = std::sqrt(norm);
  const double radius =
      std::pow(rng_.uniform(), 1.0 / static_cast<double>(dim_));
  for (double& a : d.action) a = norm > 0.0 ? a / norm * radius : 0.0;
  return d;
}

VanillaTrace vanilla_omd_run(const Regularizer& reg, std::span<const double> x0,
                             double sigma, Environment& env, Round horizon,
                             std::uint64_t seed) {
  if (!env.delay_schedule().is_zero()) {
    throw ConfigError("vanilla mirror descent needs a zero-delay environment");
  }
  if (!reg.is_simplex()) {
    throw ConfigError("vanilla mirror descent runs on the simplex");
  }
  Rng rng(seed);
  VanillaTrace trace;
  Vec x(x0.begin(), x0.end());
  for (Round t = 1; t <= horizon; ++t) {
    env.release(t);
    trace.x.push_back(x);
    const std::size_t arm = sample_arm(x, rng.uniform());
    const double loss = env.play_arm(t, arm);
    trace.arms.push_back(arm);
    trace.losses.push_back(loss);
    Vec lhat(x.size(), 0.0);
    lhat[arm] = loss / x[arm];
    x = omd_step(reg, x, lhat, sigma).z;
  }
  return trace;
}

std::vector<AuditStep> audit_steps(const MabPolicy& policy) {
  const Ledger& ledger = *policy.ledger();
  if (policy.history().size() != ledger.entries().size()) {
    throw StateError("audit_steps: policy history was not recorded");
  }
  std::vector<AuditStep> steps;
  steps.reserve(policy.history().size());
  for (const MabRoundRecord& r : policy.history()) {
    AuditStep s;
    s.x = r.x;
    s.loss_estimate.assign(r.x.size(), 0.0);
    s.sigma = r.sigma;
    s.v_remaining = ledger.entry(r.round).v_remaining;
    if (r.status == SavingStatus::kArrived) {
      s.loss_estimate[r.arm] = r.estimate;
      s.z = r.z;
      s.z_unconstrained = r.z_unconstrained;
    } else {
      s.z = r.x;
      s.z_unconstrained = r.x;
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

std::vector<AuditStep> audit_steps(const BoloPolicy& policy) {
  const Ledger& ledger = *policy.ledger();
  if (policy.history().size() != ledger.entries().size()) {
    throw StateError("audit_steps: policy history was not recorded");
  }
  std::vector<AuditStep> steps;
  steps.reserve(policy.history().size());
  for (const BoloRoundRecord& r : policy.history()) {
    AuditStep s;
    s.x = r.x;
    s.sigma = r.sigma;
    s.v_remaining = ledger.entry(r.round).v_remaining;
    if (r.status == SavingStatus::kArrived) {
      s.loss_estimate = r.estimate;
      s.z = r.z;
      s.z_unconstrained = r.z_unconstrained;
    } else {
      s.loss_estimate.assign(r.x.size(), 0.0);
      s.z = r.x;
      s.z_unconstrained = r.x;
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

}  // namespace banker
