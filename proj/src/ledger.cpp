#include "banker/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace banker {

const char* to_string(SavingStatus status) {
  switch (status) {
    case SavingStatus::kMissing:
      return "missing";
    case SavingStatus::kArrived:
      return "arrived";
    case SavingStatus::kSkipped:
      return "skipped";
  }
  return "unknown";
}

const char* to_string(AllocationStrategy strategy) {
  return strategy == AllocationStrategy::kGreedy ? "greedy" : "proportional";
}

AllocationStrategy allocation_from_name(std::string_view name) {
  if (name == "greedy") return AllocationStrategy::kGreedy;
  if (name == "proportional") return AllocationStrategy::kProportional;
  throw ConfigError("unknown allocation strategy '" + std::string(name) + "'");
}

void CompensatedSum::add(double value) {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

double Allocation::exactness_residual() const {
  CompensatedSum total;
  total.add(investment);
  for (const Spend& s : spends) total.add(s.amount);
  total.add(-sigma);
  return total.value();
}

Ledger::Ledger(LedgerOptions options) : options_(options) {}

Round Ledger::last_round() const {
  return entries_.empty() ? 0 : entries_.back().round;
}

bool Ledger::contains(Round s) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), s,
      [](const SavingEntry& e, Round r) { return e.round < r; });
  return it != entries_.end() && it->round == s;
}

const SavingEntry& Ledger::entry(Round s) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), s,
      [](const SavingEntry& e, Round r) { return e.round < r; });
  if (it == entries_.end() || it->round != s) {
    throw StateError("ledger has no entry for round " + std::to_string(s));
  }
  return *it;
}

SavingEntry& Ledger::mutable_entry(Round s, const char* what) {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), s,
      [](const SavingEntry& e, Round r) { return e.round < r; });
  if (it == entries_.end() || it->round != s) {
    throw StateError(std::string(what) + ": no entry for round " +
                     std::to_string(s));
  }
  return *it;
}

double Ledger::stranded_savings() const {
  CompensatedSum total;
  for (const SavingEntry& e : entries_) {
    if (e.status == SavingStatus::kSkipped) total.add(e.v_remaining);
  }
  return total.value();
}

std::size_t Ledger::stored_dual_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(),
                    [](const SavingEntry& e) { return e.dual_grad.has_value(); }));
}

void Ledger::record_transition(Round s, SavingStatus status) {
  if (options_.record_trace) pending_transitions_.emplace_back(s, status);
}

Allocation Ledger::open_round(Round t, double sigma) {
  if (!entries_.empty() && t <= entries_.back().round) {
    throw OrderError("open_round: round " + std::to_string(t) +
                     " does not follow round " +
                     std::to_string(entries_.back().round));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("open_round: sigma must be positive and finite");
  }
  // Sources exhausted last round were needed by that round's composition;
  // their vectors can go now.
  for (Round r : exhausted_) {
    SavingEntry& e = mutable_entry(r, "open_round");
    e.dual_grad.reset();
    e.point.reset();
  }
  exhausted_.clear();

  Allocation alloc = options_.strategy == AllocationStrategy::kGreedy
                         ? allocate_greedy(t, sigma)
                         : allocate_proportional(t, sigma);

  SavingEntry e;
  e.round = t;
  e.sigma = sigma;
  e.v_remaining = sigma;
  e.investment = alloc.investment;
  entries_.push_back(std::move(e));
  ++missing_count_;
  savings_sum_.add(sigma);
  total_investment_.add(alloc.investment);

  if (options_.record_trace) {
    LedgerTraceRow row;
    row.round = t;
    row.sigma = sigma;
    row.investment = alloc.investment;
    row.total_investment = total_investment();
    row.spends = alloc.spends;
    row.transitions = std::move(pending_transitions_);
    pending_transitions_.clear();
    trace_.push_back(std::move(row));
  }
  return alloc;
}

Allocation Ledger::allocate_greedy(Round t, double sigma) {
  Allocation alloc;
  alloc.round = t;
  alloc.sigma = sigma;
  CompensatedSum spent;
  double need = sigma;
  bool covered = false;
  for (auto it = spendable_.begin(); it != spendable_.end() && !covered;) {
    SavingEntry& e = mutable_entry(*it, "allocate");
    // A source holding at least the residual need closes the allocation;
    // b_t is then exactly zero whatever the rounding in the running sum.
    covered = e.v_remaining >= need;
    const double take = covered ? need : e.v_remaining;
    if (take > 0.0) {
      alloc.spends.push_back({e.round, take});
      e.v_remaining -= take;
      spent.add(take);
      savings_sum_.add(-take);
    }
    if (e.v_remaining <= 0.0) {
      e.v_remaining = 0.0;
      exhausted_.push_back(e.round);
      it = spendable_.erase(it);
    } else {
      ++it;
    }
    need = sigma - spent.value();
    if (!(need > 0.0)) covered = true;
  }
  alloc.investment = covered ? 0.0 : std::max(0.0, sigma - spent.value());
  return alloc;
}

Allocation Ledger::allocate_proportional(Round t, double sigma) {
  Allocation alloc;
  alloc.round = t;
  alloc.sigma = sigma;
  CompensatedSum available;
  for (Round r : active_) available.add(mutable_entry(r, "allocate").v_remaining);
  const double v = available.value();
  if (active_.empty() || !(v > 0.0)) {
    alloc.investment = sigma;
    return alloc;
  }

  if (v <= sigma) {
    for (Round r : active_) {
      SavingEntry& e = mutable_entry(r, "allocate");
      if (!(e.v_remaining > 0.0)) continue;
      alloc.spends.push_back({r, e.v_remaining});
      savings_sum_.add(-e.v_remaining);
      e.v_remaining = 0.0;
    }
    alloc.pooled_dual = pooled_dual_;
    alloc.investment = sigma - v;
    active_.clear();
    std::fill(pooled_dual_.begin(), pooled_dual_.end(), 0.0);
    pooled_savings_ = 0.0;
    return alloc;
  }

  const double fraction = sigma / v;
  CompensatedSum spent;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    SavingEntry& e = mutable_entry(active_[i], "allocate");
    double amount = i + 1 == active_.size() ? sigma - spent.value()
                                            : fraction * e.v_remaining;
    amount = std::clamp(amount, 0.0, e.v_remaining);
    if (amount <= 0.0) continue;
    alloc.spends.push_back({e.round, amount});
    spent.add(amount);
    e.v_remaining -= amount;
    savings_sum_.add(-amount);
  }
  Vec used(pooled_dual_.size());
  for (std::size_t i = 0; i < used.size(); ++i) {
    used[i] = fraction * pooled_dual_[i];
    pooled_dual_[i] -= used[i];
  }
  pooled_savings_ = v - spent.value();
  alloc.pooled_dual = std::move(used);
  // Savings exceed the scale, so nothing is invested; any clamp above only
  // trims a rounding-level excess.
  alloc.investment = 0.0;
  return alloc;
}

void Ledger::make_spendable(SavingEntry& e) {
  if (options_.strategy == AllocationStrategy::kGreedy) {
    if (e.v_remaining > 0.0) spendable_.insert(e.round);
    return;
  }
  if (e.dual_grad) {
    if (pooled_dual_.empty()) pooled_dual_.assign(e.dual_grad->size(), 0.0);
    if (pooled_dual_.size() != e.dual_grad->size()) {
      throw DomainError("settle_feedback: dual dimension mismatch");
    }
    for (std::size_t i = 0; i < pooled_dual_.size(); ++i) {
      pooled_dual_[i] += e.v_remaining * (*e.dual_grad)[i];
    }
    pooled_savings_ += e.v_remaining;
    active_.push_back(e.round);
  }
  e.dual_grad.reset();
  e.point.reset();
}

void Ledger::settle_feedback(Round s, Vec dual_grad, std::optional<Vec> point) {
  SavingEntry& e = mutable_entry(s, "settle_feedback");
  if (e.status != SavingStatus::kMissing) {
    throw StateError("settle_feedback: round " + std::to_string(s) + " is " +
                     to_string(e.status));
  }
  e.status = SavingStatus::kArrived;
  e.resolved_after = last_round();
  e.dual_grad = std::move(dual_grad);
  e.point = std::move(point);
  --missing_count_;
  record_transition(s, SavingStatus::kArrived);
  make_spendable(e);
}

void Ledger::mark_skipped(Round s, std::optional<Vec> dual_grad,
                          std::optional<Vec> point) {
  SavingEntry& e = mutable_entry(s, "mark_skipped");
  if (e.status != SavingStatus::kMissing) {
    throw StateError("mark_skipped: round " + std::to_string(s) + " is " +
                     to_string(e.status));
  }
  e.status = SavingStatus::kSkipped;
  e.resolved_after = last_round();
  --missing_count_;
  ++skipped_count_;
  record_transition(s, SavingStatus::kSkipped);
  if (options_.spend_skipped_savings) {
    e.dual_grad = std::move(dual_grad);
    e.point = std::move(point);
    make_spendable(e);
  }
}

Vec compose_action(const Regularizer& reg, const Ledger& ledger,
                   const Allocation& alloc, std::span<const double> x0) {
  if (alloc.spends.empty()) return Vec(x0.begin(), x0.end());

  Vec theta(reg.dim(), 0.0);
  if (ledger.strategy() == AllocationStrategy::kProportional) {
    if (!alloc.pooled_dual) {
      throw MissingDualError("compose_action: allocation for round " +
                             std::to_string(alloc.round) +
                             " carries no pooled dual");
    }
    theta = *alloc.pooled_dual;
  } else {
    for (const Spend& s : alloc.spends) {
      const SavingEntry& e = ledger.entry(s.source);
      if (!e.dual_grad) {
        throw MissingDualError("compose_action: round " +
                               std::to_string(s.source) +
                               " has no stored dual gradient");
      }
    }
    // One source covering the whole scale: the average is grad Psi(z_s),
    // whose image is z_s itself.
    if (alloc.spends.size() == 1 && alloc.investment == 0.0) {
      const SavingEntry& e = ledger.entry(alloc.spends.front().source);
      if (e.point) return *e.point;
    }
    for (const Spend& s : alloc.spends) {
      const Vec& g = *ledger.entry(s.source).dual_grad;
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += s.amount * g[i];
    }
  }
  if (alloc.investment > 0.0) {
    const Vec g0 = psi_grad(reg, x0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] += alloc.investment * g0[i];
    }
  }
  for (double& e : theta) e /= alloc.sigma;
  return mirror_map(reg, theta);
}

Lemma2Check lemma2_decomposition(const Ledger& ledger) {
  Lemma2Check check;
  check.lhs = ledger.total_investment();
  const auto entries = ledger.entries();
  auto last = std::find_if(entries.rbegin(), entries.rend(),
                           [](const SavingEntry& e) { return e.investment > 0.0; });
  if (last == entries.rend()) return check;
  check.t0 = last->round;
  CompensatedSum rhs;
  rhs.add(last->sigma);
  for (const SavingEntry& e : entries) {
    if (e.round >= check.t0) break;
    const bool arrived_in_time = e.status == SavingStatus::kArrived &&
                                 e.resolved_after && *e.resolved_after < check.t0;
    if (!arrived_in_time) rhs.add(e.sigma);
  }
  check.rhs = rhs.value();
  return check;
}

AuditRecord theorem_audit(const Regularizer& reg, std::span<const double> x0,
                          double total_investment,
                          std::span<const AuditStep> steps,
                          std::span<const double> y) {
  AuditRecord record;
  if (steps.empty() && total_investment == 0.0) return record;
  CompensatedSum lhs;
  CompensatedSum rhs;
  rhs.add(total_investment * bregman(reg, y, x0));
  for (const AuditStep& s : steps) {
    double inner = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      inner += s.loss_estimate[i] * (s.x[i] - y[i]);
    }
    lhs.add(inner);
    rhs.add(s.sigma * bregman(reg, s.x, s.z_unconstrained));
    rhs.add(-s.v_remaining * bregman(reg, y, s.z));
  }
  record.lhs = lhs.value();
  record.rhs = rhs.value();
  return record;
}

}  // namespace banker
