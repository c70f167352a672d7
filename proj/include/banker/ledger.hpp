#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "banker/common.hpp"
#include "banker/geometry.hpp"

namespace banker {

enum class SavingStatus { kMissing, kArrived, kSkipped };
enum class AllocationStrategy { kGreedy, kProportional };

const char* to_string(SavingStatus status);
const char* to_string(AllocationStrategy strategy);
AllocationStrategy allocation_from_name(std::string_view name);

struct SavingEntry {
  Round round = 0;
  double sigma = 0.0;
  double v_remaining = 0.0;
  double investment = 0.0;  // b_t paid when this round was opened
  SavingStatus status = SavingStatus::kMissing;
  // Greedy keeps grad Psi(z_s) and z_s while the entry still has savings.
  // Proportional folds the gradient into a pooled vector instead.
  std::optional<Vec> dual_grad;
  std::optional<Vec> point;
  // Last round opened before the status left Missing (0 if never opened).
  std::optional<Round> resolved_after;
};

struct Spend {
  Round source = 0;
  double amount = 0.0;

  friend bool operator==(const Spend&, const Spend&) = default;
};

struct Allocation {
  Round round = 0;
  double sigma = 0.0;
  double investment = 0.0;
  std::vector<Spend> spends;
  // Proportional only: sum_s sigma_{t,s} grad Psi(z_s) for this allocation.
  std::optional<Vec> pooled_dual;

  // b_t + sum of spends - sigma_t, evaluated with compensated summation.
  double exactness_residual() const;
};

struct LedgerOptions {
  AllocationStrategy strategy = AllocationStrategy::kGreedy;
  // Mutation hook for the property suite: lets skipped savings be spent.
  bool spend_skipped_savings = false;
  bool record_trace = false;
};

struct LedgerTraceRow {
  Round round = 0;
  double sigma = 0.0;
  double investment = 0.0;
  double total_investment = 0.0;
  std::vector<Spend> spends;
  // Status changes recorded since the previous round was opened.
  std::vector<std::pair<Round, SavingStatus>> transitions;
};

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

class Ledger {
 public:
  explicit Ledger(LedgerOptions options = {});

  // Creates a Missing entry for round t and splits sigma into savings
  // spends and an investment.
  Allocation open_round(Round t, double sigma);

  void settle_feedback(Round s, Vec dual_grad, std::optional<Vec> point = {});
  void mark_skipped(Round s, std::optional<Vec> dual_grad = {},
                    std::optional<Vec> point = {});

  const SavingEntry& entry(Round s) const;
  bool contains(Round s) const;
  std::span<const SavingEntry> entries() const { return entries_; }

  AllocationStrategy strategy() const { return options_.strategy; }
  const LedgerOptions& options() const { return options_; }
  Round last_round() const;

  double total_investment() const { return total_investment_.value(); }
  // Sum of all v_s; equals total_investment up to rounding at every instant.
  double savings_sum() const { return savings_sum_.value(); }
  double balance_residual() const { return total_investment() - savings_sum(); }
  // Savings frozen in skipped entries. Not part of any investment figure.
  double stranded_savings() const;
  std::size_t missing_count() const { return missing_count_; }
  std::size_t skipped_count() const { return skipped_count_; }
  // Entries currently holding a gradient vector (memory diagnostic).
  std::size_t stored_dual_count() const;
  const std::vector<LedgerTraceRow>& trace() const { return trace_; }

 private:
  friend Vec compose_action(const Regularizer&, const Ledger&,
                            const Allocation&, std::span<const double>);

  SavingEntry& mutable_entry(Round s, const char* what);
  void make_spendable(SavingEntry& e);
  Allocation allocate_greedy(Round t, double sigma);
  Allocation allocate_proportional(Round t, double sigma);
  void record_transition(Round s, SavingStatus status);

  LedgerOptions options_;
  std::vector<SavingEntry> entries_;  // ascending by round
  std::set<Round> spendable_;         // greedy: positive-v spendable entries
  std::vector<Round> exhausted_;      // greedy: duals released lazily
  std::vector<Round> active_;         // proportional: pooled contributors
  Vec pooled_dual_;                   // proportional: sum v_s grad Psi(z_s)
  double pooled_savings_ = 0.0;
  CompensatedSum total_investment_;
  CompensatedSum savings_sum_;
  std::size_t missing_count_ = 0;
  std::size_t skipped_count_ = 0;
  std::vector<LedgerTraceRow> trace_;
  std::vector<std::pair<Round, SavingStatus>> pending_transitions_;
};

// x_t from the allocation: the mirror image of the sigma-weighted average of
// the consumed savings' gradients and the investment's grad Psi(x0).
// Constrained map for simplex regularizers, unconstrained for barriers.
Vec compose_action(const Regularizer& reg, const Ledger& ledger,
                   const Allocation& alloc, std::span<const double> x0);

struct Lemma2Check {
  double lhs = 0.0;  // B_T
  double rhs = 0.0;  // sigma_{T0} + savings of rounds before T0 not arrived by T0
  Round t0 = 0;      // last round with positive investment, 0 if none
  double gap() const { return lhs - rhs; }
};

// Evaluates the last-investment decomposition of B_T on the ledger's
// recorded entries. Skipped entries count as never arrived.
Lemma2Check lemma2_decomposition(const Ledger& ledger);

struct AuditStep {
  Vec x;
  Vec loss_estimate;
  double sigma = 0.0;
  Vec z_unconstrained;
  Vec z;
  double v_remaining = 0.0;
};

struct AuditRecord {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack() const { return rhs - lhs; }
};

// Per-sample-path regret bound: sum <l~_t, x_t - y> against
// B_T D(y, x0) + sum sigma_t D(x_t, z~_t) - sum v_t D(y, z_t).
// Rounds without an estimator enter with l~ = 0 and z = z~ = x.
AuditRecord theorem_audit(const Regularizer& reg, std::span<const double> x0,
                          double total_investment,
                          std::span<const AuditStep> steps,
                          std::span<const double> y);

}  // namespace banker
