#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "banker/geometry.hpp"
#include "banker/ledger.hpp"

namespace banker {

// Slack convention: each check reports (bound - value) / max(1, |bound|);
// a property passes when its worst slack is >= -tolerance.
struct PropertyResult {
  std::string name;
  bool passed = true;
  double worst_slack = 0.0;
  double tolerance = 0.0;
  std::size_t checks = 0;
  std::string detail;  // first failure, if any
};

struct VerifyOptions {
  std::string filter;  // substring of property names; empty runs all
  // Mutation hooks. Each one is expected to make a specific property fail.
  bool spend_skipped_savings = false;
  bool drop_bolo_clamp = false;
};

std::vector<std::string> property_names();

// Runs the matching properties in a fixed order with fixed seeds.
// ConfigError if the filter matches nothing.
std::vector<PropertyResult> run_verify(const VerifyOptions& options);

// One line per property; returns true when all passed.
bool write_report(const std::vector<PropertyResult>& results, std::ostream& out);

// Parametrized checks shared with the acceptance binary.

// sigma D(y, x_t) <= sum sigma_{t,s} D(y, z_s) + b_t D(y, x0) for random
// ledgers of up to five savings composed by compose_action.
PropertyResult check_lemma1(RegularizerKind kind, std::size_t instances,
                            std::size_t comparators, std::uint64_t seed);

struct AuditTraceSpec {
  std::size_t traces = 10;
  std::size_t max_arms = 8;
  Round max_horizon = 200;
  std::int64_t max_delay = 20;
  std::size_t comparators = 20;
};
// Theorem audit over random delayed traces of every Banker policy.
PropertyResult check_theorem_audit(const AuditTraceSpec& spec, std::uint64_t seed);

// Synthetic settle/skip/allocate streams. Checks allocation exactness at
// every round, greedy optimality, the balance identity and, at the end of
// every stream, the last-investment decomposition.
struct LedgerStreamResults {
  PropertyResult exactness;
  PropertyResult greedy_optimality;
  PropertyResult balance;
  PropertyResult lemma2;
};
LedgerStreamResults check_ledger_streams(std::size_t streams, Round rounds,
                                         AllocationStrategy strategy,
                                         bool spend_skipped_savings,
                                         std::uint64_t seed);

// Closed-form expectation of the estimators over every outcome.
PropertyResult check_mab_estimator(std::size_t states, std::uint64_t seed);
PropertyResult check_bolo_estimator(std::size_t states, std::uint64_t seed);

}  // namespace banker
