#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "banker/common.hpp"
#include "banker/environment.hpp"
#include "banker/geometry.hpp"
#include "banker/ledger.hpp"
#include "banker/rng.hpp"

namespace banker {

// ln T with T clamped to at least 2 so a one-round horizon stays finite.
double log_horizon(Round horizon);

// (1/sqrt(t) + backlog * sqrt(ln(D+1)/D))^-1 with the delay term 0 when the
// backlog is 0.
double tinf_scale(Round t, std::int64_t backlog, double experienced_delay);

// ((backlog+1) * sqrt(ln(3 + D/L^2) / (3 + D)))^-1.
double sftinf_scale(std::int64_t backlog, double weighted_delay, double lhat);

struct SflbinfScale {
  double base = 0.0;
  bool guard = false;  // backlog <= sqrt(experienced / K)
  double sigma = 0.0;
};
// prefactor multiplies the base before the guarded max with 2 L.
SflbinfScale sflbinf_scale(std::int64_t backlog, double weighted_delay,
                           double experienced_delay, double lhat,
                           std::size_t arms, Round horizon,
                           double prefactor = 1.0);

struct BoloScale {
  double base = 0.0;
  double sigma = 0.0;
};
BoloScale bolo_scale(Round t, std::int64_t backlog, double experienced_delay,
                     std::size_t dim, Round horizon, double prefactor = 1.0,
                     bool apply_clamp = true);

enum class MabAlgorithm { kTinf, kSfTinf, kSfLbInf, kConstantScale };

const char* to_string(MabAlgorithm algorithm);

// Importance-weighted estimate (loss / x[arm]) on the played arm.
Vec mab_estimator(std::span<const double> x, std::size_t arm, double loss);

// Skip predicate of the scale-free variants, evaluated with the range
// estimate and scale recorded when the round was decided. Always false for
// TINF and constant scale.
bool mab_skip(MabAlgorithm algorithm, double loss, double lhat, double sigma);

// Inverse CDF in ascending arm order from a single uniform draw.
std::size_t sample_arm(std::span<const double> x, double u);

// What a policy committed to at round t.
struct Decision {
  Round round = 0;
  Vec x;                // distribution over arms, or the mean point
  std::size_t arm = 0;  // bandit policies
  Vec action;           // linear policies
  double sigma = 0.0;
  double investment = 0.0;
  std::int64_t backlog = 0;
};

// Decide/ingest state machine. Policies never see the loss model; all
// information arrives through ingest().
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(Round t) = 0;
  virtual void ingest(std::span<const FeedbackEvent> events) = 0;
  virtual bool is_linear() const = 0;
  // Ledger behind a Banker policy; null for baselines.
  virtual const Ledger* ledger() const { return nullptr; }
};

struct MabConfig {
  MabAlgorithm algorithm = MabAlgorithm::kTinf;
  std::size_t arms = 2;
  Round horizon = 1;
  // Defaults: Tsallis for TINF, SFTINF and constant scale; log-barrier for
  // SFLBINF.
  std::optional<RegularizerKind> regularizer;
  double scale_prefactor = 1.0;
  double constant_scale = 1.0;
  AllocationStrategy allocation = AllocationStrategy::kGreedy;
  bool record_history = true;
  bool record_ledger_trace = false;
  bool spend_skipped_savings = false;  // mutation hook
};

struct MabRoundRecord {
  Round round = 0;
  Vec x;
  std::size_t arm = 0;
  double sigma = 0.0;
  double investment = 0.0;
  std::int64_t backlog = 0;
  double experienced_delay = 0.0;  // running sum of backlogs
  double weighted_delay = 0.0;     // D_t of the scale-free variants
  double lhat = 1.0;               // range estimate used at decision time
  SavingStatus status = SavingStatus::kMissing;
  std::optional<double> loss;
  double estimate = 0.0;  // importance-weighted value on `arm`, 0 if skipped
  Vec z;                  // filled once feedback is processed
  Vec z_unconstrained;
};

class MabPolicy final : public Policy {
 public:
  MabPolicy(MabConfig config, std::uint64_t seed);

  Decision decide(Round t) override;
  void ingest(std::span<const FeedbackEvent> events) override;
  bool is_linear() const override { return false; }
  const Ledger* ledger() const override { return &ledger_; }

  const MabConfig& config() const { return config_; }
  const Regularizer& regularizer() const { return reg_; }
  const Vec& default_action() const { return x0_; }
  double range_estimate() const { return lhat_; }
  double experienced_delay() const { return experienced_; }
  std::size_t skip_count() const { return ledger_.skipped_count(); }
  std::int64_t max_backlog() const { return max_backlog_; }
  // Empty unless record_history is set.
  const std::vector<MabRoundRecord>& history() const { return history_; }

 private:
  struct Pending {
    Vec x;
    std::size_t arm = 0;
    double sigma = 0.0;
    double lhat = 1.0;
    std::int64_t backlog = 0;
  };

  double weighted_delay_for_round(Round t, std::int64_t backlog);

  MabConfig config_;
  Regularizer reg_;
  Vec x0_;
  Ledger ledger_;
  Rng rng_;
  Round last_round_ = 0;
  double lhat_ = 1.0;
  double experienced_ = 0.0;
  CompensatedSum weighted_;          // SFTINF running D_t
  CompensatedSum arrived_weighted_;  // SFLBINF arrived part of D_t
  std::int64_t max_backlog_ = 0;
  std::map<Round, Pending> pending_;
  std::vector<MabRoundRecord> history_;
};

struct BoloConfig {
  std::size_t dim = 1;
  Round horizon = 1;
  ActionSet set = ActionSet::kHypercube;
  double scale_prefactor = 1.0;
  AllocationStrategy allocation = AllocationStrategy::kGreedy;
  bool apply_clamp = true;  // false is a mutation hook
  bool record_history = true;
  bool record_ledger_trace = false;
};

struct BoloRoundRecord {
  Round round = 0;
  Vec x;
  Vec action;
  double sigma = 0.0;
  double investment = 0.0;
  std::int64_t backlog = 0;
  std::size_t direction = 0;  // i_t
  double sign = 1.0;          // epsilon_t
  double eigenvalue = 0.0;    // lambda_{t, i_t}
  Vec eigenvector;            // e_{t, i_t}
  SavingStatus status = SavingStatus::kMissing;
  std::optional<double> loss;
  Vec estimate;
  Vec z;
  Vec z_unconstrained;
};

// One-point estimator on the Dikin ellipsoid:
// loss * n * sign * sqrt(eigenvalue) * eigenvector.
Vec bolo_estimator(double loss, std::size_t dim, double sign, double eigenvalue,
                   std::span<const double> eigenvector);

class BoloPolicy final : public Policy {
 public:
  BoloPolicy(BoloConfig config, std::uint64_t seed);

  Decision decide(Round t) override;
  void ingest(std::span<const FeedbackEvent> events) override;
  bool is_linear() const override { return true; }
  const Ledger* ledger() const override { return &ledger_; }

  const BoloConfig& config() const { return config_; }
  const Regularizer& regularizer() const { return reg_; }
  const Vec& default_action() const { return x0_; }
  const std::vector<BoloRoundRecord>& history() const { return history_; }

 private:
  struct Pending {
    Vec x;
    double sigma = 0.0;
    double sign = 1.0;
    double eigenvalue = 0.0;
    Vec eigenvector;
  };

  BoloConfig config_;
  Regularizer reg_;
  Vec x0_;
  Ledger ledger_;
  Rng rng_;
  Round last_round_ = 0;
  double experienced_ = 0.0;
  std::map<Round, Pending> pending_;
  std::vector<BoloRoundRecord> history_;
};

// Uniform distribution over arms every round.
class UniformMabPolicy final : public Policy {
 public:
  UniformMabPolicy(std::size_t arms, std::uint64_t seed);
  Decision decide(Round t) override;
  void ingest(std::span<const FeedbackEvent>) override {}
  bool is_linear() const override { return false; }

 private:
  std::size_t arms_;
  Rng rng_;
};

// Uniform point of the action set every round; its expected action is the
// origin.
class UniformLinearPolicy final : public Policy {
 public:
  UniformLinearPolicy(std::size_t dim, ActionSet set, std::uint64_t seed);
  Decision decide(Round t) override;
  void ingest(std::span<const FeedbackEvent>) override {}
  bool is_linear() const override { return true; }

 private:
  std::size_t dim_;
  ActionSet set_;
  Rng rng_;
};

struct VanillaTrace {
  std::vector<Vec> x;
  std::vector<std::size_t> arms;
  Vec losses;
};

// Plain mirror descent with a constant scale: x_{t+1} is the constrained
// step from x_t. Requires a zero-delay environment.
VanillaTrace vanilla_omd_run(const Regularizer& reg, std::span<const double> x0,
                             double sigma, Environment& env, Round horizon,
                             std::uint64_t seed);

// Audit inputs from a recorded history. Rounds whose feedback is still
// missing or was skipped enter with a zero estimate and z = z~ = x.
std::vector<AuditStep> audit_steps(const MabPolicy& policy);
std::vector<AuditStep> audit_steps(const BoloPolicy& policy);

}  // namespace banker
