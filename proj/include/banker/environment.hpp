#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "banker/common.hpp"

namespace banker {

enum class ActionSet { kHypercube, kBall };

const char* to_string(ActionSet set);
ActionSet action_set_from_name(std::string_view name);

enum class LossKind {
  kMatrix,
  kBernoulli,
  kScaleFree,
  kLinearSequence,
  kLinearStochastic,
};

// Oblivious loss sequence. Every loss is a pure function of (model, t), so a
// model can be shared read-only by concurrent runs.
class LossModel {
 public:
  // rows[t-1][i] is the loss of arm i at round t; entries in [0, 1].
  static LossModel matrix(std::vector<Vec> rows);
  // Header `t,arm_1,...,arm_K`, one row per round.
  static LossModel matrix_from_csv(const std::string& path);
  // Independent Bernoulli(means[i]) losses drawn from a keyed stream.
  static LossModel bernoulli(Vec means, std::uint64_t seed);
  // Losses of a [0, 1] base model rescaled to [0, L] (or to [-L, L] via
  // b -> 2b - 1 when signed_losses is set). L stays inside the model.
  static LossModel scale_free(const LossModel& base, double multiplier,
                              bool signed_losses);
  // rows[t-1] is l_t; must satisfy sup over the action set of |<l, x>| <= 1.
  static LossModel linear_sequence(std::vector<Vec> rows, ActionSet set);
  // l_t = mean + noise * U(-1, 1)^n, shrunk onto the loss set if needed.
  static LossModel linear_stochastic(Vec mean, double noise, std::uint64_t seed,
                                     ActionSet set);

  LossKind kind() const { return kind_; }
  bool is_linear() const;
  std::size_t dim() const { return dim_; }
  ActionSet action_set() const { return set_; }
  // Number of rounds the model can serve, if finite.
  std::optional<Round> length() const;
  // Largest possible |loss| for an arm; the oracle side only.
  double range() const;

  // Full loss vector of round t (arms for MAB, R^n for linear).
  Vec loss_vector(Round t) const;
  double arm_loss(Round t, std::size_t arm) const;

 private:
  LossModel() = default;
  void check_round(Round t) const;

  LossKind kind_ = LossKind::kMatrix;
  std::size_t dim_ = 0;
  ActionSet set_ = ActionSet::kHypercube;
  std::shared_ptr<const std::vector<Vec>> rows_;
  Vec means_;
  std::uint64_t seed_ = 0;
  double multiplier_ = 1.0;
  bool signed_ = false;
  double noise_ = 0.0;
  std::shared_ptr<const LossModel> base_;
};

enum class DelayKind { kZero, kUniformConst, kPerRound, kArmDependent, kGeometric };

class DelaySchedule {
 public:
  static DelaySchedule zero();
  static DelaySchedule uniform(std::int64_t d);
  static DelaySchedule per_round(std::vector<std::int64_t> delays);
  // Header `t,d`.
  static DelaySchedule per_round_from_csv(const std::string& path);
  // matrix[t-1][arm]; the realized delay depends on the played arm.
  static DelaySchedule arm_dependent(std::vector<std::vector<std::int64_t>> matrix);
  // Header `t,arm_1,...,arm_K` with integer entries.
  static DelaySchedule arm_dependent_from_csv(const std::string& path);
  // Number of failures before the first success with probability p,
  // truncated at cap (10 T in the harness).
  static DelaySchedule geometric(double p, std::uint64_t seed, std::int64_t cap);

  DelayKind kind() const { return kind_; }
  bool is_zero() const;
  std::int64_t delay(Round t, std::size_t arm) const;

 private:
  DelaySchedule() = default;

  DelayKind kind_ = DelayKind::kZero;
  std::int64_t constant_ = 0;
  std::shared_ptr<const std::vector<std::int64_t>> per_round_;
  std::shared_ptr<const std::vector<std::vector<std::int64_t>>> matrix_;
  double p_ = 1.0;
  std::uint64_t seed_ = 0;
  std::int64_t cap_ = 0;
};

// One run's delayed feedback channel. Feedback of round s becomes available
// at the start of round s + d_s + 1.
class Environment {
 public:
  Environment(LossModel loss, DelaySchedule delays);

  // The observed loss is returned for logging by the harness; policies only
  // ever receive it through release().
  double play_arm(Round t, std::size_t arm);
  double play_point(Round t, std::span<const double> action);

  // Removes and returns everything with release round <= t, ascending by s.
  std::vector<FeedbackEvent> release(Round t);
  // Everything still in flight, ascending by s.
  std::vector<FeedbackEvent> drain();

  const LossModel& loss_model() const { return loss_; }
  const DelaySchedule& delay_schedule() const { return delays_; }
  Round last_round() const { return last_round_; }
  std::size_t in_flight() const { return pending_.size(); }
  // Sum of realized delays of every round played so far.
  std::int64_t total_delay() const { return total_delay_; }
  const std::vector<std::int64_t>& realized_delays() const { return realized_; }
  Round release_round(Round s) const;

 private:
  void enqueue(Round t, std::int64_t delay, double loss);

  LossModel loss_;
  DelaySchedule delays_;
  Round last_round_ = 0;
  std::int64_t total_delay_ = 0;
  std::vector<std::int64_t> realized_;
  // (release round, s) -> observed loss
  std::map<std::pair<Round, Round>, double> pending_;
};

struct ArmComparator {
  std::size_t arm = 0;  // zero-based; ties go to the smallest index
  double total_loss = 0.0;
  Vec column_sums;
};

struct PointComparator {
  Vec y;
  double total_loss = 0.0;
  Vec loss_sum;
};

ArmComparator best_fixed_arm(const LossModel& model, Round horizon);
PointComparator best_fixed_point(const LossModel& model, Round horizon);

// Per-round loss of the best fixed comparator over rounds 1..horizon.
Vec comparator_losses(const LossModel& model, Round horizon);

struct RegretCurve {
  Vec mean;    // mean cumulative regret after each round
  Vec stderr_; // standard error of the mean at each round
  double final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
  double final_stderr() const { return stderr_.empty() ? 0.0 : stderr_.back(); }
};

// incurred[r][t-1] is the loss run r incurred at round t.
RegretCurve pseudo_regret(const std::vector<Vec>& incurred,
                          std::span<const double> comparator_per_round);

// Small CSV reader shared by the loaders: returns the header and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<Vec> rows;
};
CsvTable read_csv(const std::string& path);

}  // namespace banker
