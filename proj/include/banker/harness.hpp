#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "banker/algorithms.hpp"
#include "banker/common.hpp"
#include "banker/environment.hpp"
#include "banker/ledger.hpp"

namespace banker {

inline constexpr int kSchemaVersion = 1;

// Algorithm names accepted in configs: tinf, sftinf, sflbinf, constant,
// bolo, uniform (a random baseline matching the loss model's kind).
struct AlgorithmSpec {
  std::string name = "tinf";
  std::size_t dim = 2;  // arms for bandits, ambient dimension for bolo
  Round horizon = 1;
  std::optional<std::string> regularizer;
  double scale_prefactor = 1.0;
  double constant_scale = 1.0;
  AllocationStrategy allocation = AllocationStrategy::kGreedy;
  bool drop_clamp = false;  // mutation hook for the BOLO clamp
};

struct OutputSpec {
  std::string dir = "out";
  bool dump_actions = false;
  bool ledger_trace = false;
};

struct ExperimentConfig {
  nlohmann::json source;  // after overrides; echoed into summary.json
  AlgorithmSpec algorithm;
  LossModel loss = LossModel::bernoulli({0.5}, 0);
  DelaySchedule delay = DelaySchedule::zero();
  std::size_t runs = 1;
  std::uint64_t master_seed = 0;
  OutputSpec output;
  bool spend_skipped_savings = false;  // mutation hook
};

// Relative CSV paths are resolved against base_dir.
ExperimentConfig parse_config(const nlohmann::json& source,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Sets a dotted key path ("algorithm.horizon") in a JSON document.
void set_json_path(nlohmann::json& doc, const std::string& dotted,
                   const nlohmann::json& value);

std::uint64_t hash_vector(std::span<const double> v);

struct RoundRow {
  Round t = 0;
  std::uint64_t x_hash = 0;
  std::size_t arm = 0;          // bandits
  std::uint64_t action_hash = 0;  // linear
  double loss = 0.0;            // incurred loss
  bool observed = false;        // released within the horizon
  double comparator_loss = 0.0;
  double sigma = 0.0;
  double investment = 0.0;
  double total_investment = 0.0;
  std::int64_t backlog = 0;
  bool skipped = false;
  Vec x;       // kept with dump_actions
  Vec action;  // kept with dump_actions (linear)
};

struct RunRecord {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  bool linear = false;
  std::vector<RoundRow> rows;
  double total_investment = 0.0;
  std::size_t skip_count = 0;
  std::int64_t total_delay = 0;
  double loss_square_sum = 0.0;  // sum (backlog_t + 1) * loss_t^2
  double regret = 0.0;
  double stranded_savings = 0.0;
  std::int64_t max_backlog = 0;
  std::vector<LedgerTraceRow> ledger_trace;
};

struct Statistic {
  double mean = 0.0;
  double stderr_ = 0.0;
  double min = 0.0;
  double max = 0.0;
};
Statistic summarize(std::span<const double> values);

struct ExperimentResult {
  std::vector<RunRecord> records;
  RegretCurve curve;
  Vec comparator_per_round;
  std::optional<ArmComparator> arm_comparator;
  std::optional<PointComparator> point_comparator;
};

// Creates the policy a config describes for the given run seed.
std::unique_ptr<Policy> make_policy(const ExperimentConfig& config,
                                    std::uint64_t run_seed);

RunRecord run_single(const ExperimentConfig& config, std::size_t run_index);
RunRecord run_single(const ExperimentConfig& config, std::size_t run_index,
                     std::span<const double> comparator_per_round);

// Worker count from BANKER_THREADS (unset or 0 means hardware concurrency).
std::size_t thread_count();

ExperimentResult run_monte_carlo(const ExperimentConfig& config);

void emit_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir);

nlohmann::json summary_json(const ExperimentResult& result,
                            const ExperimentConfig& config);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace banker
