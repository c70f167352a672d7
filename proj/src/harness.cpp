#include "banker/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "banker/rng.hpp"

namespace banker {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& where,
         T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return get_or<T>(obj, key, where, T{});
}

std::uint64_t parse_seed(const json& value, const std::string& where) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(value.get<std::int64_t>());
  }
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size()) return out;
  }
  throw ConfigError(where + ": seed must be a nonnegative 64-bit integer");
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.string();
}

LossModel parse_loss(const json& j, const std::filesystem::path& base,
                     const std::string& where) {
  const auto kind = require<std::string>(j, "kind", where);
  if (kind == "matrix") {
    check_keys(j, where, {"kind", "path"});
    return LossModel::matrix_from_csv(
        resolve(base, require<std::string>(j, "path", where)));
  }
  if (kind == "bernoulli") {
    check_keys(j, where, {"kind", "means", "seed"});
    const std::uint64_t seed = j.contains("seed") ? parse_seed(j["seed"], where) : 0;
    return LossModel::bernoulli(require<Vec>(j, "means", where), seed);
  }
  if (kind == "scale_free") {
    check_keys(j, where, {"kind", "base", "multiplier", "signed"});
    if (!j.contains("base")) throw ConfigError(where + ": missing 'base'");
    return LossModel::scale_free(parse_loss(j["base"], base, where + ".base"),
                                 require<double>(j, "multiplier", where),
                                 get_or<bool>(j, "signed", where, false));
  }
  if (kind == "linear_sequence") {
    check_keys(j, where, {"kind", "path", "action_set"});
    const std::string path = resolve(base, require<std::string>(j, "path", where));
    const CsvTable table = read_csv(path);
    if (table.header.size() < 2 || table.header[0] != "t") {
      throw ConfigError(path + ": expected header 't,l_1,...,l_n'");
    }
    std::vector<Vec> rows;
    for (const Vec& r : table.rows) {
      if (r[0] != static_cast<double>(rows.size() + 1)) {
        throw ConfigError(path + ": rounds must be 1, 2, ... in order");
      }
      rows.emplace_back(r.begin() + 1, r.end());
    }
    return LossModel::linear_sequence(
        std::move(rows),
        action_set_from_name(get_or<std::string>(j, "action_set", where, "hypercube")));
  }
  if (kind == "linear_stochastic") {
    check_keys(j, where, {"kind", "mean", "noise", "seed", "action_set"});
    const std::uint64_t seed = j.contains("seed") ? parse_seed(j["seed"], where) : 0;
    return LossModel::linear_stochastic(
        require<Vec>(j, "mean", where), get_or<double>(j, "noise", where, 0.0),
        seed,
        action_set_from_name(get_or<std::string>(j, "action_set", where, "hypercube")));
  }
  throw ConfigError(where + ": unknown loss kind '" + kind + "'");
}

DelaySchedule parse_delay(const json& j, const std::filesystem::path& base,
                          Round horizon, const std::string& where) {
  const auto kind = require<std::string>(j, "kind", where);
  if (kind == "zero") {
    check_keys(j, where, {"kind"});
    return DelaySchedule::zero();
  }
  if (kind == "uniform") {
    check_keys(j, where, {"kind", "d"});
    return DelaySchedule::uniform(require<std::int64_t>(j, "d", where));
  }
  if (kind == "per_round") {
    check_keys(j, where, {"kind", "path", "delays"});
    if (j.contains("delays")) {
      return DelaySchedule::per_round(
          require<std::vector<std::int64_t>>(j, "delays", where));
    }
    return DelaySchedule::per_round_from_csv(
        resolve(base, require<std::string>(j, "path", where)));
  }
  if (kind == "arm_dependent") {
    check_keys(j, where, {"kind", "path", "matrix"});
    if (j.contains("matrix")) {
      return DelaySchedule::arm_dependent(
          require<std::vector<std::vector<std::int64_t>>>(j, "matrix", where));
    }
    return DelaySchedule::arm_dependent_from_csv(
        resolve(base, require<std::string>(j, "path", where)));
  }
  if (kind == "geometric") {
    check_keys(j, where, {"kind", "p", "seed"});
    const std::uint64_t seed = j.contains("seed") ? parse_seed(j["seed"], where) : 0;
    return DelaySchedule::geometric(require<double>(j, "p", where), seed,
                                    10 * std::max<Round>(horizon, 1));
  }
  throw ConfigError(where + ": unknown delay kind '" + kind + "'");
}

bool is_bandit_algorithm(const std::string& name) {
  return name == "tinf" || name == "sftinf" || name == "sflbinf" ||
         name == "constant";
}

MabAlgorithm mab_algorithm(const std::string& name) {
  if (name == "tinf") return MabAlgorithm::kTinf;
  if (name == "sftinf") return MabAlgorithm::kSfTinf;
  if (name == "sflbinf") return MabAlgorithm::kSfLbInf;
  return MabAlgorithm::kConstantScale;
}

// Re-raises the in-flight library error with a prefix, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const DomainError& e) {
    throw DomainError(context + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(context + e.what());
  } catch (const OrderError& e) {
    throw OrderError(context + e.what());
  } catch (const StateError& e) {
    throw StateError(context + e.what());
  } catch (const MissingDualError& e) {
    throw MissingDualError(context + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const IoError& e) {
    throw IoError(context + e.what());
  } catch (const Error& e) {
    throw Error(context + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[19] = "0x";
  auto [ptr, ec] = std::to_chars(buf + 2, buf + sizeof(buf), v, 16);
  (void)ec;
  std::string digits(buf + 2, ptr);
  return "0x" + std::string(16 - digits.size(), '0') + digits;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json statistic_json(const Statistic& s) {
  return json{{"mean", s.mean}, {"stderr", s.stderr_}, {"min", s.min}, {"max", s.max}};
}

template <typename F>
Statistic over_records(const std::vector<RunRecord>& records, F field) {
  Vec values;
  values.reserve(records.size());
  for (const RunRecord& r : records) values.push_back(static_cast<double>(field(r)));
  return summarize(values);
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void set_json_path(nlohmann::json& doc, const std::string& dotted,
                   const nlohmann::json& value) {
  if (dotted.empty()) throw ConfigError("empty parameter path");
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty()) throw ConfigError("malformed parameter path '" + dotted + "'");
    if (!node->is_object()) {
      throw ConfigError("parameter path '" + dotted + "' crosses a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

ExperimentConfig parse_config(const nlohmann::json& source,
                              const std::filesystem::path& base_dir) {
  check_keys(source, "config",
             {"schema_version", "algorithm", "environment", "runs",
              "master_seed", "output"});
  const int version = require<int>(source, "schema_version", "config");
  if (version != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(version));
  }
  ExperimentConfig c;
  c.source = source;

  if (!source.contains("algorithm")) throw ConfigError("config: missing 'algorithm'");
  const json& a = source["algorithm"];
  check_keys(a, "algorithm",
             {"name", "arms", "dim", "horizon", "regularizer", "scale_prefactor",
              "constant_scale", "allocation"});
  c.algorithm.name = require<std::string>(a, "name", "algorithm");
  if (!is_bandit_algorithm(c.algorithm.name) && c.algorithm.name != "bolo" &&
      c.algorithm.name != "uniform") {
    throw ConfigError("algorithm: unknown name '" + c.algorithm.name + "'");
  }
  c.algorithm.horizon = require<Round>(a, "horizon", "algorithm");
  if (c.algorithm.horizon < 0) throw ConfigError("algorithm.horizon must be >= 0");
  const std::string dim_key = a.contains("dim") ? "dim" : "arms";
  const auto dim = require<std::int64_t>(a, dim_key, "algorithm");
  if (dim < 1) throw ConfigError("algorithm." + dim_key + " must be positive");
  c.algorithm.dim = static_cast<std::size_t>(dim);
  if (a.contains("regularizer")) {
    c.algorithm.regularizer = require<std::string>(a, "regularizer", "algorithm");
    Regularizer::from_name(*c.algorithm.regularizer, 1);
  }
  c.algorithm.scale_prefactor = get_or<double>(a, "scale_prefactor", "algorithm", 1.0);
  c.algorithm.constant_scale = get_or<double>(a, "constant_scale", "algorithm", 1.0);
  c.algorithm.allocation = allocation_from_name(
      get_or<std::string>(a, "allocation", "algorithm", "greedy"));

  if (!source.contains("environment")) {
    throw ConfigError("config: missing 'environment'");
  }
  const json& env = source["environment"];
  check_keys(env, "environment", {"loss", "delay"});
  if (!env.contains("loss")) throw ConfigError("environment: missing 'loss'");
  c.loss = parse_loss(env["loss"], base_dir, "environment.loss");
  c.delay = env.contains("delay")
                ? parse_delay(env["delay"], base_dir, c.algorithm.horizon,
                              "environment.delay")
                : DelaySchedule::zero();

  const auto runs = get_or<std::int64_t>(source, "runs", "config", 1);
  if (runs < 1) throw ConfigError("runs must be positive");
  c.runs = static_cast<std::size_t>(runs);
  c.master_seed =
      source.contains("master_seed") ? parse_seed(source["master_seed"], "master_seed") : 0;

  if (source.contains("output")) {
    const json& o = source["output"];
    check_keys(o, "output", {"dir", "dump_actions", "ledger_trace"});
    c.output.dir = get_or<std::string>(o, "dir", "output", "out");
    c.output.dump_actions = get_or<bool>(o, "dump_actions", "output", false);
    c.output.ledger_trace = get_or<bool>(o, "ledger_trace", "output", false);
  }

  const bool wants_linear = c.algorithm.name == "bolo";
  if (wants_linear && !c.loss.is_linear()) {
    throw ConfigError("bolo needs a linear loss model");
  }
  if (is_bandit_algorithm(c.algorithm.name) && c.loss.is_linear()) {
    throw ConfigError(c.algorithm.name + " needs a bandit loss model");
  }
  if (c.loss.dim() != c.algorithm.dim) {
    throw ConfigError("algorithm dimension " + std::to_string(c.algorithm.dim) +
                      " does not match the loss model's " +
                      std::to_string(c.loss.dim()));
  }
  if (const auto len = c.loss.length(); len && *len < c.algorithm.horizon) {
    throw ConfigError("loss model covers " + std::to_string(*len) +
                      " rounds, horizon is " + std::to_string(c.algorithm.horizon));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

std::uint64_t hash_vector(std::span<const double> v) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (double e : v) {
    const auto bits = std::bit_cast<std::uint64_t>(e);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xFFU;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

Statistic summarize(std::span<const double> values) {
  Statistic s;
  if (values.empty()) return s;
  double mean = 0.0;
  double m2 = 0.0;
  s.min = values.front();
  s.max = values.front();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double delta = values[i] - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (values[i] - mean);
    s.min = std::min(s.min, values[i]);
    s.max = std::max(s.max, values[i]);
  }
  s.mean = mean;
  const double n = static_cast<double>(values.size());
  s.stderr_ = values.size() > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
  return s;
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& config,
                                    std::uint64_t run_seed) {
  const AlgorithmSpec& a = config.algorithm;
  const std::uint64_t seed = derive_stream_seed(run_seed, kPolicyStream);
  if (a.name == "uniform") {
    if (config.loss.is_linear()) {
      return std::make_unique<UniformLinearPolicy>(a.dim, config.loss.action_set(),
                                                   seed);
    }
    return std::make_unique<UniformMabPolicy>(a.dim, seed);
  }
  if (a.name == "bolo") {
    BoloConfig b;
    b.dim = a.dim;
    b.horizon = a.horizon;
    b.set = config.loss.action_set();
    b.scale_prefactor = a.scale_prefactor;
    b.allocation = a.allocation;
    b.apply_clamp = !a.drop_clamp;
    b.record_history = false;
    b.record_ledger_trace = config.output.ledger_trace;
    return std::make_unique<BoloPolicy>(b, seed);
  }
  MabConfig m;
  m.algorithm = mab_algorithm(a.name);
  m.arms = a.dim;
  m.horizon = a.horizon;
  if (a.regularizer) m.regularizer = Regularizer::from_name(*a.regularizer, a.dim).kind();
  m.scale_prefactor = a.scale_prefactor;
  m.constant_scale = a.constant_scale;
  m.allocation = a.allocation;
  m.record_history = false;
  m.record_ledger_trace = config.output.ledger_trace;
  m.spend_skipped_savings = config.spend_skipped_savings;
  return std::make_unique<MabPolicy>(m, seed);
}

RunRecord run_single(const ExperimentConfig& config, std::size_t run_index) {
  const Vec comparator = comparator_losses(config.loss, config.algorithm.horizon);
  return run_single(config, run_index, comparator);
}

RunRecord run_single(const ExperimentConfig& config, std::size_t run_index,
                     std::span<const double> comparator_per_round) {
  RunRecord rec;
  rec.run_index = run_index;
  rec.seed = derive_run_seed(config.master_seed, run_index);
  rec.linear = config.loss.is_linear();
  const Round horizon = config.algorithm.horizon;
  if (horizon == 0) return rec;
  if (comparator_per_round.size() != static_cast<std::size_t>(horizon)) {
    throw DomainError("run_single: comparator length differs from the horizon");
  }

  const std::string run_context = "run " + std::to_string(run_index) + ": ";
  std::unique_ptr<Policy> policy;
  try {
    policy = make_policy(config, rec.seed);
  } catch (const Error&) {
    rethrow_with_context(run_context);
  }
  Environment env(config.loss, config.delay);
  rec.rows.reserve(static_cast<std::size_t>(horizon));
  CompensatedSum total_investment;
  CompensatedSum regret;
  CompensatedSum square_sum;

  Round t = 1;
  try {
    for (; t <= horizon; ++t) {
      policy->ingest(env.release(t));
      Decision d = policy->decide(t);
      RoundRow row;
      row.t = t;
      row.x_hash = hash_vector(d.x);
      row.arm = d.arm;
      row.sigma = d.sigma;
      row.investment = d.investment;
      row.backlog = d.backlog;
      if (rec.linear) {
        row.action_hash = hash_vector(d.action);
        row.loss = env.play_point(t, d.action);
      } else {
        row.loss = env.play_arm(t, d.arm);
      }
      row.comparator_loss = comparator_per_round[static_cast<std::size_t>(t - 1)];
      total_investment.add(d.investment);
      row.total_investment = total_investment.value();
      regret.add(row.loss - row.comparator_loss);
      square_sum.add(static_cast<double>(d.backlog + 1) * row.loss * row.loss);
      rec.max_backlog = std::max(rec.max_backlog, d.backlog);
      if (config.output.dump_actions) {
        row.x = std::move(d.x);
        row.action = std::move(d.action);
      }
      rec.rows.push_back(std::move(row));
    }
    // In-flight feedback is processed for diagnostics only; no decision
    // follows it.
    policy->ingest(env.drain());
  } catch (const Error&) {
    rethrow_with_context(run_context + (t <= horizon
                                            ? "round " + std::to_string(t) + ": "
                                            : std::string("drain: ")));
  }

  const Ledger* ledger = policy->ledger();
  for (RoundRow& row : rec.rows) {
    row.observed = env.release_round(row.t) <= horizon;
    if (ledger) row.skipped = ledger->entry(row.t).status == SavingStatus::kSkipped;
  }
  rec.total_investment = total_investment.value();
  rec.total_delay = env.total_delay();
  rec.loss_square_sum = square_sum.value();
  rec.regret = regret.value();
  if (ledger) {
    rec.skip_count = ledger->skipped_count();
    rec.stranded_savings = ledger->stranded_savings();
    rec.ledger_trace = ledger->trace();
  }
  return rec;
}

std::size_t thread_count() {
  std::size_t n = 0;
  if (const char* env = std::getenv("BANKER_THREADS")) {
    std::string s(env);
    std::size_t parsed = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), parsed);
    if (ec == std::errc() && ptr == s.data() + s.size()) n = parsed;
  }
  if (n == 0) n = std::max(1U, std::thread::hardware_concurrency());
  return n;
}

ExperimentResult run_monte_carlo(const ExperimentConfig& config) {
  ExperimentResult result;
  const Round horizon = config.algorithm.horizon;
  result.comparator_per_round = comparator_losses(config.loss, horizon);
  if (horizon > 0) {
    if (config.loss.is_linear()) {
      result.point_comparator = best_fixed_point(config.loss, horizon);
    } else {
      result.arm_comparator = best_fixed_arm(config.loss, horizon);
    }
  }

  result.records.resize(config.runs);
  std::vector<std::exception_ptr> errors(config.runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.runs; i = next++) {
      try {
        result.records[i] = run_single(config, i, result.comparator_per_round);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(thread_count(), config.runs);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<Vec> incurred;
  incurred.reserve(config.runs);
  for (const RunRecord& r : result.records) {
    Vec losses;
    losses.reserve(r.rows.size());
    for (const RoundRow& row : r.rows) losses.push_back(row.loss);
    incurred.push_back(std::move(losses));
  }
  result.curve = pseudo_regret(incurred, result.comparator_per_round);
  return result;
}

nlohmann::json summary_json(const ExperimentResult& result,
                            const ExperimentConfig& config) {
  json s;
  s["schema_version"] = kSchemaVersion;
  s["config"] = config.source;
  s["master_seed"] = config.master_seed;
  s["runs"] = config.runs;
  s["horizon"] = config.algorithm.horizon;
  if (result.arm_comparator) {
    s["comparator"] = {{"kind", "arm"},
                       {"arm", result.arm_comparator->arm + 1},
                       {"total_loss", result.arm_comparator->total_loss},
                       {"tie_rule", "smallest index"}};
  } else if (result.point_comparator) {
    s["comparator"] = {{"kind", "point"},
                       {"y", result.point_comparator->y},
                       {"total_loss", result.point_comparator->total_loss},
                       {"tie_rule", "zero coordinates map to +1"}};
  } else {
    s["comparator"] = nullptr;
  }
  s["regret"] = {{"mean_final", result.curve.final_mean()},
                 {"stderr_final", result.curve.final_stderr()}};
  s["final_regret"] = statistic_json(
      over_records(result.records, [](const RunRecord& r) { return r.regret; }));
  s["total_investment"] = statistic_json(over_records(
      result.records, [](const RunRecord& r) { return r.total_investment; }));
  s["skips"] = statistic_json(
      over_records(result.records, [](const RunRecord& r) { return r.skip_count; }));
  s["stranded_savings"] = statistic_json(over_records(
      result.records, [](const RunRecord& r) { return r.stranded_savings; }));
  s["total_delay"] = statistic_json(
      over_records(result.records, [](const RunRecord& r) { return r.total_delay; }));
  s["loss_square_sum"] = statistic_json(over_records(
      result.records, [](const RunRecord& r) { return r.loss_square_sum; }));
  s["max_backlog"] = statistic_json(
      over_records(result.records, [](const RunRecord& r) { return r.max_backlog; }));
  return s;
}

void emit_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  {
    const auto path = dir / "runs.csv";
    auto out = open_output(path);
    out << "run,t,x_hash,action,loss,observed_loss,comparator_loss,sigma,"
           "investment,total_investment,backlog,skipped\n";
    for (const RunRecord& r : result.records) {
      for (const RoundRow& row : r.rows) {
        out << r.run_index << ',' << row.t << ',' << hex64(row.x_hash) << ','
            << (r.linear ? hex64(row.action_hash) : std::to_string(row.arm + 1))
            << ',' << format_double(row.loss) << ','
            << (row.observed ? format_double(row.loss) : std::string()) << ','
            << format_double(row.comparator_loss) << ','
            << format_double(row.sigma) << ',' << format_double(row.investment)
            << ',' << format_double(row.total_investment) << ',' << row.backlog
            << ',' << (row.skipped ? 1 : 0) << '\n';
      }
    }
    close_output(out, path);
  }
  {
    const auto path = dir / "regret_curve.csv";
    auto out = open_output(path);
    out << "t,mean_cum_regret,stderr\n";
    for (std::size_t i = 0; i < result.curve.mean.size(); ++i) {
      out << i + 1 << ',' << format_double(result.curve.mean[i]) << ','
          << format_double(result.curve.stderr_[i]) << '\n';
    }
    close_output(out, path);
  }
  {
    const auto path = dir / "summary.json";
    auto out = open_output(path);
    out << summary_json(result, config).dump(2) << '\n';
    close_output(out, path);
  }
  if (config.output.dump_actions) {
    const auto path = dir / "actions.csv";
    auto out = open_output(path);
    const std::size_t n = config.algorithm.dim;
    out << "run,t";
    for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
    if (config.loss.is_linear()) {
      for (std::size_t i = 1; i <= n; ++i) out << ",a_" << i;
    }
    out << '\n';
    for (const RunRecord& r : result.records) {
      for (const RoundRow& row : r.rows) {
        out << r.run_index << ',' << row.t;
        for (double e : row.x) out << ',' << format_double(e);
        for (double e : row.action) out << ',' << format_double(e);
        out << '\n';
      }
    }
    close_output(out, path);
  }
  if (config.output.ledger_trace) {
    const auto path = dir / "ledger_trace.jsonl";
    auto out = open_output(path);
    for (const RunRecord& r : result.records) {
      for (const LedgerTraceRow& row : r.ledger_trace) {
        json line;
        line["run"] = r.run_index;
        line["t"] = row.round;
        line["sigma"] = row.sigma;
        line["b"] = row.investment;
        line["B"] = row.total_investment;
        json spends = json::array();
        for (const Spend& s : row.spends) spends.push_back({s.source, s.amount});
        line["spends"] = std::move(spends);
        json transitions = json::array();
        for (const auto& [s, status] : row.transitions) {
          transitions.push_back({s, to_string(status)});
        }
        line["transitions"] = std::move(transitions);
        out << line.dump() << '\n';
      }
    }
    close_output(out, path);
  }
}

}  // namespace banker
