#include "banker/environment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "banker/rng.hpp"

namespace banker {
namespace {

constexpr double kLossSetTolerance = 1e-12;
// Keeps the per-coordinate linear noise stream apart from any MAB stream
// sharing a seed.
constexpr std::uint64_t kLinearNoiseSalt = 0x4C494E4541520000ULL;

double dual_norm(std::span<const double> l, ActionSet set) {
  if (set == ActionSet::kHypercube) {
    double s = 0.0;
    for (double e : l) s += std::abs(e);
    return s;
  }
  double s = 0.0;
  for (double e : l) s += e * e;
  return std::sqrt(s);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_header(const CsvTable& table, const std::string& path,
                  const std::string& second) {
  if (table.header.empty() || table.header[0] != "t") {
    throw ConfigError(path + ": first column must be 't'");
  }
  if (second == "d") {
    if (table.header.size() != 2 || table.header[1] != "d") {
      throw ConfigError(path + ": expected header 't,d'");
    }
    return;
  }
  if (table.header.size() < 2) {
    throw ConfigError(path + ": expected header 't,arm_1,...,arm_K'");
  }
  for (std::size_t i = 1; i < table.header.size(); ++i) {
    if (table.header[i] != "arm_" + std::to_string(i)) {
      throw ConfigError(path + ": column " + std::to_string(i + 1) +
                        " must be 'arm_" + std::to_string(i) + "'");
    }
  }
}

void check_round_column(const CsvTable& table, const std::string& path) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r][0] != static_cast<double>(r + 1)) {
      throw ConfigError(path + ": row " + std::to_string(r + 2) +
                        " must have t = " + std::to_string(r + 1));
    }
  }
}

std::int64_t as_delay(double value, const std::string& where) {
  if (!(value >= 0.0) || value != std::floor(value) || value > 1e15) {
    throw ConfigError(where + ": delays must be nonnegative integers");
  }
  return static_cast<std::int64_t>(value);
}

}  // namespace

const char* to_string(ActionSet set) {
  return set == ActionSet::kHypercube ? "hypercube" : "ball";
}

ActionSet action_set_from_name(std::string_view name) {
  if (name == "hypercube") return ActionSet::kHypercube;
  if (name == "ball") return ActionSet::kBall;
  throw ConfigError("unknown action set '" + std::string(name) + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " columns");
    }
    Vec row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const char* first = cells[i].data();
      const char* last = first + cells[i].size();
      auto [ptr, ec] = std::from_chars(first, last, row[i]);
      if (ec != std::errc() || ptr != last || !std::isfinite(row[i])) {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": not a number '" + cells[i] + "'");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ConfigError(path + ": empty file");
  return table;
}

LossModel LossModel::matrix(std::vector<Vec> rows) {
  if (rows.empty() || rows.front().empty()) {
    throw ConfigError("loss matrix must have at least one round and one arm");
  }
  const std::size_t arms = rows.front().size();
  for (const Vec& row : rows) {
    if (row.size() != arms) throw ConfigError("loss matrix rows differ in width");
    for (double e : row) {
      if (!(e >= 0.0 && e <= 1.0)) {
        throw ConfigError("loss matrix entries must lie in [0, 1]");
      }
    }
  }
  LossModel m;
  m.kind_ = LossKind::kMatrix;
  m.dim_ = arms;
  m.rows_ = std::make_shared<const std::vector<Vec>>(std::move(rows));
  return m;
}

LossModel LossModel::matrix_from_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  check_header(table, path, "arm");
  check_round_column(table, path);
  std::vector<Vec> rows;
  rows.reserve(table.rows.size());
  for (const Vec& r : table.rows) rows.emplace_back(r.begin() + 1, r.end());
  return matrix(std::move(rows));
}

LossModel LossModel::bernoulli(Vec means, std::uint64_t seed) {
  if (means.empty()) throw ConfigError("bernoulli model needs at least one arm");
  for (double m : means) {
    if (!(m >= 0.0 && m <= 1.0)) {
      throw ConfigError("bernoulli means must lie in [0, 1]");
    }
  }
  LossModel m;
  m.kind_ = LossKind::kBernoulli;
  m.dim_ = means.size();
  m.means_ = std::move(means);
  m.seed_ = seed;
  return m;
}

LossModel LossModel::scale_free(const LossModel& base, double multiplier,
                                bool signed_losses) {
  if (base.is_linear()) throw ConfigError("scale-free base must be a bandit model");
  if (!(multiplier > 0.0) || !std::isfinite(multiplier)) {
    throw ConfigError("scale-free multiplier must be positive");
  }
  LossModel m;
  m.kind_ = LossKind::kScaleFree;
  m.dim_ = base.dim();
  m.multiplier_ = multiplier;
  m.signed_ = signed_losses;
  m.base_ = std::make_shared<const LossModel>(base);
  return m;
}

LossModel LossModel::linear_sequence(std::vector<Vec> rows, ActionSet set) {
  if (rows.empty() || rows.front().empty()) {
    throw ConfigError("linear loss sequence must be nonempty");
  }
  const std::size_t n = rows.front().size();
  for (const Vec& row : rows) {
    if (row.size() != n) throw ConfigError("linear loss rows differ in width");
    if (dual_norm(row, set) > 1.0 + kLossSetTolerance) {
      throw ConfigError("linear loss vector outside the loss set");
    }
  }
  LossModel m;
  m.kind_ = LossKind::kLinearSequence;
  m.dim_ = n;
  m.set_ = set;
  m.rows_ = std::make_shared<const std::vector<Vec>>(std::move(rows));
  return m;
}

LossModel LossModel::linear_stochastic(Vec mean, double noise, std::uint64_t seed,
                                       ActionSet set) {
  if (mean.empty()) throw ConfigError("linear mean must be nonempty");
  if (!(noise >= 0.0)) throw ConfigError("linear noise must be nonnegative");
  LossModel m;
  m.kind_ = LossKind::kLinearStochastic;
  m.dim_ = mean.size();
  m.set_ = set;
  m.means_ = std::move(mean);
  m.noise_ = noise;
  m.seed_ = seed;
  return m;
}

bool LossModel::is_linear() const {
  return kind_ == LossKind::kLinearSequence ||
         kind_ == LossKind::kLinearStochastic;
}

std::optional<Round> LossModel::length() const {
  if (kind_ == LossKind::kMatrix || kind_ == LossKind::kLinearSequence) {
    return static_cast<Round>(rows_->size());
  }
  if (kind_ == LossKind::kScaleFree) return base_->length();
  return std::nullopt;
}

double LossModel::range() const {
  switch (kind_) {
    case LossKind::kMatrix: {
      double top = 0.0;
      for (const Vec& row : *rows_) {
        for (double e : row) top = std::max(top, std::abs(e));
      }
      return top;
    }
    case LossKind::kBernoulli:
      return 1.0;
    case LossKind::kScaleFree:
      return multiplier_ * (signed_ ? 1.0 : base_->range());
    case LossKind::kLinearSequence:
    case LossKind::kLinearStochastic:
      return 1.0;
  }
  return 1.0;
}

void LossModel::check_round(Round t) const {
  if (t < 1) throw OrderError("loss requested for round " + std::to_string(t));
  const auto len = length();
  if (len && t > *len) {
    throw ConfigError("loss model has " + std::to_string(*len) +
                      " rounds, round " + std::to_string(t) + " requested");
  }
}

double LossModel::arm_loss(Round t, std::size_t arm) const {
  if (is_linear()) throw DomainError("arm_loss on a linear loss model");
  if (arm >= dim_) throw DomainError("arm index out of range");
  check_round(t);
  switch (kind_) {
    case LossKind::kMatrix:
      return (*rows_)[static_cast<std::size_t>(t - 1)][arm];
    case LossKind::kBernoulli: {
      const double u = keyed_uniform(seed_, static_cast<std::uint64_t>(t), arm);
      return u < means_[arm] ? 1.0 : 0.0;
    }
    case LossKind::kScaleFree: {
      const double b = base_->arm_loss(t, arm);
      return multiplier_ * (signed_ ? 2.0 * b - 1.0 : b);
    }
    default:
      break;
  }
  return 0.0;
}

Vec LossModel::loss_vector(Round t) const {
  check_round(t);
  Vec l(dim_);
  if (!is_linear()) {
    for (std::size_t i = 0; i < dim_; ++i) l[i] = arm_loss(t, i);
    return l;
  }
  if (kind_ == LossKind::kLinearSequence) {
    return (*rows_)[static_cast<std::size_t>(t - 1)];
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    const double u = keyed_uniform(seed_ ^ kLinearNoiseSalt,
                                   static_cast<std::uint64_t>(t), i);
    l[i] = means_[i] + noise_ * (2.0 * u - 1.0);
  }
  const double norm = dual_norm(l, set_);
  if (norm > 1.0) {
    for (double& e : l) e /= norm;
  }
  return l;
}

DelaySchedule DelaySchedule::zero() { return DelaySchedule(); }

DelaySchedule DelaySchedule::uniform(std::int64_t d) {
  if (d < 0) throw ConfigError("uniform delay must be nonnegative");
  DelaySchedule s;
  s.kind_ = DelayKind::kUniformConst;
  s.constant_ = d;
  return s;
}

DelaySchedule DelaySchedule::per_round(std::vector<std::int64_t> delays) {
  for (auto d : delays) {
    if (d < 0) throw ConfigError("per-round delays must be nonnegative");
  }
  DelaySchedule s;
  s.kind_ = DelayKind::kPerRound;
  s.per_round_ = std::make_shared<const std::vector<std::int64_t>>(std::move(delays));
  return s;
}

DelaySchedule DelaySchedule::per_round_from_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  check_header(table, path, "d");
  check_round_column(table, path);
  std::vector<std::int64_t> delays;
  delays.reserve(table.rows.size());
  for (const Vec& r : table.rows) delays.push_back(as_delay(r[1], path));
  return per_round(std::move(delays));
}

DelaySchedule DelaySchedule::arm_dependent(
    std::vector<std::vector<std::int64_t>> matrix) {
  if (matrix.empty() || matrix.front().empty()) {
    throw ConfigError("delay matrix must be nonempty");
  }
  for (const auto& row : matrix) {
    if (row.size() != matrix.front().size()) {
      throw ConfigError("delay matrix rows differ in width");
    }
    for (auto d : row) {
      if (d < 0) throw ConfigError("delay matrix entries must be nonnegative");
    }
  }
  DelaySchedule s;
  s.kind_ = DelayKind::kArmDependent;
  s.matrix_ = std::make_shared<const std::vector<std::vector<std::int64_t>>>(
      std::move(matrix));
  return s;
}

DelaySchedule DelaySchedule::arm_dependent_from_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  check_header(table, path, "arm");
  check_round_column(table, path);
  std::vector<std::vector<std::int64_t>> matrix;
  for (const Vec& r : table.rows) {
    std::vector<std::int64_t> row;
    for (std::size_t i = 1; i < r.size(); ++i) row.push_back(as_delay(r[i], path));
    matrix.push_back(std::move(row));
  }
  return arm_dependent(std::move(matrix));
}

DelaySchedule DelaySchedule::geometric(double p, std::uint64_t seed,
                                       std::int64_t cap) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("geometric p must lie in (0, 1]");
  if (cap < 0) throw ConfigError("geometric cap must be nonnegative");
  DelaySchedule s;
  s.kind_ = DelayKind::kGeometric;
  s.p_ = p;
  s.seed_ = seed;
  s.cap_ = cap;
  return s;
}

bool DelaySchedule::is_zero() const {
  switch (kind_) {
    case DelayKind::kZero:
      return true;
    case DelayKind::kUniformConst:
      return constant_ == 0;
    case DelayKind::kPerRound:
      return std::all_of(per_round_->begin(), per_round_->end(),
                         [](auto d) { return d == 0; });
    case DelayKind::kArmDependent:
      return std::all_of(matrix_->begin(), matrix_->end(), [](const auto& row) {
        return std::all_of(row.begin(), row.end(), [](auto d) { return d == 0; });
      });
    case DelayKind::kGeometric:
      return p_ == 1.0 || cap_ == 0;
  }
  return false;
}

std::int64_t DelaySchedule::delay(Round t, std::size_t arm) const {
  if (t < 1) throw OrderError("delay requested for round " + std::to_string(t));
  const auto index = static_cast<std::size_t>(t - 1);
  switch (kind_) {
    case DelayKind::kZero:
      return 0;
    case DelayKind::kUniformConst:
      return constant_;
    case DelayKind::kPerRound:
      if (index >= per_round_->size()) {
        throw ConfigError("delay schedule has no entry for round " +
                          std::to_string(t));
      }
      return (*per_round_)[index];
    case DelayKind::kArmDependent:
      if (index >= matrix_->size()) {
        throw ConfigError("delay matrix has no row for round " + std::to_string(t));
      }
      if (arm >= (*matrix_)[index].size()) {
        throw ConfigError("delay matrix has no column for arm " +
                          std::to_string(arm + 1));
      }
      return (*matrix_)[index][arm];
    case DelayKind::kGeometric: {
      if (p_ == 1.0) return 0;
      const double u = keyed_uniform(seed_, static_cast<std::uint64_t>(t), 0);
      const double d = std::floor(std::log1p(-u) / std::log1p(-p_));
      if (!(d < static_cast<double>(cap_))) return cap_;
      return static_cast<std::int64_t>(d);
    }
  }
  return 0;
}

Environment::Environment(LossModel loss, DelaySchedule delays)
    : loss_(std::move(loss)), delays_(std::move(delays)) {}

void Environment::enqueue(Round t, std::int64_t delay, double loss) {
  realized_.push_back(delay);
  total_delay_ += delay;
  last_round_ = t;
  pending_.emplace(std::make_pair(t + delay + 1, t), loss);
}

double Environment::play_arm(Round t, std::size_t arm) {
  if (t != last_round_ + 1) {
    throw OrderError("play_arm: expected round " + std::to_string(last_round_ + 1) +
                     ", got " + std::to_string(t));
  }
  if (loss_.is_linear()) throw DomainError("play_arm on a linear environment");
  const double loss = loss_.arm_loss(t, arm);
  enqueue(t, delays_.delay(t, arm), loss);
  return loss;
}

double Environment::play_point(Round t, std::span<const double> action) {
  if (t != last_round_ + 1) {
    throw OrderError("play_point: expected round " +
                     std::to_string(last_round_ + 1) + ", got " +
                     std::to_string(t));
  }
  if (!loss_.is_linear()) throw DomainError("play_point on a bandit environment");
  if (action.size() != loss_.dim()) throw DomainError("action dimension mismatch");
  const Vec l = loss_.loss_vector(t);
  const double loss = std::inner_product(l.begin(), l.end(), action.begin(), 0.0);
  enqueue(t, delays_.delay(t, 0), loss);
  return loss;
}

std::vector<FeedbackEvent> Environment::release(Round t) {
  std::vector<FeedbackEvent> out;
  auto it = pending_.begin();
  while (it != pending_.end() && it->first.first <= t) {
    out.push_back({it->first.second, it->second});
    it = pending_.erase(it);
  }
  std::sort(out.begin(), out.end(),
            [](const FeedbackEvent& a, const FeedbackEvent& b) {
              return a.round < b.round;
            });
  return out;
}

std::vector<FeedbackEvent> Environment::drain() {
  return release(std::numeric_limits<Round>::max());
}

Round Environment::release_round(Round s) const {
  if (s < 1 || s > last_round_) {
    throw StateError("release_round: round " + std::to_string(s) + " not played");
  }
  return s + realized_[static_cast<std::size_t>(s - 1)] + 1;
}

ArmComparator best_fixed_arm(const LossModel& model, Round horizon) {
  if (model.is_linear()) throw DomainError("best_fixed_arm on a linear model");
  ArmComparator c;
  c.column_sums.assign(model.dim(), 0.0);
  for (Round t = 1; t <= horizon; ++t) {
    for (std::size_t i = 0; i < model.dim(); ++i) {
      c.column_sums[i] += model.arm_loss(t, i);
    }
  }
  c.arm = static_cast<std::size_t>(
      std::min_element(c.column_sums.begin(), c.column_sums.end()) -
      c.column_sums.begin());
  c.total_loss = c.column_sums[c.arm];
  return c;
}

PointComparator best_fixed_point(const LossModel& model, Round horizon) {
  if (!model.is_linear()) throw DomainError("best_fixed_point on a bandit model");
  PointComparator c;
  const std::size_t n = model.dim();
  c.loss_sum.assign(n, 0.0);
  for (Round t = 1; t <= horizon; ++t) {
    const Vec l = model.loss_vector(t);
    for (std::size_t i = 0; i < n; ++i) c.loss_sum[i] += l[i];
  }
  c.y.assign(n, 0.0);
  if (model.action_set() == ActionSet::kHypercube) {
    for (std::size_t i = 0; i < n; ++i) c.y[i] = c.loss_sum[i] > 0.0 ? -1.0 : 1.0;
  } else {
    double norm = 0.0;
    for (double e : c.loss_sum) norm += e * e;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (std::size_t i = 0; i < n; ++i) c.y[i] = -c.loss_sum[i] / norm;
    }
  }
  c.total_loss =
      std::inner_product(c.loss_sum.begin(), c.loss_sum.end(), c.y.begin(), 0.0);
  return c;
}

Vec comparator_losses(const LossModel& model, Round horizon) {
  Vec out(static_cast<std::size_t>(std::max<Round>(horizon, 0)));
  if (model.is_linear()) {
    const PointComparator c = best_fixed_point(model, horizon);
    for (Round t = 1; t <= horizon; ++t) {
      const Vec l = model.loss_vector(t);
      out[static_cast<std::size_t>(t - 1)] =
          std::inner_product(l.begin(), l.end(), c.y.begin(), 0.0);
    }
  } else {
    const ArmComparator c = best_fixed_arm(model, horizon);
    for (Round t = 1; t <= horizon; ++t) {
      out[static_cast<std::size_t>(t - 1)] = model.arm_loss(t, c.arm);
    }
  }
  return out;
}

RegretCurve pseudo_regret(const std::vector<Vec>& incurred,
                          std::span<const double> comparator_per_round) {
  RegretCurve curve;
  const std::size_t horizon = comparator_per_round.size();
  curve.mean.assign(horizon, 0.0);
  curve.stderr_.assign(horizon, 0.0);
  if (incurred.empty()) return curve;
  for (const Vec& run : incurred) {
    if (run.size() != horizon) {
      throw DomainError("pseudo_regret: run length differs from the horizon");
    }
  }
  const double runs = static_cast<double>(incurred.size());
  Vec cumulative(incurred.size(), 0.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    // Welford over runs in index order.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t r = 0; r < incurred.size(); ++r) {
      cumulative[r] += incurred[r][t] - comparator_per_round[t];
      const double delta = cumulative[r] - mean;
      mean += delta / static_cast<double>(r + 1);
      m2 += delta * (cumulative[r] - mean);
    }
    curve.mean[t] = mean;
    curve.stderr_[t] =
        incurred.size() > 1 ? std::sqrt(m2 / (runs - 1.0) / runs) : 0.0;
  }
  return curve;
}

}  // namespace banker
