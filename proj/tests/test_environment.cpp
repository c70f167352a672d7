#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include "doctest.h"

#include "banker/algorithms.hpp"
#include "banker/environment.hpp"
#include "banker/rng.hpp"

using namespace banker;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("banker_env_" + name);
  std::ofstream(path) << body;
  return path.string();
}

std::vector<Vec> constant_rows(Round t, Vec row) {
  return std::vector<Vec>(static_cast<std::size_t>(t), std::move(row));
}

}  // namespace

TEST_CASE("release timing examples") {
  const LossModel loss = LossModel::matrix(constant_rows(20, {0.25, 0.75}));

  Environment zero(loss, DelaySchedule::zero());
  CHECK(zero.release(1).empty());
  CHECK(zero.play_arm(1, 1) == 0.75);
  CHECK(zero.release(2) == std::vector<FeedbackEvent>{{1, 0.75}});

  Environment uni(loss, DelaySchedule::uniform(3));
  uni.play_arm(1, 0);
  CHECK(uni.release_round(1) == 5);
  for (Round t = 2; t <= 4; ++t) {
    CHECK(uni.release(t).empty());
    uni.play_arm(t, 0);
  }
  CHECK(uni.release(5) == std::vector<FeedbackEvent>{{1, 0.25}});

  Environment arm(loss, DelaySchedule::arm_dependent({{0, 9}, {0, 9}}));
  arm.play_arm(1, 1);
  CHECK(arm.release_round(1) == 11);
  arm.play_arm(2, 0);
  CHECK(arm.release_round(2) == 3);
}

TEST_CASE("release is ordered and conserves events") {
  const LossModel loss = LossModel::bernoulli({0.3, 0.6, 0.5}, 17);
  Environment env(loss, DelaySchedule::geometric(0.2, 3, 1000));
  Rng rng(5);
  std::vector<int> seen(300, 0);
  std::size_t total = 0;
  for (Round t = 1; t <= 300; ++t) {
    const auto events = env.release(t);
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (i > 0) CHECK(events[i - 1].round < events[i].round);
      CHECK(env.release_round(events[i].round) <= t);
      ++seen[static_cast<std::size_t>(events[i].round - 1)];
    }
    total += events.size();
    const std::size_t a = static_cast<std::size_t>(rng.uniform() * 3);
    env.play_arm(t, a);
  }
  const auto rest = env.drain();
  for (const FeedbackEvent& e : rest) ++seen[static_cast<std::size_t>(e.round - 1)];
  total += rest.size();
  CHECK(total == 300);
  for (int s : seen) CHECK(s == 1);
  CHECK(env.in_flight() == 0);
  CHECK(env.drain().empty());
  CHECK(env.total_delay() ==
        std::accumulate(env.realized_delays().begin(), env.realized_delays().end(),
                        std::int64_t{0}));
}

TEST_CASE("same-round releases come back ascending") {
  const LossModel loss = LossModel::matrix(constant_rows(5, {0.1, 0.2}));
  Environment env(loss, DelaySchedule::per_round({2, 1, 0, 0, 0}));
  env.play_arm(1, 0);
  env.play_arm(2, 1);
  env.play_arm(3, 0);
  const auto events = env.release(4);
  REQUIRE(events.size() == 3);
  CHECK(events[0].round == 1);
  CHECK(events[1].round == 2);
  CHECK(events[2].round == 3);
}

TEST_CASE("environment order and kind errors") {
  const LossModel loss = LossModel::matrix(constant_rows(3, {0.1, 0.2}));
  Environment env(loss, DelaySchedule::zero());
  CHECK_THROWS_AS(env.play_arm(2, 0), OrderError);
  env.play_arm(1, 0);
  CHECK_THROWS_AS(env.play_arm(1, 0), OrderError);
  CHECK_THROWS_AS(env.play_point(2, Vec{0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(env.release_round(3), StateError);
  CHECK_THROWS_AS(loss.loss_vector(0), OrderError);
  CHECK_THROWS_AS(loss.loss_vector(4), ConfigError);
  CHECK_THROWS_AS(DelaySchedule::uniform(-1), ConfigError);
  CHECK_THROWS_AS(DelaySchedule::geometric(0.0, 1, 10), ConfigError);
}

TEST_CASE("delayed feedback accounting") {
  // The backlog summed over rounds counts every round-in-flight pair, so it
  // equals the realized delays truncated at the horizon.
  const Round T = 400;
  const LossModel loss = LossModel::bernoulli({0.5, 0.5}, 1);
  Environment env(loss, DelaySchedule::geometric(0.05, 4, 10 * T));
  std::int64_t backlog_sum = 0;
  for (Round t = 1; t <= T; ++t) {
    env.release(t);
    backlog_sum += static_cast<std::int64_t>(env.in_flight());
    env.play_arm(t, 0);
  }
  std::int64_t truncated = 0;
  for (Round s = 1; s <= T; ++s) {
    truncated += std::min<std::int64_t>(env.realized_delays()[static_cast<std::size_t>(s - 1)],
                                        T - s);
  }
  CHECK(backlog_sum == truncated);
  for (std::int64_t d : env.realized_delays()) CHECK(d <= 10 * T);
}

TEST_CASE("geometric delays are reproducible and keyed") {
  const DelaySchedule a = DelaySchedule::geometric(0.3, 12, 100);
  const DelaySchedule b = DelaySchedule::geometric(0.3, 12, 100);
  double mean = 0.0;
  for (Round t = 1; t <= 20000; ++t) {
    CHECK(a.delay(t, 0) == b.delay(t, 1));
    mean += static_cast<double>(a.delay(t, 0)) / 20000.0;
  }
  // Failures before the first success: (1 - p) / p.
  CHECK(mean == doctest::Approx(0.7 / 0.3).epsilon(0.05));
  const DelaySchedule capped = DelaySchedule::geometric(0.01, 1, 3);
  for (Round t = 1; t <= 100; ++t) CHECK(capped.delay(t, 0) <= 3);
}

TEST_CASE("comparator examples") {
  std::vector<Vec> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({1.0, 0.7});
  const ArmComparator c = best_fixed_arm(LossModel::matrix(rows), 10);
  CHECK(c.arm == 1);
  CHECK(c.column_sums[0] == doctest::Approx(10.0));
  CHECK(c.column_sums[1] == doctest::Approx(7.0));

  const PointComparator p = best_fixed_point(
      LossModel::linear_sequence({{0.4, -0.2}}, ActionSet::kHypercube), 1);
  CHECK(p.y == Vec{-1.0, 1.0});
  CHECK(p.total_loss == doctest::Approx(-0.6));

  const ArmComparator z = best_fixed_arm(LossModel::matrix(constant_rows(4, {0, 0, 0})), 4);
  CHECK(z.arm == 0);
  CHECK(z.total_loss == 0.0);
  const PointComparator zp = best_fixed_point(
      LossModel::linear_sequence(constant_rows(3, {0.0, 0.0}), ActionSet::kHypercube), 3);
  CHECK(zp.y == Vec{1.0, 1.0});

  const PointComparator ball = best_fixed_point(
      LossModel::linear_sequence({{0.3, 0.4}}, ActionSet::kBall), 1);
  CHECK(ball.y[0] == doctest::Approx(-0.6));
  CHECK(ball.y[1] == doctest::Approx(-0.8));
  CHECK(ball.total_loss == doctest::Approx(-0.5));
}

TEST_CASE("pseudo regret") {
  const LossModel loss = LossModel::bernoulli({0.2, 0.7}, 3);
  const Vec comp = comparator_losses(loss, 50);
  const RegretCurve zero = pseudo_regret({comp, comp, comp}, comp);
  for (std::size_t t = 0; t < 50; ++t) {
    CHECK(zero.mean[t] == 0.0);
    CHECK(zero.stderr_[t] == 0.0);
  }
  Vec other(50);
  for (Round t = 1; t <= 50; ++t) other[static_cast<std::size_t>(t - 1)] = loss.arm_loss(t, 1);
  const RegretCurve one = pseudo_regret({other}, comp);
  double cum = 0.0;
  for (std::size_t t = 0; t < 50; ++t) {
    cum += other[t] - comp[t];
    CHECK(one.mean[t] == doctest::Approx(cum));
    CHECK(one.stderr_[t] == 0.0);
  }
  CHECK_THROWS_AS(pseudo_regret({Vec(3, 0.0)}, comp), DomainError);
  CHECK(pseudo_regret({}, comp).final_mean() == 0.0);
}

TEST_CASE("uniform play on two bernoulli arms") {
  const Round T = 10000;
  const LossModel loss = LossModel::bernoulli({0.5, 0.1}, 21);
  const ArmComparator best = best_fixed_arm(loss, T);
  REQUIRE(best.arm == 1);
  const Vec comp = comparator_losses(loss, T);
  std::vector<Vec> incurred;
  for (std::uint64_t r = 0; r < 50; ++r) {
    Environment env(loss, DelaySchedule::zero());
    UniformMabPolicy policy(2, derive_run_seed(99, r));
    Vec run;
    for (Round t = 1; t <= T; ++t) run.push_back(env.play_arm(t, policy.decide(t).arm));
    incurred.push_back(std::move(run));
  }
  const RegretCurve curve = pseudo_regret(incurred, comp);
  // Given the realized losses the expected regret of uniform play is half
  // the gap between the column sums.
  const double expected = 0.5 * (best.column_sums[0] - best.column_sums[1]);
  CHECK(std::abs(curve.final_mean() - expected) <= 5.0 * curve.final_stderr());
  CHECK(curve.final_mean() == doctest::Approx(0.2 * static_cast<double>(T)).epsilon(0.05));
}

TEST_CASE("bernoulli and scale-free models") {
  const LossModel b = LossModel::bernoulli({0.0, 1.0, 0.5}, 8);
  CHECK_FALSE(b.length().has_value());
  double ones = 0.0;
  for (Round t = 1; t <= 4000; ++t) {
    CHECK(b.arm_loss(t, 0) == 0.0);
    CHECK(b.arm_loss(t, 1) == 1.0);
    ones += b.arm_loss(t, 2);
    CHECK(b.loss_vector(t)[2] == b.arm_loss(t, 2));
  }
  CHECK(ones / 4000.0 == doctest::Approx(0.5).epsilon(0.05));

  const LossModel s = LossModel::scale_free(b, 30.0, false);
  const LossModel g = LossModel::scale_free(b, 30.0, true);
  CHECK(s.range() == 30.0);
  for (Round t = 1; t <= 20; ++t) {
    CHECK(s.arm_loss(t, 2) == 30.0 * b.arm_loss(t, 2));
    CHECK(g.arm_loss(t, 2) == 30.0 * (2.0 * b.arm_loss(t, 2) - 1.0));
  }
  CHECK_THROWS_AS(LossModel::bernoulli({1.2}, 1), ConfigError);
  CHECK_THROWS_AS(LossModel::scale_free(b, 0.0, false), ConfigError);
}

TEST_CASE("linear loss models respect the loss set") {
  CHECK_THROWS_AS(LossModel::linear_sequence({{0.7, 0.7}}, ActionSet::kHypercube),
                  ConfigError);
  CHECK_NOTHROW(LossModel::linear_sequence({{0.7, 0.7}}, ActionSet::kBall));
  CHECK_THROWS_AS(LossModel::linear_sequence({{0.8, 0.8}}, ActionSet::kBall), ConfigError);
  for (auto set : {ActionSet::kHypercube, ActionSet::kBall}) {
    const LossModel m = LossModel::linear_stochastic({0.5, -0.4, 0.3}, 0.5, 2, set);
    for (Round t = 1; t <= 2000; ++t) {
      const Vec l = m.loss_vector(t);
      double dual = 0.0;
      for (double e : l) dual += set == ActionSet::kHypercube ? std::abs(e) : e * e;
      if (set == ActionSet::kBall) dual = std::sqrt(dual);
      CHECK(dual <= 1.0 + 1e-12);
    }
  }
  CHECK(action_set_from_name("ball") == ActionSet::kBall);
  CHECK_THROWS_AS(action_set_from_name("simplex"), ConfigError);
}

TEST_CASE("csv loaders") {
  const auto m = LossModel::matrix_from_csv(
      write_temp("m.csv", "t,arm_1,arm_2\n1,0.5,0.25\n2,1,0\n"));
  CHECK(m.length() == 2);
  CHECK(m.arm_loss(2, 0) == 1.0);

  const auto d = DelaySchedule::per_round_from_csv(write_temp("d.csv", "t,d\n1,3\n2,0\n"));
  CHECK(d.delay(1, 0) == 3);
  CHECK(d.delay(2, 5) == 0);
  CHECK_THROWS_AS(d.delay(3, 0), ConfigError);

  const auto a = DelaySchedule::arm_dependent_from_csv(
      write_temp("a.csv", "t,arm_1,arm_2\n1,0,9\n"));
  CHECK(a.delay(1, 1) == 9);

  CHECK_THROWS_AS(LossModel::matrix_from_csv("/nonexistent/banker.csv"), IoError);
  CHECK_THROWS_AS(LossModel::matrix_from_csv(write_temp("bad1.csv", "t,arm_1\n1,x\n")),
                  ConfigError);
  CHECK_THROWS_AS(LossModel::matrix_from_csv(write_temp("bad2.csv", "t,arm_1\n1,0.5,2\n")),
                  ConfigError);
  CHECK_THROWS_AS(LossModel::matrix_from_csv(write_temp("bad3.csv", "round,a\n1,0.5\n")),
                  ConfigError);
  CHECK_THROWS_AS(LossModel::matrix_from_csv(write_temp("bad4.csv", "t,arm_1\n1,1.5\n")),
                  ConfigError);
  CHECK_THROWS_AS(DelaySchedule::per_round_from_csv(write_temp("bad5.csv", "t,d\n1,2.5\n")),
                  ConfigError);
  CHECK_THROWS_AS(DelaySchedule::per_round_from_csv(write_temp("bad6.csv", "")),
                  ConfigError);
}

TEST_CASE("summation inequality on random sequences") {
  Rng rng(77);
  for (int rep = 0; rep < 200; ++rep) {
    double prefix = 0.0;
    double lhs = 0.0;
    const double scale = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    for (int t = 0; t < 300; ++t) {
      const double x = rng.uniform() < 0.2 ? 0.0 : scale * rng.uniform();
      prefix += x;
      lhs += x / std::sqrt(1.0 + prefix);
    }
    CHECK(lhs <= 2.0 * std::sqrt(1.0 + prefix));
  }
}
