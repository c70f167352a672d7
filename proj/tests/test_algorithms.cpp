#include <cmath>
#include <vector>

#include "doctest.h"

#include "banker/algorithms.hpp"
#include "banker/environment.hpp"
#include "banker/verify.hpp"

using namespace banker;

namespace {

// The harness loop without the bookkeeping: release, ingest, decide, play.
template <class P>
std::vector<Decision> drive(P& policy, Environment& env, Round horizon) {
  std::vector<Decision> out;
  for (Round t = 1; t <= horizon; ++t) {
    policy.ingest(env.release(t));
    Decision d = policy.decide(t);
    if (policy.is_linear()) {
      env.play_point(t, d.action);
    } else {
      env.play_arm(t, d.arm);
    }
    out.push_back(std::move(d));
  }
  return out;
}

bool on_simplex(const Vec& x) {
  double s = 0.0;
  for (double e : x) {
    if (!(e > 0.0)) return false;
    s += e;
  }
  return std::abs(s - 1.0) <= 1e-9;
}

MabConfig mab(MabAlgorithm algorithm, std::size_t arms, Round horizon) {
  MabConfig c;
  c.algorithm = algorithm;
  c.arms = arms;
  c.horizon = horizon;
  return c;
}

}  // namespace

TEST_CASE("tinf scale examples") {
  CHECK(tinf_scale(1, 0, 0.0) == 1.0);
  const double expected = 1.0 / (0.5 + 2.0 * std::sqrt(std::log(5.0) / 4.0));
  CHECK(tinf_scale(4, 2, 4.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(tinf_scale(4, 2, 4.0) == doctest::Approx(0.5654).epsilon(1e-4));
  double prev = tinf_scale(10, 0, 30.0);
  for (std::int64_t d = 1; d < 20; ++d) {
    const double s = tinf_scale(10, d, 30.0);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("sftinf scale examples") {
  const double s1 = sftinf_scale(0, 1.0, 1.0);
  CHECK(s1 == doctest::Approx(1.0 / std::sqrt(std::log(4.0) / 4.0)).epsilon(1e-14));
  CHECK(s1 == doctest::Approx(1.6987).epsilon(1e-4));
  // Doubling the range estimate moves D by a factor of four as well.
  CHECK(sftinf_scale(0, 4.0, 2.0) > s1);
  CHECK(sftinf_scale(3, 1.0, 1.0) == doctest::Approx(s1 / 4.0).epsilon(1e-14));
}

TEST_CASE("sflbinf scale examples") {
  const SflbinfScale s = sflbinf_scale(0, 1.0, 1.0, 1.0, 2, 100);
  const double base =
      1.0 / (std::sqrt(std::log(4.0) / 4.0) * std::sqrt(2.0 * std::log(100.0)));
  CHECK(s.base == doctest::Approx(base).epsilon(1e-14));
  CHECK(s.base == doctest::Approx(0.5596).epsilon(1e-3));
  CHECK(s.guard);
  CHECK(s.sigma == 2.0);
  const SflbinfScale off = sflbinf_scale(1000, 1.0, 1.0, 1.0, 2, 100);
  CHECK_FALSE(off.guard);
  CHECK(off.sigma == off.base);
  for (double lhat : {0.5, 3.0, 40.0}) {
    const SflbinfScale g = sflbinf_scale(0, lhat * lhat, 10.0, lhat, 3, 1000);
    REQUIRE(g.guard);
    CHECK(g.sigma >= 2.0 * lhat);
  }
}

TEST_CASE("bolo scale examples") {
  const BoloScale s = bolo_scale(1, 0, 0.0, 2, 100);
  CHECK(s.base == doctest::Approx(1.0 / std::sqrt(std::log(100.0) / 2.0)).epsilon(1e-14));
  CHECK(s.base == doctest::Approx(0.6594).epsilon(1e-3));
  CHECK(s.sigma == 16.0);
  for (Round t : {1, 10, 1000, 100000}) {
    for (std::int64_t d : {0, 3, 50}) {
      CHECK(bolo_scale(t, d, 10.0 * static_cast<double>(d), 4, 100000).sigma >= 32.0);
    }
  }
  // Without the clamp the base is exposed, and it shrinks as T grows.
  CHECK(bolo_scale(50, 0, 0.0, 2, 1000, 1.0, false).sigma ==
        bolo_scale(50, 0, 0.0, 2, 1000).base);
  CHECK(bolo_scale(50, 0, 0.0, 2, 100000).base < bolo_scale(50, 0, 0.0, 2, 1000).base);
  CHECK(log_horizon(1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("inverse cdf arm sampling") {
  const Vec x{0.2, 0.3, 0.5};
  CHECK(sample_arm(x, 0.0) == 0);
  CHECK(sample_arm(x, 0.1) == 0);
  CHECK(sample_arm(x, 0.25) == 1);
  CHECK(sample_arm(x, 0.6) == 2);
  CHECK(sample_arm(x, 0.9999999) == 2);
  CHECK(sample_arm(Vec{0.5, 0.5, 0.0}, 0.9999999) == 1);
}

TEST_CASE("first decision is the default point for every variant") {
  for (auto a : {MabAlgorithm::kTinf, MabAlgorithm::kSfTinf, MabAlgorithm::kSfLbInf,
                 MabAlgorithm::kConstantScale}) {
    MabPolicy p(mab(a, 4, 10), 5);
    const Decision d = p.decide(1);
    CHECK(d.x == Vec(4, 0.25));
    CHECK(d.investment == d.sigma);
  }
}

TEST_CASE("constant scale without delay matches vanilla mirror descent") {
  const Regularizer reg = Regularizer::tsallis_half(5);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const LossModel loss = LossModel::bernoulli({0.5, 0.4, 0.6, 0.3, 0.55}, seed);
    Environment env_a(loss, DelaySchedule::zero());
    Environment env_b(loss, DelaySchedule::zero());
    MabConfig c = mab(MabAlgorithm::kConstantScale, 5, 300);
    c.constant_scale = 50.0;
    MabPolicy policy(c, seed);
    const auto decisions = drive(policy, env_a, 300);
    const VanillaTrace v = vanilla_omd_run(reg, reg.default_point(), 50.0, env_b, 300, seed);
    for (std::size_t t = 0; t < decisions.size(); ++t) {
      CHECK(decisions[t].arm == v.arms[t]);
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(decisions[t].x[i] - v.x[t][i]) <= 1e-9);
      }
    }
  }
}

TEST_CASE("tinf ingest builds the importance estimate") {
  MabConfig c = mab(MabAlgorithm::kConstantScale, 2, 10);
  c.constant_scale = 2.0;
  MabPolicy p(c, 3);
  const Decision d = p.decide(1);
  const std::vector<FeedbackEvent> ev{{1, 1.0}};
  p.ingest(ev);
  const MabRoundRecord& r = p.history().front();
  CHECK(r.status == SavingStatus::kArrived);
  CHECK(r.estimate == 2.0);
  Vec lhat(2, 0.0);
  lhat[d.arm] = 2.0;
  const OmdStep step = omd_step(p.regularizer(), d.x, lhat, 2.0);
  CHECK(r.z == step.z);
  CHECK(p.ledger()->entry(1).status == SavingStatus::kArrived);
}

TEST_CASE("estimator and skip predicates") {
  const Vec e = mab_estimator(Vec{0.25, 0.75}, 0, 1.0);
  CHECK(e == Vec{4.0, 0.0});
  CHECK_THROWS_AS(mab_estimator(Vec{0.25, 0.75}, 2, 1.0), DomainError);
  CHECK_THROWS_AS(mab_estimator(Vec{0.0, 1.0}, 0, 1.0), DomainError);

  CHECK(mab_skip(MabAlgorithm::kSfTinf, 3.7, 1.0, 5.0));
  CHECK_FALSE(mab_skip(MabAlgorithm::kSfTinf, 1.0, 1.0, 5.0));
  CHECK(mab_skip(MabAlgorithm::kSfLbInf, -0.6, 1.0, 1.0));
  CHECK_FALSE(mab_skip(MabAlgorithm::kSfLbInf, -0.4, 1.0, 1.0));
  CHECK(mab_skip(MabAlgorithm::kSfLbInf, 1.5, 1.0, 10.0));
  CHECK(mab_skip(MabAlgorithm::kSfLbInf, -1.5, 1.0, 10.0));
  CHECK_FALSE(mab_skip(MabAlgorithm::kTinf, 100.0, 1.0, 1.0));
  CHECK_FALSE(mab_skip(MabAlgorithm::kConstantScale, -100.0, 1.0, 1.0));
}

TEST_CASE("sftinf skips an out-of-range loss and doubles the estimate") {
  MabPolicy p(mab(MabAlgorithm::kSfTinf, 2, 10), 1);
  p.decide(1);
  const std::vector<FeedbackEvent> ev{{1, 3.7}};
  p.ingest(ev);
  CHECK(p.skip_count() == 1);
  CHECK(p.range_estimate() == doctest::Approx(7.4));
  CHECK(p.history().front().status == SavingStatus::kSkipped);
  CHECK(p.ledger()->entry(1).status == SavingStatus::kSkipped);
}

TEST_CASE("sflbinf skips a very negative loss inside the range") {
  MabPolicy p(mab(MabAlgorithm::kSfLbInf, 2, 100), 1);
  p.decide(1);
  p.decide(2);
  // Backlog 2 with experienced delay 4 turns the guard off.
  const Decision d = p.decide(3);
  REQUIRE(0.6 * d.sigma <= 1.0);
  const std::vector<FeedbackEvent> ev{{3, -0.6 * d.sigma}};
  p.ingest(ev);
  CHECK(p.skip_count() == 1);
  CHECK(p.range_estimate() == doctest::Approx(std::max(1.0, 1.2 * d.sigma)));
}

TEST_CASE("policy state errors") {
  MabPolicy p(mab(MabAlgorithm::kTinf, 3, 10), 1);
  p.decide(1);
  const std::vector<FeedbackEvent> unknown{{7, 0.5}};
  CHECK_THROWS_AS(p.ingest(unknown), StateError);
  const std::vector<FeedbackEvent> first{{1, 0.5}};
  p.ingest(first);
  CHECK_THROWS_AS(p.ingest(first), StateError);
  CHECK_THROWS_AS(p.decide(1), OrderError);
  MabConfig bad = mab(MabAlgorithm::kConstantScale, 3, 10);
  bad.constant_scale = 0.0;
  CHECK_THROWS_AS(MabPolicy(bad, 1), ConfigError);
}

TEST_CASE("scale-free bookkeeping on a delayed run") {
  const LossModel loss = LossModel::scale_free(
      LossModel::bernoulli({0.5, 0.3, 0.7}, 9), 20.0, false);
  for (auto a : {MabAlgorithm::kSfTinf, MabAlgorithm::kSfLbInf}) {
    Environment env(loss, DelaySchedule::uniform(4));
    MabPolicy p(mab(a, 3, 400), 2);
    const auto decisions = drive(p, env, 400);
    double lhat = 0.0;
    double d_running = 0.0;
    for (const MabRoundRecord& r : p.history()) {
      CHECK(r.lhat >= lhat);
      lhat = r.lhat;
      CHECK(on_simplex(r.x));
      if (a == MabAlgorithm::kSfTinf) {
        d_running += static_cast<double>(r.backlog + 1) * r.lhat * r.lhat;
        CHECK(r.weighted_delay == doctest::Approx(d_running).epsilon(1e-12));
      }
    }
    CHECK(p.range_estimate() >= 1.0);
  }
}

TEST_CASE("every action is a distribution on a long delayed run") {
  const LossModel loss = LossModel::bernoulli({0.5, 0.2, 0.8, 0.4}, 4);
  for (auto a : {MabAlgorithm::kTinf, MabAlgorithm::kSfTinf, MabAlgorithm::kSfLbInf}) {
    Environment env(loss, DelaySchedule::geometric(0.1, 8, 10000));
    MabConfig c = mab(a, 4, 1000);
    c.record_history = false;
    MabPolicy p(c, 11);
    for (const Decision& d : drive(p, env, 1000)) CHECK(on_simplex(d.x));
    CHECK(std::abs(p.ledger()->balance_residual()) <= 1e-9);
  }
}

TEST_CASE("bolo samples on the Dikin ellipsoid") {
  BoloConfig c;
  c.dim = 1;
  c.horizon = 10;
  BoloPolicy p(c, 1);
  const Decision d = p.decide(1);
  CHECK(d.x == Vec{0.0});
  CHECK(std::abs(d.action[0]) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  for (auto set : {ActionSet::kHypercube, ActionSet::kBall}) {
    BoloConfig b;
    b.dim = 3;
    b.horizon = 3000;
    b.set = set;
    BoloPolicy policy(b, 7);
    Environment env(LossModel::linear_stochastic({0.3, -0.2, 0.1}, 0.2, 5, set),
                    DelaySchedule::uniform(3));
    drive(policy, env, 3000);
    for (const BoloRoundRecord& r : policy.history()) {
      CHECK(r.sigma >= 24.0);
      Vec h(3);
      for (std::size_t i = 0; i < 3; ++i) h[i] = r.action[i] - r.x[i];
      CHECK(hessian_quadratic_form(policy.regularizer(), r.x, h) ==
            doctest::Approx(1.0).epsilon(1e-9));
      if (set == ActionSet::kHypercube) {
        for (double a : r.action) CHECK(std::abs(a) < 1.0);
      } else {
        double n2 = 0.0;
        for (double a : r.action) n2 += a * a;
        CHECK(n2 < 1.0);
      }
    }
  }
}

TEST_CASE("bolo estimator is unbiased over every outcome") {
  for (double eps : {-1.0, 1.0}) {
    const double a = eps / std::sqrt(2.0);
    const Vec e = bolo_estimator(0.5 * a, 1, eps, 2.0, Vec{1.0});
    CHECK(e[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  const Vec l{0.3, -0.25, 0.15};
  Vec mean(3, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double eps : {-1.0, 1.0}) {
      Vec dir(3, 0.0);
      dir[i] = 1.0;
      const double lhat = l[i] * eps / std::sqrt(2.0);
      const Vec est = bolo_estimator(lhat, 3, eps, 2.0, dir);
      for (std::size_t j = 0; j < 3; ++j) mean[j] += est[j] / 6.0;
    }
  }
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(mean[j] - l[j]) <= 1e-12);
}

TEST_CASE("bolo zero loss keeps the point") {
  BoloConfig c;
  c.dim = 2;
  c.horizon = 10;
  BoloPolicy p(c, 2);
  const Decision d = p.decide(1);
  const std::vector<FeedbackEvent> ev{{1, 0.0}};
  p.ingest(ev);
  const BoloRoundRecord& r = p.history().front();
  CHECK(r.estimate == Vec(2, 0.0));
  CHECK(r.z == d.x);
}

TEST_CASE("vanilla mirror descent behaviour") {
  const Regularizer reg = Regularizer::tsallis_half(2);
  std::vector<Vec> rows(200, Vec{1.0, 0.0});
  Environment env(LossModel::matrix(rows), DelaySchedule::zero());
  const VanillaTrace v = vanilla_omd_run(reg, reg.default_point(), 5.0, env, 200, 1);
  for (std::size_t t = 1; t < v.x.size(); ++t) CHECK(v.x[t][0] <= v.x[t - 1][0]);
  CHECK(v.x.back()[0] < 0.5);

  std::vector<Vec> zeros(50, Vec{0.0, 0.0});
  Environment env0(LossModel::matrix(zeros), DelaySchedule::zero());
  for (const Vec& x : vanilla_omd_run(reg, reg.default_point(), 5.0, env0, 50, 1).x) {
    CHECK(x == reg.default_point());
  }

  Environment delayed(LossModel::matrix(zeros), DelaySchedule::uniform(2));
  CHECK_THROWS_AS(vanilla_omd_run(reg, reg.default_point(), 5.0, delayed, 50, 1),
                  ConfigError);
}

TEST_CASE("theorem audit inputs from a policy history") {
  const LossModel loss = LossModel::scale_free(LossModel::bernoulli({0.4, 0.6}, 3), 5.0, false);
  Environment env(loss, DelaySchedule::uniform(3));
  MabPolicy p(mab(MabAlgorithm::kSfTinf, 2, 100), 4);
  drive(p, env, 100);
  const auto steps = audit_steps(p);
  REQUIRE(steps.size() == 100);
  for (const Vec& y : {Vec{1.0, 0.0}, Vec{0.0, 1.0}, Vec{0.5, 0.5}}) {
    const AuditRecord a = theorem_audit(p.regularizer(), p.default_action(),
                                        p.ledger()->total_investment(), steps, y);
    CHECK(a.slack() >= -1e-9 * std::max(1.0, std::abs(a.rhs)));
  }
  MabConfig c = mab(MabAlgorithm::kTinf, 2, 10);
  c.record_history = false;
  MabPolicy bare(c, 1);
  bare.decide(1);
  CHECK_THROWS_AS(audit_steps(bare), StateError);
}

TEST_CASE("property suite passes and its mutations are caught") {
  for (const PropertyResult& r : run_verify({})) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
  VerifyOptions spend;
  spend.spend_skipped_savings = true;
  for (const PropertyResult& r : run_verify(spend)) {
    INFO(r.name);
    CHECK(r.passed == (r.name != "ledger.lemma2"));
  }
  VerifyOptions clamp;
  clamp.filter = "algorithms.";
  clamp.drop_bolo_clamp = true;
  for (const PropertyResult& r : run_verify(clamp)) {
    INFO(r.name);
    CHECK(r.passed == (r.name != "algorithms.bolo_clamp"));
  }
  VerifyOptions none;
  none.filter = "no-such-property";
  CHECK_THROWS_AS(run_verify(none), ConfigError);
}
