#include "photon_discerner/adaptive_estimation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"

using namespace pdisc;

namespace {

// q(t) from the two-mode convolution, summed directly.
double oracle_rate(double N, double gamma, int t) {
  const double a = 0.5 * N * (1 + gamma), b = 0.5 * N * (1 - gamma);
  double below = 0.0;
  for (int n = 0; n < t; ++n) below += oracle::convolution_pmf(a, b, n);
  return 1.0 - below;
}

std::vector<RateObservation> exact_observations(double N, double gamma, std::vector<int> ts, double windows) {
  std::vector<RateObservation> obs;
  for (int t : ts) obs.push_back({t, windows, windows * oracle_rate(N, gamma, t)});
  return obs;
}

}  // namespace

TEST(ForwardQ12, MatchesDirectSums) {
  for (double N : {0.01, 0.3, 1.0, 4.0})
    for (double g : {0.0, 0.4, 0.95, 1.0}) {
      const auto q = forward_q12(N, g);
      EXPECT_NEAR(q.q1, oracle_rate(N, g, 1), 1e-13);
      EXPECT_NEAR(q.q2, oracle_rate(N, g, 2), 1e-12);
    }
}

TEST(ForwardQ12, FullyPolarizedIsThermal) {
  const auto q = forward_q12(1.0, 1.0);
  EXPECT_NEAR(q.q1, 0.5, 1e-15);
  EXPECT_NEAR(q.q2, 0.25, 1e-15);
}

TEST(InvertQ12, RoundTripOverGrid) {
  double worst = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double N = 0.01 * std::pow(1000.0, i / 40.0);
    for (int j = 0; j <= 40; ++j) {
      const double g = 0.05 + 0.94 * j / 40.0;
      const auto q = forward_q12(N, g);
      const auto r = invert_q12(q.q1, q.q2);
      EXPECT_FALSE(r.flagged()) << N << ' ' << g;
      worst = std::max({worst, std::abs(r.N - N) / N, std::abs(r.gamma - g) / g});
    }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(InvertQ12, FlagsAndErrors) {
  EXPECT_THROW(invert_q12(1.0, 0.5), DomainError);
  EXPECT_THROW(invert_q12(0.3, 0.4), DomainError);
  EXPECT_THROW(invert_q12(-0.1, 0.0), DomainError);
  const auto vac = invert_q12(0.0, 0.0);
  EXPECT_TRUE(vac.indeterminate);
  EXPECT_EQ(vac.N, 0.0);
  // a q2 far below the unpolarized value cannot come from any (N, gamma)
  const auto neg = invert_q12(0.2, 0.001);
  EXPECT_TRUE(neg.flagged());
  EXPECT_GE(neg.gamma, 0.0);
  EXPECT_LE(neg.gamma, 1.0);
}

TEST(Likelihood, RecoversExactRates) {
  for (auto [N, g] : {std::pair{0.5, 0.7}, {2.0, 0.3}, {0.1, 0.9}}) {
    const auto r = likelihood_estimate(exact_observations(N, g, {1, 2}, 1e6), TwoParamFamily{"dolp"});
    const auto inv = invert_q12(oracle_rate(N, g, 1), oracle_rate(N, g, 2));
    EXPECT_NEAR(r.N, inv.N, 1e-6 * std::max(1.0, N));
    EXPECT_NEAR(r.second, inv.gamma, 1e-6);
    EXPECT_FALSE(r.boundary);
  }
}

TEST(Likelihood, DisplacedFamilyWithOtherThresholds) {
  const auto src = DisplacedThermalDist(3.0, 0.4);
  std::vector<RateObservation> obs;
  const auto q = threshold_rates(src, 8);
  for (int t : {3, 7}) obs.push_back({t, 1e7, 1e7 * q[t]});
  const auto r = likelihood_estimate(obs, TwoParamFamily{"displaced"});
  EXPECT_NEAR(r.N, 3.0, 1e-4);
  EXPECT_NEAR(r.second, 0.4, 1e-4);
}

TEST(Likelihood, SingleWindowAndNoClicks) {
  const auto one = likelihood_estimate(std::vector<RateObservation>{{1, 1, 1}, {2, 1, 0}}, TwoParamFamily{"dolp"});
  EXPECT_TRUE(one.boundary);
  const auto none = likelihood_estimate(std::vector<RateObservation>{{1, 50, 0}, {2, 50, 0}}, TwoParamFamily{"dolp"});
  EXPECT_TRUE(none.no_clicks);
  EXPECT_EQ(none.N, 0.0);
  EXPECT_THROW(likelihood_estimate(std::vector<RateObservation>{}, TwoParamFamily{"dolp"}), DomainError);
  EXPECT_THROW(likelihood_estimate(std::vector<RateObservation>{{1, 10, 11}}, TwoParamFamily{"dolp"}), DomainError);
  EXPECT_THROW(likelihood_estimate(std::vector<RateObservation>{{1, 10, 1}}, TwoParamFamily{"thermal"}), ConfigError);
}

TEST(Likelihood, ConsistentUnderSimulation) {
  const DolpJointDist src(0.5, 0.7);
  std::vector<double> est;
  for (int s = 0; s < 40; ++s) {
    RngStream rng(100 + s);
    std::vector<ClickRecord> rec;
    for (int t : {2, 3}) {
      auto sub = rng.substream(t);
      rec.push_back(simulate_clicks(src, ThresholdResponse::ideal(t), 100000, sub));
    }
    est.push_back(likelihood_estimate(rec, TwoParamFamily{"dolp"}).second);
  }
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
  double var = 0.0;
  for (double e : est) var += (e - mean) * (e - mean);
  const double sd = std::sqrt(var / (est.size() - 1));
  EXPECT_NEAR(mean, 0.7, 4.0 * sd / std::sqrt(est.size()) + 1e-3);
}

TEST(Crlb, Values) {
  EXPECT_DOUBLE_EQ(crlb_std(0.25, 100), 0.2);
  EXPECT_DOUBLE_EQ(crlb_std(1.0, 1e4), 0.01);
  EXPECT_TRUE(std::isinf(crlb_std(0.0, 10)));
}

TEST(Crlb, EmpiricalSpreadRespectsBoundAndScales) {
  // gamma at known N from the t = 1 rate alone, so the scalar bound applies
  const double N = 5.0, g = 0.8;
  const DolpJointDist src(N, g);
  const double J = pd_fisher(src, 1, ParamSpec{Param::Gamma});
  auto invert_gamma = [&](double q1) {
    double lo = 0.0, hi = 1.0;  // q1 decreases with gamma
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      (forward_q12(N, mid).q1 > q1 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  std::vector<double> lx, ly;
  for (long long w : {1000LL, 10000LL, 100000LL}) {
    std::vector<double> est;
    for (int s = 0; s < 300; ++s) {
      RngStream rng(7, static_cast<std::uint64_t>(w) + s);
      est.push_back(invert_gamma(simulate_clicks(src, ThresholdResponse::ideal(1), w, rng).rate()));
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    const double sd = std::sqrt(var / (est.size() - 1));
    EXPECT_GT(sd, 0.85 * crlb_std(J, w)) << w;
    lx.push_back(std::log(static_cast<double>(w)));
    ly.push_back(std::log(sd));
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -0.5, 0.05);
}

TEST(Crlb, FisherMatrixMatchesScalarDiagonal) {
  const DolpJointDist d(0.8, 0.5);
  const auto g = rate_gradients(d, Param::Gamma, 4);
  for (int t = 1; t <= 4; ++t) {
    const auto F = binary_fisher_matrix(g.q[t], g.dq[t]);
    EXPECT_NEAR(F[0][0], pd_fisher(d, t, ParamSpec{Param::N}), 1e-9);
    EXPECT_NEAR(F[1][1], pd_fisher(d, t, ParamSpec{Param::Gamma}), 1e-9);
  }
  const auto inv = inverse_diagonal(Matrix2{{{2.0, 1.0}, {1.0, 1.0}}});
  EXPECT_DOUBLE_EQ(inv[0], 1.0);
  EXPECT_DOUBLE_EQ(inv[1], 2.0);
  EXPECT_TRUE(std::isinf(inverse_diagonal(Matrix2{{{1.0, 1.0}, {1.0, 1.0}}})[0]));
}

TEST(AdaptiveLoop, WeakSourceSettlesOnTwoPhotonThreshold) {
  AdaptiveConfig cfg;
  cfg.windows = 20000;
  cfg.max_iterations = 4;
  const auto trace = adaptive_loop(DolpJointDist(0.08, 0.6), cfg, RngStream(3));
  ASSERT_EQ(trace.iterations.size(), 4u);
  const auto last = trace.iterations.back().next_pair;
  EXPECT_TRUE(last[0] == 2 || last[1] == 2);
  EXPECT_EQ(trace.total_windows(), 4 * 2 * 20000);
}

TEST(AdaptiveLoop, DeterministicReplay) {
  AdaptiveConfig cfg;
  cfg.windows = 500;
  cfg.pair_rule = PairRule::JointCrlb;
  const auto a = adaptive_loop(DolpJointDist(0.7, 0.4), cfg, RngStream(11));
  const auto b = adaptive_loop(DolpJointDist(0.7, 0.4), cfg, RngStream(11));
  EXPECT_EQ(a.csv(), b.csv());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(AdaptiveLoop, FixedRuleKeepsPair) {
  AdaptiveConfig cfg;
  cfg.windows = 300;
  cfg.pair_rule = PairRule::Fixed;
  cfg.estimator = EstimatorMode::ClosedForm;
  const auto trace = adaptive_loop(DolpJointDist(0.5, 0.5), cfg, RngStream(2));
  for (const auto& it : trace.iterations) {
    EXPECT_EQ(it.pair, (std::array<int, 2>{1, 2}));
    EXPECT_EQ(it.records[0].windows, 300);
  }
}

TEST(AdaptiveLoop, StopsOnTarget) {
  AdaptiveConfig cfg;
  cfg.windows = 2000;
  cfg.max_iterations = 50;
  cfg.target_se = 0.08;
  const auto trace = adaptive_loop(DolpJointDist(1.0, 0.5), cfg, RngStream(5));
  EXPECT_TRUE(trace.target_met);
  EXPECT_LE(trace.iterations.back().se_second, 0.08);
  for (std::size_t i = 0; i + 1 < trace.iterations.size(); ++i) EXPECT_GT(trace.iterations[i].se_second, 0.08);
  // a looser target never needs more windows
  cfg.target_se = 0.15;
  EXPECT_LE(adaptive_loop(DolpJointDist(1.0, 0.5), cfg, RngStream(5)).total_windows(), trace.total_windows());
}

TEST(AdaptiveLoop, ConfigValidation) {
  AdaptiveConfig cfg;
  cfg.windows = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.initial_pair = {2, 2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.target_se = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(adaptive_loop(ThermalDist(1.0), AdaptiveConfig{}, RngStream(1)), ConfigError);
  EXPECT_THROW(parse_pair_rule("greedy"), ConfigError);
  EXPECT_EQ(parse_pair_rule("joint-crlb"), PairRule::JointCrlb);
}

TEST(AdaptiveTrace, Serialization) {
  AdaptiveConfig cfg;
  cfg.windows = 100;
  cfg.max_iterations = 2;
  const auto trace = adaptive_loop(DisplacedThermalDist(2.0, 0.5), cfg, RngStream(9));
  const auto csv = trace.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\r')), AdaptiveTrace::csv_header());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto j = nlohmann::json::parse(trace.to_json().dump());
  EXPECT_EQ(j["family"], "displaced");
  EXPECT_EQ(j["iterations"].size(), 2u);
  EXPECT_EQ(j["iterations"][1]["cumulative_windows"], 400);
}
