#include "photon_discerner/fisher_info.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace pdisc;

namespace {

const ParamSpec kN{Param::N};
const ParamSpec kGamma{Param::Gamma};
const ParamSpec kG{Param::G};

// Independent large-N efficiency curves; argmax found by golden section.
double golden_max(double (*f)(double), double a, double b, double* arg) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  for (int i = 0; i < 200; ++i) {
    if (f(c) > f(d)) b = d; else a = c;
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  *arg = 0.5 * (a + b);
  return f(*arg);
}
double thermal_curve(double x) { return x * x / (std::exp(x) - 1.0); }
double unpolarized_curve(double x) {
  return 8 * std::pow(x, 4) / ((2 * x + 1) * (std::exp(2 * x) - 2 * x - 1));
}

std::vector<PhotonDistribution> parameter_grid() {
  std::vector<PhotonDistribution> out;
  for (double N : {0.05, 0.5, 2.0, 8.0}) {
    out.emplace_back(ThermalDist(N));
    out.emplace_back(CoherentDist(N));
    for (double s : {0.2, 0.7}) {
      out.emplace_back(DolpJointDist(N, s));
      out.emplace_back(DisplacedThermalDist(N, s));
    }
  }
  return out;
}

}  // namespace

TEST(ShotNoiseFisher, ClosedForms) {
  // the tail beyond the cutoff is one lumped outcome, which costs up to ~1e-9 relative
  EXPECT_NEAR(shot_noise_fisher(ThermalDist(1.0), kN), 0.5, 1e-9);
  EXPECT_NEAR(shot_noise_fisher(CoherentDist(2.0), kN), 0.5, 1e-9);
  EXPECT_EQ(shot_noise_fisher(ThermalDist(1.0), kGamma), 0.0);
  EXPECT_EQ(shot_noise_fisher(FockDist(3), kN), 0.0);
  for (double N : {0.01, 0.3, 7.0, 60.0}) {
    EXPECT_NEAR(shot_noise_fisher(ThermalDist(N), kN) * N * (N + 1), 1.0, 1e-8);
    EXPECT_NEAR(shot_noise_fisher(CoherentDist(N), kN) * N, 1.0, 1e-8);
  }
}

TEST(PdFisher, ClosedForms) {
  const double e = std::exp(-1.0);
  EXPECT_NEAR(pd_fisher(CoherentDist(1.0), 1, kN), e * e / ((1 - e) * e), 1e-12);
  EXPECT_NEAR(pd_fisher(CoherentDist(1.0), 1, kN), 0.5819767068693265, 1e-12);
  EXPECT_NEAR(pd_fisher(ThermalDist(1.0), 1, kN), 0.25, 1e-12);
  EXPECT_EQ(pd_fisher(FockDist(2), 1, kN), 0.0);
  // thermal at general t: q = x^t, x = N/(N+1)
  for (double N : {0.5, 4.0}) {
    for (int t : {1, 3, 9}) {
      const double x = N / (N + 1), q = std::pow(x, t), dq = t * std::pow(x, t - 1) / ((N + 1) * (N + 1));
      const double J = dq * dq / (q * (1 - q));
      EXPECT_NEAR(pd_fisher(ThermalDist(N), t, kN), J, 1e-10 * J);
    }
  }
}

TEST(PdFisher, DegenerateChannelIsZero) {
  EXPECT_EQ(pd_fisher(FockDist(4), 2, kN), 0.0);
  EXPECT_EQ(pd_fisher(ThermalDist(0.0), 1, kN), 0.0);
}

TEST(PnrdFisher, MEqualsOneIsThresholdOne) {
  for (const auto& d : parameter_grid()) {
    for (const auto& spec : {kN, kGamma, kG}) {
      const double a = pnrd_fisher(d, 1, spec), b = pd_fisher(d, 1, spec);
      EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, b)) << d.family() << " " << to_string(spec.param);
    }
  }
}

TEST(PnrdFisher, ConvergesToShotNoiseAndIsMonotone) {
  for (const auto& d : parameter_grid()) {
    for (const auto& spec : {kN, kGamma, kG}) {
      const double J0 = shot_noise_fisher(d, spec);
      const int n_max = tail_cutoff(d);
      double prev = 0.0;
      for (int M = 1; M <= n_max + 2; M += std::max(1, n_max / 20)) {
        const double J = pnrd_fisher(d, M, spec);
        EXPECT_GE(J, prev - 1e-12 * std::max(1.0, J0));
        EXPECT_LE(J, J0 * (1 + 1e-10) + 1e-15);
        prev = J;
      }
      EXPECT_NEAR(pnrd_fisher(d, n_max, spec), J0, 1e-12 * std::max(1.0, J0));
      EXPECT_NEAR(pnrd_fisher(d, n_max + 5, spec), J0, 1e-12 * std::max(1.0, J0));
    }
  }
}

TEST(PdFisher, BoundedByShotNoiseAndBeatenByOptimum) {
  for (const auto& d : parameter_grid()) {
    for (const auto& spec : {kN, kGamma, kG}) {
      const double J0 = shot_noise_fisher(d, spec);
      const auto scan = optimal_threshold(d, spec);
      for (std::size_t t = 1; t < scan.J.size(); ++t) EXPECT_LE(scan.J[t], J0 * (1 + 1e-10) + 1e-15);
      EXPECT_GE(scan.J_max, pd_fisher(d, 1, spec));
    }
  }
}

TEST(OptimalThreshold, ThermalFixedPoint) {
  double x_star = 0.0;
  const double y_star = golden_max(thermal_curve, 0.5, 3.0, &x_star);
  EXPECT_NEAR(x_star, 1.5936, 1e-3);
  EXPECT_NEAR(y_star, 0.6476, 1e-3);
  const ThermalDist d(100.0);
  const auto scan = optimal_threshold(d, kN);
  EXPECT_GE(scan.t_opt, 158);
  EXPECT_LE(scan.t_opt, 160);
  EXPECT_NEAR(scan.J_max / shot_noise_fisher(d, kN), 0.648, 0.005);
  for (double N : {50.0, 100.0, 200.0}) {
    const ThermalDist dn(N);
    const auto s = optimal_threshold(dn, kN);
    const double eff = s.J_max / shot_noise_fisher(dn, kN);
    EXPECT_GE(s.t_opt / N, 1.55);
    EXPECT_LE(s.t_opt / N, 1.63);
    EXPECT_GE(eff, 0.64);
    EXPECT_LE(eff, 0.66);
  }
}

TEST(OptimalThreshold, CoherentFixedPoint) {
  const CoherentDist d(100.0);
  const auto scan = optimal_threshold(d, kN);
  EXPECT_NEAR(scan.t_opt / 100.0, 1.0, 0.02);
  EXPECT_NEAR(scan.J_max / shot_noise_fisher(d, kN), 2.0 / M_PI, 0.01);
}

TEST(OptimalThreshold, WeakDolpPrefersTwoPhotons) {
  EXPECT_EQ(optimal_threshold(DolpJointDist(0.1, 0.5), kGamma).t_opt, 2);
  for (double N : {0.01, 0.05, 0.1})
    for (double g = 0.1; g < 0.95; g += 0.1) EXPECT_EQ(optimal_threshold(DolpJointDist(N, g), kGamma).t_opt, 2);
}

TEST(OptimalThreshold, TiesGoToSmallerThreshold) {
  // Fock source: every threshold carries zero information
  const auto s = optimal_threshold(FockDist(3), kN, 6);
  EXPECT_EQ(s.t_opt, 1);
  EXPECT_EQ(s.J_max, 0.0);
}

TEST(AsymptoticCurves, UnpolarizedFixedPointAndLibraryCurves) {
  double x = 0.0;
  const double y = golden_max(unpolarized_curve, 0.3, 3.0, &x);
  EXPECT_NEAR(x, 1.29, 0.01);
  EXPECT_NEAR(y, 0.64, 0.01);
  for (double v : {0.1, 1.0, 2.5}) {
    EXPECT_NEAR(thermal_asymptotic_efficiency(v), thermal_curve(v), 1e-14);
    EXPECT_NEAR(unpolarized_asymptotic_efficiency(v), unpolarized_curve(v), 1e-12);
  }
}

TEST(AsymptoticCurves, FiniteNApproachesThermalCurve) {
  const ThermalDist d(400.0);
  const double J0 = shot_noise_fisher(d, kN);
  const auto scan = optimal_threshold(d, kN);
  for (int t : {200, 400, 640, 1000}) EXPECT_NEAR(scan.J[t] / J0, thermal_curve(t / 400.0), 5e-3);
}

TEST(AsymptoticCurves, UnpolarizedFiniteN) {
  const DolpJointDist d(300.0, 0.0);
  const double J0 = shot_noise_fisher(d, kN);
  const auto scan = optimal_threshold(d, kN);
  for (int t : {150, 387, 600}) EXPECT_NEAR(scan.J[t] / J0, unpolarized_curve(t / 300.0), 5e-3);
}

TEST(FiniteDifference, MatchesAnalyticFisher) {
  const ParamSpec fdN{Param::N, DerivativeMode::FiniteDifference};
  const ParamSpec fdGamma{Param::Gamma, DerivativeMode::FiniteDifference};
  const ParamSpec fdG{Param::G, DerivativeMode::FiniteDifference};
  for (const auto& d : parameter_grid()) {
    for (const auto& [a, f] : {std::pair{kN, fdN}, std::pair{kGamma, fdGamma}, std::pair{kG, fdG}}) {
      const double ja = shot_noise_fisher(d, a), jf = shot_noise_fisher(d, f);
      EXPECT_NEAR(jf, ja, 1e-5 * ja + 1e-14) << d.family();
      const double pa = pd_fisher(d, 2, a), pf = pd_fisher(d, 2, f);
      EXPECT_NEAR(pf, pa, 1e-5 * pa + 1e-14) << d.family();
    }
  }
}

TEST(FiniteDifference, BoundaryPointIsConfigError) {
  const ParamSpec fd{Param::Gamma, DerivativeMode::FiniteDifference};
  EXPECT_THROW(shot_noise_fisher(DolpJointDist(1.0, 1.0), fd), ConfigError);
  EXPECT_THROW(shot_noise_fisher(DolpJointDist(1.0, 0.0), fd), ConfigError);
  EXPECT_THROW(shot_noise_fisher(ThermalDist(0.0), ParamSpec{Param::N, DerivativeMode::FiniteDifference}), ConfigError);
}

TEST(FisherGamma, ZeroAtUnpolarized) {
  EXPECT_NEAR(shot_noise_fisher(DolpJointDist(1.0, 0.0), kGamma), 0.0, 1e-15);
}

TEST(ThresholdEquivNoise, CoherentLargeSignal) {
  const CoherentDist d(1000.0);
  EXPECT_NEAR(threshold_equiv_noise(d, 1000.0, numeric::kInf, kN), M_PI / 2 - 1, 0.02);
  double prev = numeric::kInf;
  for (double S = 1.0; S <= 100.0; S *= 1.2) {
    const double g = threshold_equiv_noise(d, 1000.0, S, kN);
    EXPECT_LT(g, prev);
    EXPECT_GE(g, 0.0);
    prev = g;
  }
  EXPECT_EQ(threshold_equiv_noise(FockDist(2), 2.0, 3.0, kN), numeric::kInf);
}

TEST(EfficiencyCurve, SmallNReachesShotNoiseAndCsv) {
  const auto rows = efficiency_curve("thermal", kN, {1e-4, 1e-3, 0.01, 1.0}, 0.0, 2);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_GT(rows[0].spd_efficiency, 0.999);
  EXPECT_GT(rows[0].efficiency, 0.999);
  for (const auto& r : rows) {
    EXPECT_GE(r.efficiency, 0.0);
    EXPECT_LE(r.efficiency, 1.0);
    EXPECT_LE(r.J, r.J0 * (1 + 1e-12));
  }
  EXPECT_EQ(FisherReport::csv_header().rfind("family,param,N,gamma_or_g,t_opt,J,J0,efficiency", 0), 0u);
  EXPECT_EQ(rows[3].csv_row().rfind("thermal,N,1,0,", 0), 0u);
}

TEST(EfficiencyCurve, ParallelMatchesSerial) {
  const std::vector<double> grid{0.1, 0.5, 1, 2, 5, 10};
  const auto a = efficiency_curve("dolp", kGamma, grid, 0.5, 1);
  const auto b = efficiency_curve("dolp", kGamma, grid, 0.5, 4);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(a[i].t_opt, b[i].t_opt);
    EXPECT_EQ(a[i].J, b[i].J);
  }
}
