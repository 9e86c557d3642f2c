#include "photon_discerner/nanowire.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "photon_discerner/fisher_info.hpp"

using namespace pdisc;

namespace {

NanowireParams example() {
  std::ifstream f(PDISC_SOURCE_DIR "/configs/nanowire_example.json");
  return NanowireParams::from_json(nlohmann::json::parse(f));
}

NanowireParams coarse() {
  auto p = example();
  p.nx = p.ny = 32;
  return p;
}

// Histories for n = 0..6 on the shipped grid, built once for the whole suite.
const std::vector<ProfileHistory>& histories() {
  static const std::vector<ProfileHistory> h = [] {
    const auto p = example();
    std::vector<ProfileHistory> out;
    for (int n = 0; n <= 6; ++n) out.push_back(hotspot_history(p, n));
    return out;
  }();
  return h;
}

}  // namespace

TEST(NanowireParams, Validation) {
  auto p = example();
  EXPECT_NO_THROW(p.validate());
  p.xi = p.width;
  EXPECT_THROW(p.validate(), ConfigError);
  p = example();
  p.dt = 2 * p.max_stable_dt();
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(evolve_hotspot(p, 1, 1e-5), ConfigError);
  p = example();
  p.tau_r = -1;
  EXPECT_THROW(p.validate(), ConfigError);

  auto j = example().to_json();
  EXPECT_EQ(NanowireParams::from_json(j).to_json(), j);
  j.erase("eps0");
  EXPECT_THROW(NanowireParams::from_json(j), ConfigError);
  j = example().to_json();
  j["bogus"] = 1;
  EXPECT_THROW(NanowireParams::from_json(j), ConfigError);
}

TEST(Hotspot, NoPhotonsNothingHappens) {
  const auto p = coarse();
  const auto traj = evolve_hotspot(p, 0, 1e-5, std::nullopt, 50);
  for (const auto& s : traj) {
    for (double v : s.C_e) EXPECT_EQ(v, 0.0);
    for (double v : s.C_qp) EXPECT_EQ(v, 0.0);
    for (double v : s.n_se) EXPECT_EQ(v, p.n_se0);
    EXPECT_EQ(s.barrier.U_max, traj.front().barrier.U_max);
  }
}

TEST(Hotspot, NoConversionLeavesSuperfluidAlone) {
  auto p = coarse();
  p.varsigma = 0.0;
  const auto traj = evolve_hotspot(p, 3, 1e-5, std::nullopt, 50);
  ASSERT_GT(traj.size(), 2u);
  EXPECT_NE(traj.front().C_e, traj.back().C_e);
  for (const auto& s : traj) {
    for (double v : s.C_qp) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(s.barrier.U_max, traj.front().barrier.U_max);
  }
}

TEST(Hotspot, ConservationAndBounds) {
  const auto p = example();
  const double I_b = 1.8e-5;
  const auto traj = evolve_hotspot(p, 4, I_b, std::nullopt, 100);
  EXPECT_NEAR(traj.front().hot_electrons, 4.0, 1e-9);
  for (const auto& s : traj) {
    EXPECT_NEAR(s.hot_electrons, 4.0, 4.0 * 1e-6) << s.time;
    EXPECT_NEAR(s.total_current, I_b, 1e-10 * I_b) << s.time;
    for (std::size_t k = 0; k < s.n_se.size(); ++k) {
      EXPECT_GE(s.C_e[k], 0.0);
      EXPECT_GE(s.C_qp[k], 0.0);
      ASSERT_GE(s.n_se[k], 0.0);
      ASSERT_LE(s.n_se[k], p.n_se0);
    }
  }
  // the hot spot actually depletes the superfluid at the centre
  const auto& r = traj.back().ns_ratio;
  EXPECT_LT(r[r.size() / 2], 0.99);
  EXPECT_DOUBLE_EQ(r.front(), r[1]);
}

TEST(Barrier, UniformStateMatchesAntiderivative) {
  auto p = example();
  const double W = p.width;
  const int cells = 510;  // 512 nodes with the two edges
  std::vector<double> x{-W / 2};
  for (int i = 0; i < cells; ++i) x.push_back(-W / 2 + (i + 0.5) * W / cells);
  x.push_back(W / 2);
  const std::vector<double> ones(x.size(), 1.0), zero(x.size(), 0.0);
  const auto b = vortex_barrier(x, ones, zero, p);
  ASSERT_GT(b.x_nu.size(), 500u);
  const double k = std::acos(-1.0) / W;
  for (std::size_t i = 1; i < b.x_nu.size(); ++i) {
    const double exact = -std::log(std::abs(std::cos(k * b.x_nu[i]))) +
                         std::log(std::abs(std::cos(std::acos(-1.0) * (p.xi - W) / (2 * W))));
    EXPECT_NEAR(b.tan_term[i], exact, 1e-4 * std::abs(exact)) << b.x_nu[i];
    EXPECT_DOUBLE_EQ(b.U[i], -b.tan_term[i]);
    EXPECT_EQ(b.current_term[i], 0.0);
  }
  EXPECT_NEAR(b.x_nu.front(), (p.xi - W) / 2, 1e-18);
  EXPECT_LT(b.x_nu.back(), W / 2);
  // the peak of the zero-current barrier sits in the middle of the strip
  EXPECT_NEAR(b.U_max, -std::log(std::sin(std::acos(-1.0) * p.xi / (2 * W))), 1e-4);
}

TEST(Barrier, CurrentLowersIt) {
  const auto p = example();
  const double W = p.width;
  std::vector<double> x{-W / 2};
  for (int i = 0; i < 128; ++i) x.push_back(-W / 2 + (i + 0.5) * W / 128);
  x.push_back(W / 2);
  const std::vector<double> ones(x.size(), 1.0), zero(x.size(), 0.0), j(x.size(), 1e-5 / W);
  const auto b0 = vortex_barrier(x, ones, zero, p);
  const auto b1 = vortex_barrier(x, ones, j, p);
  for (std::size_t i = 0; i < b0.x_nu.size(); ++i) EXPECT_LT(b1.U[i], b0.U[i]);
  EXPECT_LT(b1.U_max, b0.U_max);
  EXPECT_THROW(vortex_barrier({0.0, 1.0}, {1, 1}, {0, 0}, p), DomainError);
}

TEST(Barrier, MorePhotonsSuppressMore) {
  const auto p = example();
  const auto& h = histories();
  const double I_b = 1.7e-5;
  for (std::size_t k : {h[0].times.size() / 4, h[0].times.size() / 2, h[0].times.size() - 1}) {
    double prev = numeric::kInf;
    for (int n = 0; n <= 5; ++n) {
      const auto& r = h[n].ratio[k];
      const double u = vortex_barrier(h[n].x, r, detail::redistribute_current(h[n].x, r, I_b), p).U_max;
      EXPECT_LE(u, prev + 1e-12) << "n=" << n << " step " << k;
      prev = u;
    }
  }
}

TEST(ClickProbability, BoundsAndDoubleMonotonicity) {
  const auto p = example();
  const auto& h = histories();
  EXPECT_EQ(click_probability(h[3], p, 0.0), 0.0);
  EXPECT_THROW(click_probability(h[3], p, -1.0), DomainError);
  std::vector<double> biases;
  for (int i = 0; i <= 40; ++i) biases.push_back(1.5e-5 + i * 0.125e-6);
  std::vector<std::vector<double>> P(6, std::vector<double>(biases.size()));
  for (int n = 0; n <= 5; ++n)
    for (std::size_t i = 0; i < biases.size(); ++i) {
      P[n][i] = click_probability(h[n], p, biases[i]);
      EXPECT_GE(P[n][i], 0.0);
      EXPECT_LE(P[n][i], 1.0);
      if (i > 0) EXPECT_GE(P[n][i], P[n][i - 1]) << n << ' ' << biases[i];
      if (n > 0) EXPECT_GE(P[n][i], P[n - 1][i]) << n << ' ' << biases[i];
    }
  // the sweep spans the staircase
  EXPECT_LT(P[5].front(), 0.5);
  EXPECT_GT(P[0].back(), 0.5);
}

TEST(ClickProbability, VanishedBarrierSaturates) {
  auto p = example();
  p.eps0 *= 4;
  EXPECT_EQ(click_probability(histories()[0], p, 1e-4), 1.0);
}

TEST(SwitchingCurrent, StaircaseAndResidual) {
  const auto p = example();
  const auto& h = histories();
  double prev = numeric::kInf;
  for (int n = 0; n <= 5; ++n) {
    const auto s = switching_current(h[n], p);
    EXPECT_TRUE(s.reachable);
    EXPECT_LT(s.I_sw, prev) << n;
    EXPECT_LE(std::abs(s.probability - 0.999), 1e-3);
    EXPECT_LE(std::abs(click_probability(h[n], p, s.I_sw) - 0.999), 1e-3);
    // just below the bracket the target is missed
    EXPECT_LT(click_probability(h[n], p, s.I_sw * (1 - 2e-4)), 0.999);
    prev = s.I_sw;
  }
  auto low = p;
  low.bias_ceiling = 1e-6;
  EXPECT_FALSE(switching_current(h[0], low).reachable);
}

TEST(SwitchingCurrent, PlateauExists) {
  const auto p = example();
  const auto& h = histories();
  const double I0 = switching_current(h[0], p).I_sw;
  bool found = false;
  for (double f = 0.80; f <= 1.0 && !found; f += 0.002) {
    bool ok = click_probability(h[0], p, f * I0) <= 1e-3;
    for (int n = 1; n <= 6 && ok; ++n) ok = click_probability(h[n], p, f * I0) >= 0.999;
    found = ok;
  }
  EXPECT_TRUE(found);
}

TEST(BiasForThreshold, OneAndTwo) {
  const auto p = example();
  const auto b1 = bias_for_threshold(p, 1);
  EXPECT_FALSE(b1.interval_empty);
  ASSERT_EQ(b1.P.size(), 4u);
  EXPECT_GE(b1.P[1], 0.999);
  EXPECT_LE(b1.P[0], 0.001);
  EXPECT_LT(b1.normalized, 1.0);

  const auto b2 = bias_for_threshold(p, 2);
  EXPECT_FALSE(b2.interval_empty);
  EXPECT_GE(b2.P[2], 0.999);
  EXPECT_LE(b2.P[1], 0.5);
  EXPECT_LT(b2.normalized, b1.normalized);
  EXPECT_NEAR(b2.contrast, b2.P[2] - b2.P[1], 0.0);
  EXPECT_THROW(bias_for_threshold(p, 0), DomainError);

  // the realized response is usable as a detector
  const auto r = b2.response();
  EXPECT_EQ(r(10), b2.P.back());
  const ThermalDist d(2.0);
  const double J = response_fisher(d, r, ParamSpec{Param::N});
  const double gamma = response_equiv_noise(d, r, ParamSpec{Param::N});
  EXPECT_GT(J, 0.0);
  EXPECT_TRUE(std::isfinite(gamma));
  EXPECT_GT(gamma, 0.0);
}

TEST(BiasSchedule, StrictlyDecreasing) {
  const auto s = bias_schedule(example(), 5, 2);
  ASSERT_EQ(s.rows.size(), 5u);
  EXPECT_TRUE(s.strictly_decreasing());
  for (const auto& [t, f] : s.rows) {
    EXPECT_GT(f, 0.0);
    EXPECT_LT(f, 1.0);
  }
  EXPECT_EQ(s.csv().substr(0, 16), "t,bias_fraction\r");
}

TEST(Sweep, DeterministicAcrossThreads) {
  const auto p = coarse();
  const std::vector<double> f{0.85, 0.9, 0.95, 1.0};
  const auto a = click_sweep(p, 3, f, 1);
  const auto b = click_sweep(p, 3, f, 3);
  ASSERT_EQ(a.size(), 16u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].photons, b[i].photons);
    EXPECT_EQ(a[i].P, b[i].P);
  }
  EXPECT_GE(a[3].P, 0.999);  // n = 0 at I_SW,0
}

TEST(Convergence, GridDoubling) {
  auto p = example();
  std::vector<double> u;
  for (int n : {32, 64, 128}) {
    p.nx = p.ny = n;
    p.dt = 0.8 * (0.25 * std::pow(p.width / 128, 2) / p.D_e);  // shared step isolates the spatial error
    const auto h = hotspot_history(p, 3);
    u.push_back(barrier_maxima(h, p, 1.7e-5).back());
  }
  const double order = std::log2(std::abs(u[0] - u[1]) / std::abs(u[1] - u[2]));
  RecordProperty("order", std::to_string(order));
  EXPECT_GE(order, 1.0) << u[0] << ' ' << u[1] << ' ' << u[2];
}
