#include "photon_discerner/photon_stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"

using namespace pdisc;

TEST(ThermalPmf, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(thermal_pmf(0.0, 0), 1.0);
  EXPECT_NEAR(thermal_pmf(0.1, 0), 1.0 / 1.1, 1e-15);
  EXPECT_NEAR(thermal_pmf(1.0, 2), 0.125, 1e-15);
  EXPECT_EQ(thermal_pmf(0.0, 3), 0.0);
}

TEST(ThermalPmf, LargeCountsDoNotUnderflowPrematurely) {
  // N = 1000, n = 20000: the power form underflows/overflows, log space does not.
  const double p = thermal_pmf(1000.0, 20000);
  const double expected = std::exp(20000 * std::log(1000.0 / 1001.0) - std::log(1001.0));
  EXPECT_NEAR(p / expected, 1.0, 1e-10);
}

TEST(ThermalPmf, RejectsNegativeInputs) {
  EXPECT_THROW(thermal_pmf(-0.1, 0), DomainError);
  EXPECT_THROW(thermal_pmf(1.0, -1), DomainError);
}

TEST(CoherentPmf, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(coherent_pmf(0.0, 0), 1.0);
  EXPECT_NEAR(coherent_pmf(0.1, 0), std::exp(-0.1), 1e-15);
  EXPECT_NEAR(coherent_pmf(1.0, 1), std::exp(-1.0), 1e-15);
  EXPECT_THROW(coherent_pmf(-1.0, 0), DomainError);
}

TEST(CoherentPmf, MatchesProductFormAtLargeMean) {
  for (int n : {900, 1000, 1100}) {
    double logp = -1000.0 + n * std::log(1000.0) - std::lgamma(n + 1.0);
    EXPECT_NEAR(coherent_pmf(1000.0, n) / std::exp(logp), 1.0, 1e-9) << n;
  }
}

TEST(DolpPmf, ReferenceValues) {
  EXPECT_NEAR(dolp_pmf(1.0, 1.0, 2), 0.125, 1e-15);
  EXPECT_NEAR(dolp_pmf(1.0, 0.0, 0), 1.0 / 2.25, 1e-15);
  // two-mode p(1) with N_par = 0.75, N_perp = 0.25
  const double D = 2.25 - 0.0625;
  EXPECT_NEAR(dolp_pmf(1.0, 0.5, 1), 1.375 / (D * D), 1e-14);
  EXPECT_NEAR(dolp_pmf(1.0, 0.5, 1), 0.2873469, 1e-7);
}

TEST(DolpPmf, MatchesExplicitConvolution) {
  for (double N : {0.01, 0.3, 1.0, 7.5}) {
    for (double g : {0.0, 1e-7, 1e-3, 0.2, 0.5, 0.9, 1.0}) {
      const DolpJointDist d(N, g);
      const auto table = d.pmf_table(40);
      for (int n = 0; n <= 40; ++n) {
        const double ref = oracle::convolution_pmf(d.n_parallel(), d.n_perpendicular(), n);
        EXPECT_NEAR(d.pmf(n), ref, 1e-14 + 1e-11 * ref) << N << " " << g << " " << n;
        EXPECT_NEAR(table[n], ref, 1e-14 + 1e-11 * ref) << N << " " << g << " " << n;
      }
    }
  }
}

TEST(DolpPmf, SymmetricInTheTwoModes) {
  for (int n = 0; n < 20; ++n) {
    EXPECT_DOUBLE_EQ(two_mode_thermal_pmf(0.7, 0.2, n), two_mode_thermal_pmf(0.2, 0.7, n));
  }
}

TEST(DolpPmf, DomainChecks) {
  EXPECT_THROW(dolp_pmf(1.0, 1.2, 0), DomainError);
  EXPECT_THROW(dolp_pmf(1.0, -0.1, 0), DomainError);
  EXPECT_THROW(dolp_pmf(-1.0, 0.5, 0), DomainError);
}

TEST(DisplacedThermalPmf, Limits) {
  EXPECT_NEAR(displaced_thermal_pmf(1.0, 1.0, 0), std::exp(-1.0), 1e-14);
  EXPECT_NEAR(displaced_thermal_pmf(1.0, 0.0, 0), 0.5, 1e-14);
  EXPECT_NEAR(displaced_thermal_pmf(1.0, 0.5, 0), std::exp(-1.0 / 3.0) / 1.5, 1e-12);
}

TEST(DisplacedThermalPmf, QuadratureAgreesWithSeries) {
  for (double N : {0.1, 1.0, 3.0, 20.0}) {
    for (double g : {0.001, 0.01, 0.3, 0.7, 0.99, 0.9999}) {
      const DisplacedThermalDist d(N, g);
      const int nmax = tail_cutoff(d);
      for (int n = 0; n <= nmax; n += std::max(1, nmax / 15)) {
        const auto q = d.pmf_quadrature(n);
        EXPECT_NEAR(q.value, d.pmf_series(n), 1e-9) << N << " " << g << " " << n;
      }
    }
  }
}

TEST(DisplacedThermalPmf, VacuumOverlapClosedForm) {
  for (double N : {0.5, 2.0, 10.0}) {
    for (double g : {0.1, 0.5, 0.9}) {
      const double nth = N * (1 - g);
      const double expected = std::exp(-N * g / (1 + nth)) / (1 + nth);
      EXPECT_NEAR(displaced_thermal_pmf(N, g, 0), expected, 1e-12);
    }
  }
}

TEST(FockDist, DeltaMass) {
  const FockDist f(3);
  EXPECT_EQ(f.pmf(3), 1.0);
  EXPECT_EQ(f.pmf(2), 0.0);
  EXPECT_EQ(f.cdf(2), 0.0);
  EXPECT_EQ(f.cdf(3), 1.0);
}

TEST(Distributions, LimitEquivalence) {
  for (double N : {0.05, 1.0, 4.0}) {
    double worst_g1 = 0, worst_g0 = 0, worst_th = 0, worst_po = 0;
    for (int n = 0; n <= 50; ++n) {
      worst_g1 = std::max(worst_g1, std::abs(dolp_pmf(N, 1.0, n) - thermal_pmf(N, n)));
      const double h = N / 2;
      const double negbin = (n + 1) * std::pow(h, n) / std::pow(h + 1, n + 2);
      worst_g0 = std::max(worst_g0, std::abs(dolp_pmf(N, 0.0, n) - negbin));
      worst_th = std::max(worst_th, std::abs(displaced_thermal_pmf(N, 0.0, n) - thermal_pmf(N, n)));
      worst_po = std::max(worst_po, std::abs(displaced_thermal_pmf(N, 1.0, n) - coherent_pmf(N, n)));
    }
    EXPECT_LT(worst_g1, 1e-12);
    EXPECT_LT(worst_g0, 1e-12);
    EXPECT_LT(worst_th, 1e-12);
    EXPECT_LT(worst_po, 1e-12);
  }
}

TEST(Distributions, NormalizationWithinTailRule) {
  std::vector<PhotonDistribution> grid;
  for (double N : {0.0, 0.01, 0.5, 3.0, 40.0}) {
    grid.emplace_back(ThermalDist(N));
    grid.emplace_back(CoherentDist(N));
    for (double g : {0.0, 0.4, 1.0}) {
      grid.emplace_back(DolpJointDist(N, g));
      grid.emplace_back(DisplacedThermalDist(N, g));
    }
  }
  grid.emplace_back(FockDist(4));
  for (const auto& d : grid) {
    const int nmax = tail_cutoff(d);
    const auto p = d.pmf_table(nmax);
    pdisc::numeric::CompensatedSum s;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      s.add(v);
    }
    EXPECT_GE(s.value(), 1.0 - 1e-12) << d.family() << " mean " << d.mean();
    EXPECT_LE(nmax, static_cast<int>(std::ceil(30 * (d.mean() + 1))));
  }
}

TEST(Distributions, CdfMonotone) {
  const PhotonDistribution ds[] = {ThermalDist(2.0), CoherentDist(2.0), DolpJointDist(2.0, 0.3),
                                   DisplacedThermalDist(2.0, 0.3)};
  for (const auto& d : ds) {
    double prev = 0.0;
    for (int n = 0; n < 30; ++n) {
      const double c = d.cdf(n);
      EXPECT_GE(c, prev - 1e-15);
      prev = c;
    }
  }
}

TEST(Distributions, MomentsAndMandelQ) {
  EXPECT_DOUBLE_EQ(mandel_q(CoherentDist(2.0)), 0.0);
  EXPECT_NEAR(mandel_q(ThermalDist(0.3)), 0.3, 1e-15);
  EXPECT_NEAR(mandel_q(DolpJointDist(1.0, 0.0)), 0.5, 1e-15);
  EXPECT_EQ(mandel_q(ThermalDist(0.0)), 0.0);

  // moments against the tabulated pmf
  const PhotonDistribution ds[] = {DolpJointDist(1.3, 0.6), DisplacedThermalDist(2.5, 0.4)};
  for (const auto& d : ds) {
    const auto p = d.pmf_table(tail_cutoff(d));
    double m1 = 0, m2 = 0;
    for (std::size_t n = 0; n < p.size(); ++n) {
      m1 += n * p[n];
      m2 += double(n) * n * p[n];
    }
    EXPECT_NEAR(m1, d.mean(), 1e-9);
    EXPECT_NEAR(m2 - m1 * m1, d.variance(), 1e-8);
  }
}

TEST(Distributions, AnalyticDerivativesMatchFiniteDifferences) {
  struct Case {
    PhotonDistribution d;
    Param p;
  };
  std::vector<Case> cases;
  for (double N : {0.05, 0.8, 3.0, 12.0}) {
    cases.push_back({ThermalDist(N), Param::N});
    cases.push_back({CoherentDist(N), Param::N});
    for (double g : {0.1, 0.5, 0.85}) {
      cases.push_back({DolpJointDist(N, g), Param::N});
      cases.push_back({DolpJointDist(N, g), Param::Gamma});
      cases.push_back({DisplacedThermalDist(N, g), Param::N});
      cases.push_back({DisplacedThermalDist(N, g), Param::G});
    }
  }
  for (const auto& c : cases) {
    const double mu = c.d.param_value(c.p);
    const int nmax = std::min(tail_cutoff(c.d), 60);
    const auto dp = c.d.dpmf_table(c.p, nmax);
    for (int n = 0; n <= nmax; ++n) {
      const double fd = oracle::richardson_derivative(
          [&](double v) { return c.d.with_param(c.p, v).pmf_table(n)[n]; }, mu);
      const double scale = std::max(std::abs(fd), 1e-10);
      EXPECT_NEAR(dp[n], fd, 1e-6 * scale + 1e-10)
          << c.d.family() << " " << to_string(c.p) << " mu=" << mu << " n=" << n;
    }
  }
}

TEST(Distributions, ParameterAbsentGivesZeroDerivative) {
  EXPECT_EQ(ThermalDist(1.0).dpmf(Param::Gamma, 2), 0.0);
  EXPECT_EQ(FockDist(2).dpmf(Param::N, 2), 0.0);
  EXPECT_FALSE(PhotonDistribution(ThermalDist(1.0)).depends_on(Param::G));
}

TEST(Sampling, DeterministicCases) {
  RngStream rng(7);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_photon_number(FockDist(3), rng), 3);
    EXPECT_EQ(sample_photon_number(ThermalDist(0.0), rng), 0);
  }
}

TEST(Sampling, ReproducibleForSameSeed) {
  const PhotonDistribution d = DisplacedThermalDist(2.0, 0.3);
  RngStream a(42, 5), b(42, 5), c(42, 6);
  std::vector<int> xa, xb, xc;
  for (int i = 0; i < 200; ++i) {
    xa.push_back(d.sample(a));
    xb.push_back(d.sample(b));
    xc.push_back(d.sample(c));
  }
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
}

namespace {

void expect_frequencies_match(const PhotonDistribution& d, int draws, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<int> counts(11, 0);
  for (int i = 0; i < draws; ++i) {
    const int n = d.sample(rng);
    if (n <= 10) ++counts[n];
  }
  for (int n = 0; n <= 10; ++n) {
    const double p = d.pmf(n);
    EXPECT_NEAR(double(counts[n]) / draws, p, oracle::binomial_band(p, draws))
        << d.family() << " n=" << n;
  }
}

}  // namespace

TEST(Sampling, DolpJointFrequenciesMatchPmf) { expect_frequencies_match(DolpJointDist(1.0, 0.5), 1'000'000, 11); }

TEST(Sampling, DisplacedThermalMixtureMatchesQuadrature) {
  expect_frequencies_match(DisplacedThermalDist(2.0, 0.6), 1'000'000, 12);
}

TEST(Sampling, ThermalAndCoherentFrequencies) {
  expect_frequencies_match(ThermalDist(0.7), 400'000, 13);
  expect_frequencies_match(CoherentDist(1.7), 400'000, 14);
}
