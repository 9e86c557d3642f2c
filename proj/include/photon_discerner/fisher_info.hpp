#pragma once

// Fisher information carried by one counting window about a source parameter,
// for ideal photon-number resolution (the shot-noise limit), a threshold
// detector, and a saturating PNRD; plus the optimal-threshold search and the
// threshold-equivalent electronic noise of a sigmoid detector.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "detector_models.hpp"
#include "errors.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "photon_stats.hpp"

namespace pdisc {

enum class DerivativeMode { Analytic, FiniteDifference };

/// Which parameter to differentiate; the evaluation point is the distribution's own value.
struct ParamSpec {
  Param param = Param::N;
  DerivativeMode mode = DerivativeMode::Analytic;
};

namespace detail {

inline PmfTables fisher_tables_with_tail(const PhotonDistribution& d, const ParamSpec& spec,
                                         const DetectionModel& model, std::optional<int> n_max) {
  if (!d.depends_on(spec.param)) {
    auto t = make_tables(d, std::nullopt, model, n_max);
    t.dp.assign(t.p.size(), 0.0);
    t.dtail = 0.0;
    return t;
  }
  if (spec.mode == DerivativeMode::Analytic) return make_tables(d, spec.param, model, n_max);

  const double mu = d.param_value(spec.param);
  const auto [lo, hi] = d.param_domain(spec.param);
  const double h = 1e-4 * std::max(1.0, std::abs(mu));
  if (!(mu - h > lo && mu + h < hi)) {
    throw ConfigError("finite-difference derivative needs an interior point; " + std::string(to_string(spec.param)) +
                      "=" + std::to_string(mu) + " is within " + std::to_string(h) + " of the boundary");
  }
  auto t = make_tables(d, std::nullopt, model, n_max);
  const int n = t.n_max();
  auto at = [&](double v) { return make_tables(d.with_param(spec.param, v), std::nullopt, model, n).p; };
  const auto pp = at(mu + h), pm = at(mu - h), hp = at(mu + 0.5 * h), hm = at(mu - 0.5 * h);
  t.dp.resize(t.p.size());
  numeric::CompensatedSum s;
  for (std::size_t i = 0; i < t.p.size(); ++i) {
    const double wide = (pp[i] - pm[i]) / (2.0 * h);
    const double narrow = (hp[i] - hm[i]) / h;
    t.dp[i] = (4.0 * narrow - wide) / 3.0;
    s.add(t.dp[i]);
  }
  t.dtail = -s.value();
  return t;
}

}  // namespace detail

/// pmf tables with d/dmu p for the requested parameter on the truncated support.
/// The mass beyond n_max is lumped into the last bin, so every Fisher functional
/// below sees the same normalized distribution (outcome n_max reads "n >= n_max").
/// Finite differences use a Richardson-extrapolated central difference and
/// require an interior point.
inline PmfTables fisher_tables(const PhotonDistribution& d, const ParamSpec& spec, const DetectionModel& model = {},
                               std::optional<int> n_max = std::nullopt) {
  auto t = detail::fisher_tables_with_tail(d, spec, model, n_max);
  t.p.back() += t.tail;
  t.dp.back() += t.dtail;
  t.tail = 0.0;
  t.dtail = 0.0;
  return t;
}

/// sum (dp)^2/p over the truncated support, skipping p < 1e-300.
inline double shot_noise_fisher(const PmfTables& tab) {
  numeric::CompensatedSum j;
  for (std::size_t n = 0; n < tab.p.size(); ++n) {
    if (tab.p[n] < 1e-300) continue;
    j.add(tab.dp[n] * tab.dp[n] / tab.p[n]);
  }
  return j.value();
}

inline double shot_noise_fisher(const PhotonDistribution& d, const ParamSpec& spec, const DetectionModel& model = {}) {
  return shot_noise_fisher(fisher_tables(d, spec, model));
}

/// Fisher information of a binary channel with click probability q.
inline double binary_fisher(double q, double dq, double one_minus_q) {
  if (q <= 1e-15 || one_minus_q <= 1e-15) return 0.0;
  return dq * dq / (q * one_minus_q);
}

/// Per-threshold information of an ideal threshold detector for t = 1..t_max,
/// computed from one table. Element 0 is unused (t = 0 is not a detector).
inline std::vector<double> pd_fisher_scan(const PmfTables& tab, int t_max) {
  const auto q = upper_tails(tab.p, tab.tail);
  const auto dq = upper_tails(tab.dp, tab.dtail);
  std::vector<double> J(t_max + 1, 0.0);
  numeric::CompensatedSum below;
  const int n_max = tab.n_max();
  for (int t = 1; t <= t_max; ++t) {
    if (t - 1 <= n_max) below.add(tab.p[t - 1]);
    const int k = std::min(t, n_max + 1);
    J[t] = binary_fisher(q[k], dq[k], below.value());
  }
  return J;
}

inline double pd_fisher(const PhotonDistribution& d, const ThresholdResponse& r, const ParamSpec& spec,
                        const DetectionModel& model = {}) {
  const auto tab = fisher_tables(d, spec, model);
  if (r.is_ideal()) {
    const int t = r.t();
    if (t > tab.n_max() + 1) {
      // beyond the tabulated support the rate is the (negligible) tail mass
      return binary_fisher(tab.tail, tab.dtail, 1.0 - tab.tail);
    }
    return pd_fisher_scan(tab, t)[t];
  }
  const auto rs = rate_from_tables(tab, r);
  return binary_fisher(rs.q, rs.dq, 1.0 - rs.q);
}

inline double pd_fisher(const PhotonDistribution& d, int t, const ParamSpec& spec, const DetectionModel& model = {}) {
  return pd_fisher(d, ThresholdResponse::ideal(t), spec, model);
}

/// sum_{n<M} (dp)^2/p + (sum_{n>=M} dp)^2 / sum_{n>=M} p; an empty tail is skipped.
inline double pnrd_fisher(const PmfTables& tab, int M) {
  if (M < 1) throw DomainError("PNRD resolution M must be >= 1");
  numeric::CompensatedSum j;
  const int n_max = tab.n_max();
  for (int n = 0; n < std::min(M, n_max + 1); ++n) {
    if (tab.p[n] < 1e-300) continue;
    j.add(tab.dp[n] * tab.dp[n] / tab.p[n]);
  }
  numeric::CompensatedSum pt, dpt;
  pt.add(tab.tail);
  dpt.add(tab.dtail);
  for (int n = M; n <= n_max; ++n) {
    pt.add(tab.p[n]);
    dpt.add(tab.dp[n]);
  }
  if (pt.value() > 1e-300) j.add(dpt.value() * dpt.value() / pt.value());
  return j.value();
}

inline double pnrd_fisher(const PhotonDistribution& d, int M, const ParamSpec& spec, const DetectionModel& model = {}) {
  if (M < 1) throw DomainError("PNRD resolution M must be >= 1");
  // for M beyond the table every outcome is already resolved
  return pnrd_fisher(fisher_tables(d, spec, model), M);
}

struct ThresholdScan {
  int t_opt = 1;
  double J_max = 0.0;
  std::vector<double> J;  // J[t] for t = 1..t_max; J[0] unused
};

/// Exhaustive scan over t in [1, t_max]; ties go to the smaller threshold.
/// t_max defaults to the tail-rule cutoff.
inline ThresholdScan optimal_threshold(const PhotonDistribution& d, const ParamSpec& spec,
                                       std::optional<int> t_max = std::nullopt, const DetectionModel& model = {}) {
  const auto tab = fisher_tables(d, spec, model);
  const int tm = std::max(1, t_max ? *t_max : tab.n_max());
  ThresholdScan out;
  out.J = pd_fisher_scan(tab, tm);
  for (int t = 1; t <= tm; ++t) {
    if (out.J[t] > out.J_max) {
      out.J_max = out.J[t];
      out.t_opt = t;
    }
  }
  return out;
}

/// gamma_e = J0/J - 1 for a sigmoid threshold detector; +inf when J = 0.
inline double threshold_equiv_noise(const PhotonDistribution& d, double t, double sharpness, const ParamSpec& spec,
                                    const DetectionModel& model = {}) {
  const auto tab = fisher_tables(d, spec, model);
  const double J0 = shot_noise_fisher(tab);
  const auto r = ThresholdResponse::flux(t, sharpness);
  double J = 0.0;
  if (r.is_ideal()) {
    J = r.t() <= tab.n_max() + 1 ? pd_fisher_scan(tab, r.t())[r.t()] : 0.0;
  } else {
    const auto rs = rate_from_tables(tab, r);
    J = binary_fisher(rs.q, rs.dq, 1.0 - rs.q);
  }
  if (!(J > 0.0)) return numeric::kInf;
  return std::max(0.0, J0 / J - 1.0);
}

/// Information and gamma_e for a measured (tabulated) click-probability curve.
inline double response_fisher(const PhotonDistribution& d, const TabulatedResponse& r, const ParamSpec& spec,
                              const DetectionModel& model = {}) {
  const auto rs = rate_from_tables(fisher_tables(d, spec, model), r);
  return binary_fisher(rs.q, rs.dq, 1.0 - rs.q);
}

inline double response_equiv_noise(const PhotonDistribution& d, const TabulatedResponse& r, const ParamSpec& spec,
                                   const DetectionModel& model = {}) {
  const auto tab = fisher_tables(d, spec, model);
  const auto rs = rate_from_tables(tab, r);
  const double J = binary_fisher(rs.q, rs.dq, 1.0 - rs.q);
  if (!(J > 0.0)) return numeric::kInf;
  return std::max(0.0, shot_noise_fisher(tab) / J - 1.0);
}

/// Large-N efficiency of a threshold at t = xN for single-mode thermal light.
inline double thermal_asymptotic_efficiency(double x) {
  if (x <= 0.0) return 0.0;
  return x * x / std::expm1(x);
}

/// Large-N efficiency for unpolarized (two equal thermal modes) light, estimating N.
inline double unpolarized_asymptotic_efficiency(double x) {
  if (x <= 0.0) return 0.0;
  const double y = 2.0 * x;
  // e^{2x} - 2x - 1 via expm1 to keep small x accurate
  return 8.0 * std::pow(x, 4) / ((y + 1.0) * (std::expm1(y) - y));
}

inline constexpr double kCoherentAsymptoticEfficiency = 2.0 / numeric::kPi;

struct FisherReport {
  std::string family;
  Param param = Param::N;
  double N = 0.0;
  double second = 0.0;  // gamma for dolp, g for displaced, 0 otherwise
  int t_opt = 1;
  double J = 0.0;
  double J0 = 0.0;
  double efficiency = 0.0;
  double spd_efficiency = 0.0;  // single-photon detector (t = 1) baseline

  static std::string csv_header() { return "family,param,N,gamma_or_g,t_opt,J,J0,efficiency,spd_efficiency"; }
  [[nodiscard]] std::string csv_row() const {
    std::ostringstream os;
    os.precision(12);
    os << family << ',' << to_string(param) << ',' << N << ',' << second << ',' << t_opt << ',' << J << ',' << J0
       << ',' << efficiency << ',' << spd_efficiency;
    return os.str();
  }
};

inline FisherReport fisher_report(const PhotonDistribution& d, const ParamSpec& spec, const DetectionModel& model = {},
                                  std::optional<int> t_max = std::nullopt) {
  const auto tab = fisher_tables(d, spec, model);
  const int tm = std::max(1, t_max ? *t_max : tab.n_max());
  const auto J = pd_fisher_scan(tab, tm);
  FisherReport r;
  r.family = d.family();
  r.param = spec.param;
  r.N = d.mean();
  if (const auto* dj = d.get_if<DolpJointDist>()) r.second = dj->gamma();
  if (const auto* dt = d.get_if<DisplacedThermalDist>()) r.second = dt->g();
  if (d.get_if<FockDist>() == nullptr) r.N = d.param_value(Param::N);
  for (int t = 1; t <= tm; ++t) {
    if (J[t] > r.J) {
      r.J = J[t];
      r.t_opt = t;
    }
  }
  r.J0 = shot_noise_fisher(tab);
  r.efficiency = r.J0 > 0.0 ? std::clamp(r.J / r.J0, 0.0, 1.0) : 0.0;
  r.spd_efficiency = r.J0 > 0.0 ? std::clamp(J[1] / r.J0, 0.0, 1.0) : 0.0;
  return r;
}

/// One report per mean photon number in `grid`, with the second parameter held fixed.
inline std::vector<FisherReport> efficiency_curve(std::string_view family, const ParamSpec& spec,
                                                  const std::vector<double>& grid, double second = 0.0,
                                                  unsigned threads = 1, const DetectionModel& model = {}) {
  for (double N : grid)
    if (!(N > 0.0) || !std::isfinite(N)) throw DomainError("efficiency grid points must be finite and > 0");
  std::vector<FisherReport> rows(grid.size());
  parallel_for(grid.size(), threads,
               [&](std::size_t i) { rows[i] = fisher_report(make_distribution(family, grid[i], second), spec, model); });
  return rows;
}

}  // namespace pdisc
