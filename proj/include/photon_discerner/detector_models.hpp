#pragma once

// Detector response functions and what they do to a photon-number source:
// counting rates, simulated click records, PNRD outcome statistics, and the
// inverse map from threshold rates back to a photon-number distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "photon_stats.hpp"
#include "rng.hpp"

namespace pdisc {

/// Threshold detector. Ideal mode is a hard step a(n,t) = [n >= t]; flux mode is
/// the sigmoid a(n,t) = 1/(1 + exp(-S (n - t)/sqrt(t))).
class ThresholdResponse {
 public:
  static ThresholdResponse ideal(int t) {
    if (t < 1) throw DomainError("ideal threshold must be an integer >= 1");
    return ThresholdResponse(static_cast<double>(t), numeric::kInf);
  }

  /// An infinite sharpness collapses to the ideal step at ceil(t).
  static ThresholdResponse flux(double t, double sharpness) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("flux threshold must be finite and > 0");
    if (!(sharpness >= 0.0)) throw DomainError("sharpness must be >= 0");
    if (std::isinf(sharpness)) return ideal(static_cast<int>(std::ceil(t)));
    return ThresholdResponse(t, sharpness);
  }

  [[nodiscard]] bool is_ideal() const { return std::isinf(S_); }
  [[nodiscard]] double threshold() const { return t_; }
  [[nodiscard]] double sharpness() const { return S_; }
  /// Integer threshold of an ideal response.
  [[nodiscard]] int t() const { return static_cast<int>(t_); }

  [[nodiscard]] double operator()(int n) const {
    if (is_ideal()) return n >= t() ? 1.0 : 0.0;
    return numeric::logistic(S_ * (static_cast<double>(n) - t_) / std::sqrt(t_));
  }

 private:
  ThresholdResponse(double t, double S) : t_(t), S_(S) {}
  double t_;
  double S_;
};

/// Photon-number-resolving detector saturating at M photons.
class PnrdResponse {
 public:
  explicit PnrdResponse(int M) : M_(M) {
    if (M < 1) throw DomainError("PNRD resolution M must be >= 1");
  }
  [[nodiscard]] int M() const { return M_; }
  [[nodiscard]] int operator()(int n) const { return std::min(n, M_); }

 private:
  int M_;
};

/// Measured click probabilities a(n) for n = 0..K; a(n) = a(K) beyond the table.
class TabulatedResponse {
 public:
  explicit TabulatedResponse(std::vector<double> a) : a_(std::move(a)) {
    if (a_.empty()) throw DomainError("tabulated response needs at least one entry");
    for (double v : a_)
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("click probabilities must lie in [0, 1]");
  }
  [[nodiscard]] double operator()(int n) const {
    return a_[static_cast<std::size_t>(std::clamp<long>(n, 0, static_cast<long>(a_.size()) - 1))];
  }
  [[nodiscard]] const std::vector<double>& values() const { return a_; }

 private:
  std::vector<double> a_;
};

/// Optional non-ideal detection: Bernoulli loss with efficiency eta, then
/// additive Poisson dark counts with mean `dark_mean` per window.
struct DetectionModel {
  double efficiency = 1.0;
  double dark_mean = 0.0;

  [[nodiscard]] bool ideal() const { return efficiency == 1.0 && dark_mean == 0.0; }
  void validate() const {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw DomainError("detection efficiency must lie in (0, 1]");
    if (!(dark_mean >= 0.0) || !std::isfinite(dark_mean)) throw DomainError("dark count mean must be >= 0");
  }
};

struct ClickRecord {
  long long windows = 0;
  long long clicks = 0;
  double threshold = 0.0;
  double sharpness = numeric::kInf;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  [[nodiscard]] double rate() const { return static_cast<double>(clicks) / static_cast<double>(windows); }

  static std::string csv_header() { return "threshold,windows,clicks,seed"; }
  [[nodiscard]] std::string csv_row() const {
    std::string t = threshold == std::floor(threshold) ? std::to_string(static_cast<long long>(threshold))
                                                       : std::to_string(threshold);
    return t + "," + std::to_string(windows) + "," + std::to_string(clicks) + "," + std::to_string(seed);
  }
};

// ---------------------------------------------------------------------------
// Truncated tables shared by rate and Fisher computations.

/// p(0..n_max) and optionally d/dmu p, plus the mass beyond n_max.
struct PmfTables {
  std::vector<double> p;
  std::vector<double> dp;  // empty when no parameter was requested
  double tail = 0.0;       // 1 - sum p, clamped at 0
  double dtail = 0.0;      // -sum dp

  [[nodiscard]] int n_max() const { return static_cast<int>(p.size()) - 1; }
  [[nodiscard]] bool has_derivative() const { return !dp.empty(); }
};

namespace detail {

/// Applies loss then dark counts to a distribution over 0..n (a linear map,
/// so it is also valid for derivative tables).
inline std::vector<double> apply_detection(const std::vector<double>& in, const DetectionModel& m) {
  std::vector<double> out = in;
  const int n_max = static_cast<int>(in.size()) - 1;
  if (m.efficiency < 1.0) {
    std::fill(out.begin(), out.end(), 0.0);
    const double le = std::log(m.efficiency), l1e = std::log1p(-m.efficiency);
    for (int n = 0; n <= n_max; ++n) {
      if (in[n] == 0.0) continue;
      for (int k = 0; k <= n; ++k) {
        const double lw = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * le +
                          (n - k) * l1e;
        out[k] += in[n] * std::exp(lw);
      }
    }
  }
  if (m.dark_mean > 0.0) {
    std::vector<double> d(n_max + 1);
    for (int k = 0; k <= n_max; ++k) d[k] = detail::poisson_pmf(m.dark_mean, k);
    std::vector<double> conv(n_max + 1, 0.0);
    for (int n = 0; n <= n_max; ++n)
      for (int k = 0; k <= n; ++k) conv[n] += out[k] * d[n - k];
    out = std::move(conv);
  }
  return out;
}

inline int detection_cutoff(const PhotonDistribution& d, const DetectionModel& m) {
  int n = tail_cutoff(d);
  if (m.dark_mean > 0.0) n += tail_cutoff(CoherentDist(m.dark_mean));
  return n;
}

}  // namespace detail

/// Tables of the detected photon-number distribution truncated by the tail rule
/// (or at `n_max` when given). `param` requests the derivative table.
inline PmfTables make_tables(const PhotonDistribution& d, std::optional<Param> param = std::nullopt,
                             const DetectionModel& model = {}, std::optional<int> n_max = std::nullopt) {
  model.validate();
  const int n = n_max ? *n_max : detail::detection_cutoff(d, model);
  PmfTables t;
  t.p = d.pmf_table(n);
  if (param) t.dp = d.dpmf_table(*param, n);
  if (!model.ideal()) {
    t.p = detail::apply_detection(t.p, model);
    if (param) t.dp = detail::apply_detection(t.dp, model);
  }
  numeric::CompensatedSum s, ds;
  for (double v : t.p) s.add(v);
  for (double v : t.dp) ds.add(v);
  t.tail = std::max(0.0, 1.0 - s.value());
  t.dtail = -ds.value();
  return t;
}

/// Upper-tail sums q(t) = sum_{n >= t} p(n) for t = 0..n_max+1 (with the mass
/// beyond the table folded in). Summed from the top to keep tiny rates accurate.
inline std::vector<double> upper_tails(const std::vector<double>& p, double tail) {
  std::vector<double> q(p.size() + 1);
  numeric::CompensatedSum s;
  s.add(tail);
  q[p.size()] = s.value();
  for (std::size_t i = p.size(); i-- > 0;) {
    s.add(p[i]);
    q[i] = s.value();
  }
  return q;
}

/// Counting rate and its parameter derivative for one response, from tables.
struct RateAndSlope {
  double q = 0.0;
  double dq = 0.0;
};

inline RateAndSlope rate_from_tables(const PmfTables& tab, const ThresholdResponse& r) {
  RateAndSlope out;
  const int n_max = tab.n_max();
  if (r.is_ideal()) {
    const int t = r.t();
    if (t > n_max) {
      out.q = tab.tail;
      out.dq = tab.dtail;
      return out;
    }
    numeric::CompensatedSum q, dq;
    q.add(tab.tail);
    dq.add(tab.dtail);
    for (int n = n_max; n >= t; --n) {
      q.add(tab.p[n]);
      if (tab.has_derivative()) dq.add(tab.dp[n]);
    }
    out.q = std::clamp(q.value(), 0.0, 1.0);
    out.dq = tab.has_derivative() ? dq.value() : 0.0;
    return out;
  }
  numeric::CompensatedSum q, dq;
  for (int n = 0; n <= n_max; ++n) {
    const double a = r(n);
    q.add(a * tab.p[n]);
    if (tab.has_derivative()) dq.add(a * tab.dp[n]);
  }
  const double a_tail = r(n_max + 1);
  q.add(a_tail * tab.tail);
  dq.add(a_tail * tab.dtail);
  out.q = std::clamp(q.value(), 0.0, 1.0);
  out.dq = tab.has_derivative() ? dq.value() : 0.0;
  return out;
}

inline RateAndSlope rate_from_tables(const PmfTables& tab, const TabulatedResponse& r) {
  RateAndSlope out;
  numeric::CompensatedSum q, dq;
  for (int n = 0; n <= tab.n_max(); ++n) {
    q.add(r(n) * tab.p[n]);
    if (tab.has_derivative()) dq.add(r(n) * tab.dp[n]);
  }
  q.add(r(tab.n_max() + 1) * tab.tail);
  dq.add(r(tab.n_max() + 1) * tab.dtail);
  out.q = std::clamp(q.value(), 0.0, 1.0);
  out.dq = tab.has_derivative() ? dq.value() : 0.0;
  return out;
}

/// Probability that a window produces a click.
inline double counting_rate(const PhotonDistribution& d, const ThresholdResponse& r,
                            const DetectionModel& model = {}) {
  if (r.is_ideal() && model.ideal()) {
    // exact closed forms where the family has one, otherwise the tail table
    const int t = r.t();
    if (const auto* f = d.get_if<FockDist>()) return f->m() >= t ? 1.0 : 0.0;
    const double below = d.cdf(t - 1);
    if (below < 0.5) return 1.0 - below;
  }
  return rate_from_tables(make_tables(d, std::nullopt, model), r).q;
}

/// Draws one detected photon number.
template <class Rng>
int sample_detected(const PhotonDistribution& d, const DetectionModel& model, Rng& rng) {
  int n = d.sample(rng);
  if (model.efficiency < 1.0 && n > 0) n = std::binomial_distribution<int>(n, model.efficiency)(rng);
  if (model.dark_mean > 0.0) n += std::poisson_distribution<int>(model.dark_mean)(rng);
  return n;
}

/// Simulates `windows` independent counting windows. In flux mode each window
/// clicks with probability a(n, t).
inline ClickRecord simulate_clicks(const PhotonDistribution& d, const ThresholdResponse& r, long long windows,
                                   RngStream& rng, const DetectionModel& model = {}) {
  if (windows < 1) throw DomainError("windows must be >= 1");
  model.validate();
  ClickRecord rec;
  rec.windows = windows;
  rec.threshold = r.threshold();
  rec.sharpness = r.sharpness();
  rec.seed = rng.seed();
  rec.stream = rng.stream();
  for (long long w = 0; w < windows; ++w) {
    const int n = sample_detected(d, model, rng);
    if (r.is_ideal()) {
      rec.clicks += n >= r.t() ? 1 : 0;
    } else {
      rec.clicks += rng.uniform() < r(n) ? 1 : 0;
    }
  }
  return rec;
}

/// Outcome distribution of a PNRD saturating at M: p(0), ..., p(M-1), P(n >= M).
inline std::vector<double> pnrd_outcome_distribution(const PhotonDistribution& d, int M,
                                                     const DetectionModel& model = {}) {
  const PnrdResponse resp(M);
  const auto tab = make_tables(d, std::nullopt, model, std::max(detail::detection_cutoff(d, model), M));
  const auto q = upper_tails(tab.p, tab.tail);
  std::vector<double> out(resp.M() + 1);
  for (int k = 0; k < M; ++k) out[k] = tab.p[k];
  out[M] = q[M];
  return out;
}

struct ReconstructedPmf {
  std::vector<double> pmf;          // n = 0..T-1
  bool clamped = false;             // some difference was negative and set to 0
  bool non_monotone = false;        // a rate increase exceeded the tolerance
  std::vector<int> clamped_indices;
};

/// p(0) = 1 - q(1), p(n) = q(n) - q(n+1). `rates[i]` is q(i+1). With `windows`
/// given, rate increases within 4 binomial standard errors count as noise.
inline ReconstructedPmf reconstruct_pmf_from_rates(const std::vector<double>& rates,
                                                   std::optional<long long> windows = std::nullopt) {
  ReconstructedPmf out;
  const std::size_t T = rates.size();
  if (T == 0) return out;
  for (double q : rates)
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("counting rates must lie in [0, 1]");
  out.pmf.resize(T);
  auto tolerance = [&](double a, double b) {
    if (!windows) return 0.0;
    const double w = static_cast<double>(*windows);
    return 4.0 * std::sqrt((a * (1.0 - a) + b * (1.0 - b)) / w);
  };
  for (std::size_t n = 0; n < T; ++n) {
    const double hi = n == 0 ? 1.0 : rates[n - 1];
    const double lo = rates[n];
    double v = hi - lo;
    if (v < 0.0) {
      if (-v > tolerance(hi, lo)) out.non_monotone = true;
      out.clamped = true;
      out.clamped_indices.push_back(static_cast<int>(n));
      v = 0.0;
    }
    out.pmf[n] = v;
  }
  return out;
}

}  // namespace pdisc
