#pragma once

// Estimating (N, gamma) or (N, g) from threshold click records: the closed-form
// inversion of the t = {1, 2} rates, a bounded binomial maximum-likelihood fit
// for arbitrary thresholds, Cramer-Rao predictions, and the adaptive loop that
// re-chooses the threshold pair after every batch of windows.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "detector_models.hpp"
#include "errors.hpp"
#include "fisher_info.hpp"
#include "numeric.hpp"
#include "photon_stats.hpp"
#include "rng.hpp"

namespace pdisc {

// ---------------------------------------------------------------------------
// Closed-form two-threshold inversion for partially polarized thermal light.

struct Q12 {
  double q1 = 0.0;
  double q2 = 0.0;
};

/// Click probabilities at t = 1 and t = 2, written without cancellation:
/// with D = (1+a)(1+b) = 1 + N + c and c = ab = N^2 (1 - gamma^2)/4,
/// q1 = (N + c)/D and q2 = (N^2 (3 + gamma^2)/4 + 2Nc + c^2)/D^2.
inline Q12 forward_q12(double N, double gamma) {
  detail::require_mean(N);
  detail::require_unit(gamma, "degree of linear polarization");
  const double c = 0.25 * N * N * (1.0 - gamma) * (1.0 + gamma);
  const double D = 1.0 + N + c;
  return {(N + c) / D, (0.25 * N * N * (3.0 + gamma * gamma) + 2.0 * N * c + c * c) / (D * D)};
}

struct InversionResult {
  double N = 0.0;
  double gamma = 0.0;
  bool negative_discriminant = false;  // sampling noise; gamma set to 0
  bool clamped = false;                // gamma or N pushed back into its domain
  bool indeterminate = false;          // gamma not identifiable (vacuum or degenerate rates)

  [[nodiscard]] bool flagged() const { return negative_discriminant || clamped || indeterminate; }
};

inline InversionResult invert_q12(double q1, double q2) {
  if (!(q1 < 1.0)) throw DomainError("invert_q12 needs q1 < 1");
  if (!(q1 >= 0.0 && q2 >= 0.0)) throw DomainError("invert_q12 needs non-negative rates");
  if (q2 > q1) throw DomainError("invert_q12 needs q2 <= q1");
  InversionResult r;
  const double u = 1.0 - q1;
  const double denom = q1 + q2 - 2.0 * q1 * q1;
  if (q1 == 0.0 || denom <= 0.0) {
    r.N = std::max(0.0, denom / (u * u));
    r.clamped = denom < 0.0;
    r.indeterminate = true;
    return r;
  }
  r.N = denom / (u * u);
  const double v = q2 - 1.0 + 3.0 * u;  // q2 + 2 - 3 q1
  const double disc = v * v - 4.0 * u * u * u;
  if (disc < 0.0) {
    r.negative_discriminant = true;
    r.gamma = 0.0;
    return r;
  }
  r.gamma = std::sqrt(disc) / denom;
  if (r.gamma > 1.0) {
    r.gamma = 1.0;
    r.clamped = true;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Likelihood estimation.

/// One binomial observation; rates may be fractional (e.g. exact rates fed in as data).
struct RateObservation {
  int threshold = 1;
  double windows = 0.0;
  double clicks = 0.0;
};

inline RateObservation to_observation(const ClickRecord& r) {
  if (r.threshold != std::floor(r.threshold) || r.threshold < 1)
    throw DomainError("likelihood estimation needs integer thresholds >= 1");
  return {static_cast<int>(r.threshold), static_cast<double>(r.windows), static_cast<double>(r.clicks)};
}

/// The two-parameter families the estimators handle: (N, gamma) or (N, g).
struct TwoParamFamily {
  std::string name = "dolp";  // "dolp" or "displaced"

  [[nodiscard]] Param second() const { return name == "displaced" ? Param::G : Param::Gamma; }
  [[nodiscard]] PhotonDistribution make(double N, double s) const { return make_distribution(name, N, s); }
  void validate() const {
    if (name != "dolp" && name != "displaced")
      throw ConfigError("two-parameter estimation supports families dolp and displaced, not '" + name + "'");
  }
};

/// q(t) for t = 1..t_max (index t), summing the upper tail from the lower cdf.
inline std::vector<double> threshold_rates(const PhotonDistribution& d, int t_max) {
  std::vector<double> q(t_max + 1, 1.0);
  if (t_max < 1) return q;
  const auto p = d.pmf_table(t_max - 1);
  numeric::CompensatedSum below;
  for (int t = 1; t <= t_max; ++t) {
    below.add(p[t - 1]);
    q[t] = std::clamp(1.0 - below.value(), 0.0, 1.0);
  }
  return q;
}

inline double binomial_loglik(const std::vector<RateObservation>& obs, const std::vector<double>& q) {
  double ll = 0.0;
  for (const auto& o : obs) {
    const double qt = std::clamp(q[o.threshold], 1e-300, 1.0 - 1e-16);
    if (o.clicks > 0.0) ll += o.clicks * std::log(qt);
    if (o.windows - o.clicks > 0.0) ll += (o.windows - o.clicks) * std::log1p(-qt);
  }
  return ll;
}

struct LikelihoodBounds {
  double N_max = 20.0;
  int grid = 64;
};

struct LikelihoodResult {
  double N = 0.0;
  double second = 0.0;
  double log_likelihood = 0.0;
  bool boundary = false;   // maximizer on the edge of the search box
  bool no_clicks = false;  // every observation was zero
  int evaluations = 0;
};

/// Maximizes the product-binomial likelihood over [0, N_max] x [0, 1]: a
/// grid (N on a squared scale) followed by a bounded Nelder-Mead refinement.
inline LikelihoodResult likelihood_estimate(const std::vector<RateObservation>& obs, const TwoParamFamily& family,
                                            const LikelihoodBounds& bounds = {}) {
  family.validate();
  if (obs.empty()) throw DomainError("likelihood estimation needs at least one observation");
  int t_max = 1;
  double total_clicks = 0.0;
  for (const auto& o : obs) {
    if (o.threshold < 1) throw DomainError("thresholds must be >= 1");
    if (!(o.windows >= 1.0) || o.clicks < 0.0 || o.clicks > o.windows)
      throw DomainError("observations need windows >= 1 and 0 <= clicks <= windows");
    t_max = std::max(t_max, o.threshold);
    total_clicks += o.clicks;
  }
  LikelihoodResult res;
  if (total_clicks == 0.0) {
    res.no_clicks = true;
    res.boundary = true;
    res.log_likelihood = 0.0;
    return res;
  }

  auto nll = [&](std::array<double, 2> x) {
    ++res.evaluations;
    const auto q = threshold_rates(family.make(x[0], x[1]), t_max);
    return -binomial_loglik(obs, q);
  };

  const int G = std::max(2, bounds.grid);
  std::array<double, 2> best{0.0, 0.0};
  double best_v = numeric::kInf;
  for (int i = 0; i < G; ++i) {
    const double r = static_cast<double>(i) / (G - 1);
    const double N = bounds.N_max * r * r;
    for (int j = 0; j < G; ++j) {
      const double s = static_cast<double>(j) / (G - 1);
      const double v = nll({N, s});
      if (v < best_v) {
        best_v = v;
        best = {N, s};
      }
    }
  }
  const numeric::Box2 box{{0.0, 0.0}, {bounds.N_max, 1.0}};
  const double dN = std::max(1e-6, bounds.N_max * 2.0 * std::sqrt(best[0] / bounds.N_max) / (G - 1));
  const auto m = numeric::nelder_mead_box(nll, best, {dN, 1.0 / (G - 1)}, box, 1e-12, 4000);
  if (m.value <= best_v) {
    best = m.x;
    best_v = m.value;
  }
  res.N = best[0];
  res.second = best[1];
  res.log_likelihood = -best_v;
  const double eps = 1e-6;
  res.boundary = best[0] <= eps || best[0] >= bounds.N_max * (1 - eps) || best[1] <= eps || best[1] >= 1 - eps;
  return res;
}

inline LikelihoodResult likelihood_estimate(const std::vector<ClickRecord>& records, const TwoParamFamily& family,
                                            const LikelihoodBounds& bounds = {}) {
  std::vector<RateObservation> obs;
  obs.reserve(records.size());
  for (const auto& r : records) obs.push_back(to_observation(r));
  return likelihood_estimate(obs, family, bounds);
}

// ---------------------------------------------------------------------------
// Cramer-Rao predictions.

/// 1/sqrt(windows J); +inf when J <= 0.
inline double crlb_std(double J, double windows) {
  if (!(J > 0.0) || !(windows >= 1.0)) return numeric::kInf;
  return 1.0 / std::sqrt(windows * J);
}

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Click probability and its gradient in (N, second) for every threshold 1..t_max.
struct RateGradients {
  std::vector<double> q;
  std::vector<std::array<double, 2>> dq;
};

inline RateGradients rate_gradients(const PhotonDistribution& d, Param second, int t_max) {
  const auto tn = make_tables(d, Param::N, {}, std::max(tail_cutoff(d), t_max));
  const auto ts = make_tables(d, second, {}, tn.n_max());
  const auto q = upper_tails(tn.p, tn.tail);
  const auto qn = upper_tails(tn.dp, tn.dtail);
  const auto qs = upper_tails(ts.dp, ts.dtail);
  RateGradients g;
  g.q.assign(t_max + 1, 0.0);
  g.dq.assign(t_max + 1, {0.0, 0.0});
  for (int t = 1; t <= t_max; ++t) {
    g.q[t] = q[t];
    g.dq[t] = {qn[t], qs[t]};
  }
  return g;
}

/// Per-window Fisher matrix of a threshold-t detector.
inline Matrix2 binary_fisher_matrix(double q, const std::array<double, 2>& dq) {
  Matrix2 F{};
  if (q <= 1e-15 || q >= 1.0 - 1e-15) return F;
  const double w = 1.0 / (q * (1.0 - q));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) F[i][j] = w * dq[i] * dq[j];
  return F;
}

/// Diagonal of the inverse of a 2x2 matrix; +inf entries when singular.
inline std::array<double, 2> inverse_diagonal(const Matrix2& F) {
  const double det = F[0][0] * F[1][1] - F[0][1] * F[1][0];
  const double scale = std::abs(F[0][0] * F[1][1]) + std::abs(F[0][1] * F[1][0]);
  if (!(det > 1e-12 * scale) || !(det > 0.0)) return {numeric::kInf, numeric::kInf};
  return {F[1][1] / det, F[0][0] / det};
}

// ---------------------------------------------------------------------------
// Adaptive loop.

enum class EstimatorMode { ClosedForm, Likelihood };
enum class PairRule {
  Fixed,         // keep the initial pair (the non-adaptive schedule)
  PerParameter,  // one scalar-optimal threshold per parameter
  JointCrlb      // pair minimizing the predicted variance of the second parameter
};

inline std::string to_string(EstimatorMode m) { return m == EstimatorMode::ClosedForm ? "closed-form" : "likelihood"; }
inline std::string to_string(PairRule r) {
  switch (r) {
    case PairRule::Fixed: return "fixed";
    case PairRule::PerParameter: return "per-parameter";
    case PairRule::JointCrlb: return "joint-crlb";
  }
  return "?";
}

inline EstimatorMode parse_estimator_mode(std::string_view s) {
  if (s == "closed-form") return EstimatorMode::ClosedForm;
  if (s == "likelihood") return EstimatorMode::Likelihood;
  throw ConfigError("unknown estimator mode '" + std::string(s) + "' (expected closed-form or likelihood)");
}
inline PairRule parse_pair_rule(std::string_view s) {
  if (s == "fixed") return PairRule::Fixed;
  if (s == "per-parameter") return PairRule::PerParameter;
  if (s == "joint-crlb") return PairRule::JointCrlb;
  throw ConfigError("unknown pair rule '" + std::string(s) + "' (expected fixed, per-parameter or joint-crlb)");
}

struct AdaptiveConfig {
  long long windows = 1000;  // per threshold per iteration; the two thresholds use disjoint windows
  std::array<int, 2> initial_pair{1, 2};
  int max_iterations = 5;
  std::optional<double> target_se;  // on the second parameter (gamma or g)
  EstimatorMode estimator = EstimatorMode::Likelihood;
  PairRule pair_rule = PairRule::PerParameter;
  LikelihoodBounds bounds{};
  int t_cap = 64;  // largest threshold the loop may choose

  void validate() const {
    if (windows < 1) throw ConfigError("windows per threshold must be >= 1");
    if (initial_pair[0] < 1 || initial_pair[1] < 1 || initial_pair[0] == initial_pair[1])
      throw ConfigError("initial thresholds must be distinct positive integers");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (target_se && !(*target_se > 0.0)) throw ConfigError("target standard error must be > 0");
    if (t_cap < 2) throw ConfigError("t_cap must be >= 2");
    if (!(bounds.N_max > 0.0)) throw ConfigError("likelihood N bound must be > 0");
  }
};

struct AdaptiveIteration {
  int iteration = 0;
  std::array<int, 2> pair{1, 2};
  std::array<ClickRecord, 2> records{};
  double N_hat = 0.0;
  double second_hat = 0.0;
  double se_N = numeric::kInf;
  double se_second = numeric::kInf;
  std::array<int, 2> next_pair{1, 2};
  long long cumulative_windows = 0;
  bool clamped = false;
  bool boundary = false;
};

struct AdaptiveTrace {
  std::string family;
  std::vector<AdaptiveIteration> iterations;
  bool target_met = false;

  [[nodiscard]] long long total_windows() const {
    return iterations.empty() ? 0 : iterations.back().cumulative_windows;
  }

  static std::string csv_header() {
    return "iteration,t_a,t_b,clicks_a,clicks_b,windows,N_hat,second_hat,se_N,se_second,next_t_a,next_t_b,"
           "cumulative_windows,flagged";
  }
  [[nodiscard]] std::string csv() const {
    std::ostringstream os;
    os.precision(12);
    os << csv_header() << "\r\n";
    for (const auto& it : iterations) {
      os << it.iteration << ',' << it.pair[0] << ',' << it.pair[1] << ',' << it.records[0].clicks << ','
         << it.records[1].clicks << ',' << it.records[0].windows << ',' << it.N_hat << ',' << it.second_hat << ','
         << it.se_N << ',' << it.se_second << ',' << it.next_pair[0] << ',' << it.next_pair[1] << ','
         << it.cumulative_windows << ',' << ((it.clamped || it.boundary) ? 1 : 0) << "\r\n";
    }
    return os.str();
  }
  [[nodiscard]] nlohmann::json to_json() const {
    auto num = [](double v) -> nlohmann::json {
      if (std::isfinite(v)) return v;
      return nullptr;
    };
    nlohmann::json j;
    j["family"] = family;
    j["target_met"] = target_met;
    j["iterations"] = nlohmann::json::array();
    for (const auto& it : iterations) {
      nlohmann::json row;
      row["iteration"] = it.iteration;
      row["thresholds"] = {it.pair[0], it.pair[1]};
      row["clicks"] = {it.records[0].clicks, it.records[1].clicks};
      row["windows"] = it.records[0].windows;
      row["estimate"] = {{"N", it.N_hat}, {"second", it.second_hat}};
      row["predicted_se"] = {{"N", num(it.se_N)}, {"second", num(it.se_second)}};
      row["next_thresholds"] = {it.next_pair[0], it.next_pair[1]};
      row["cumulative_windows"] = it.cumulative_windows;
      row["clamped"] = it.clamped;
      row["boundary"] = it.boundary;
      j["iterations"].push_back(row);
    }
    return j;
  }
};

namespace detail {

/// Point estimate from all records so far.
struct PointEstimate {
  double N = 0.0, second = 0.0;
  bool clamped = false, boundary = false;
};

inline PointEstimate estimate_from(const std::vector<ClickRecord>& records, const TwoParamFamily& family,
                                   const AdaptiveConfig& cfg) {
  PointEstimate e;
  if (cfg.estimator == EstimatorMode::ClosedForm && family.name == "dolp") {
    double w1 = 0, c1 = 0, w2 = 0, c2 = 0;
    bool other = false;
    for (const auto& r : records) {
      if (r.threshold == 1.0) {
        w1 += static_cast<double>(r.windows);
        c1 += static_cast<double>(r.clicks);
      } else if (r.threshold == 2.0) {
        w2 += static_cast<double>(r.windows);
        c2 += static_cast<double>(r.clicks);
      } else {
        other = true;
      }
    }
    if (!other && w1 > 0 && w2 > 0) {
      double q1 = c1 / w1, q2 = c2 / w2;
      if (q1 < 1.0) {
        q2 = std::min(q2, q1);
        const auto inv = invert_q12(q1, q2);
        e.N = std::min(inv.N, cfg.bounds.N_max);
        e.second = inv.gamma;
        e.clamped = inv.flagged() || inv.N > cfg.bounds.N_max;
        return e;
      }
    }
    // thresholds other than {1, 2}, or saturated data: fall through to the likelihood
  }
  const auto r = likelihood_estimate(records, family, cfg.bounds);
  e.N = r.N;
  e.second = r.second;
  e.boundary = r.boundary;
  return e;
}

/// Accumulated Fisher matrix of `records` evaluated at the estimate.
inline Matrix2 accumulated_fisher(const std::vector<ClickRecord>& records, const RateGradients& g) {
  Matrix2 F{};
  for (const auto& r : records) {
    const int t = static_cast<int>(r.threshold);
    if (t >= static_cast<int>(g.q.size())) continue;
    const auto f = binary_fisher_matrix(g.q[t], g.dq[t]);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) F[i][j] += static_cast<double>(r.windows) * f[i][j];
  }
  return F;
}

/// Predicted standard errors; the joint matrix when invertible, else per-parameter.
inline std::array<double, 2> predicted_se(const Matrix2& F) {
  const auto d = inverse_diagonal(F);
  if (std::isfinite(d[0]) && std::isfinite(d[1])) return {std::sqrt(d[0]), std::sqrt(d[1])};
  return {F[0][0] > 0 ? 1.0 / std::sqrt(F[0][0]) : numeric::kInf,
          F[1][1] > 0 ? 1.0 / std::sqrt(F[1][1]) : numeric::kInf};
}

inline std::array<int, 2> per_parameter_pair(const PhotonDistribution& d, Param second, int t_cap) {
  const int tN = optimal_threshold(d, ParamSpec{Param::N}, t_cap).t_opt;
  const int tS = optimal_threshold(d, ParamSpec{second}, t_cap).t_opt;
  std::array<int, 2> pair{tN, tS};
  if (pair[1] == pair[0]) ++pair[1];
  return pair;
}

/// Pair (t_a < t_b) minimizing the predicted variance of the second parameter
/// after adding `windows` windows at each threshold to the accumulated matrix.
/// Near gamma = 0 the variance in gamma diverges, so candidates are compared in
/// the smooth coordinate gamma^2, which has the same minimizer for gamma > 0.
inline std::array<int, 2> joint_crlb_pair(const PhotonDistribution& d, const TwoParamFamily& family,
                                          const std::vector<ClickRecord>& records, double windows, int t_cap) {
  PhotonDistribution eval = d;
  bool squared = false;
  if (family.second() == Param::Gamma) {
    squared = true;
    const double g = d.param_value(Param::Gamma);
    if (g < 1e-3) eval = d.with_param(Param::Gamma, 1e-3);
    if (g > 1.0 - 1e-9) eval = d.with_param(Param::Gamma, 1.0 - 1e-9);
  }
  const int t_max = std::min(t_cap, std::max(2, tail_cutoff(eval)));
  auto g = rate_gradients(eval, family.second(), t_max);
  if (squared) {
    const double gm = eval.param_value(Param::Gamma);
    for (auto& v : g.dq) v[1] /= 2.0 * gm;
  }
  const Matrix2 F0 = accumulated_fisher(records, g);
  std::vector<Matrix2> f(t_max + 1);
  for (int t = 1; t <= t_max; ++t) f[t] = binary_fisher_matrix(g.q[t], g.dq[t]);

  std::array<int, 2> best{1, 2};
  double best_v = numeric::kInf;
  for (int a = 1; a <= t_max; ++a) {
    for (int b = a + 1; b <= t_max; ++b) {
      Matrix2 F = F0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) F[i][j] += windows * (f[a][i][j] + f[b][i][j]);
      const double v = inverse_diagonal(F)[1];
      if (v < best_v) {
        best_v = v;
        best = {a, b};
      }
    }
  }
  return best;
}

}  // namespace detail

/// Runs the adaptive loop against a hidden source. Estimates pool every record
/// collected so far; the stopping rule compares the predicted standard error of
/// the second parameter with `target_se`.
inline AdaptiveTrace adaptive_loop(const PhotonDistribution& source, const AdaptiveConfig& cfg, const RngStream& rng) {
  cfg.validate();
  TwoParamFamily family{source.family()};
  family.validate();
  AdaptiveTrace trace;
  trace.family = family.name;
  std::vector<ClickRecord> records;
  std::array<int, 2> pair = cfg.initial_pair;
  long long used = 0;

  for (int k = 0; k < cfg.max_iterations; ++k) {
    AdaptiveIteration it;
    it.iteration = k + 1;
    it.pair = pair;
    for (int j = 0; j < 2; ++j) {
      RngStream sub = rng.substream(static_cast<std::uint64_t>(2 * k + j));
      it.records[j] = simulate_clicks(source, ThresholdResponse::ideal(pair[j]), cfg.windows, sub);
      records.push_back(it.records[j]);
    }
    used += 2 * cfg.windows;
    it.cumulative_windows = used;

    const auto est = detail::estimate_from(records, family, cfg);
    it.N_hat = est.N;
    it.second_hat = est.second;
    it.clamped = est.clamped;
    it.boundary = est.boundary;

    const auto at = family.make(it.N_hat, it.second_hat);
    const int t_rows = std::max(pair[0], pair[1]);
    int t_grad = std::max(t_rows, 2);
    for (const auto& r : records) t_grad = std::max(t_grad, static_cast<int>(r.threshold));
    const auto g = rate_gradients(at, family.second(), t_grad);
    const auto se = detail::predicted_se(detail::accumulated_fisher(records, g));
    it.se_N = se[0];
    it.se_second = se[1];

    if (cfg.pair_rule == PairRule::Fixed) {
      it.next_pair = cfg.initial_pair;
    } else if (cfg.pair_rule == PairRule::PerParameter) {
      it.next_pair = detail::per_parameter_pair(at, family.second(), cfg.t_cap);
    } else {
      it.next_pair = detail::joint_crlb_pair(at, family, records, static_cast<double>(cfg.windows), cfg.t_cap);
    }
    trace.iterations.push_back(it);
    pair = it.next_pair;
    if (cfg.target_se && it.se_second <= *cfg.target_se) {
      trace.target_met = true;
      break;
    }
  }
  return trace;
}

}  // namespace pdisc
