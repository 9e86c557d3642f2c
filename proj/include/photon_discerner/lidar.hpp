#pragma once

// Coherent signal against single-mode thermal background: the two-threshold
// classification experiment, optimal thresholds for (N, g), and the comparison
// of a thresholded detector with a PNRD that saturates at M photons.

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fisher_info.hpp"
#include "parallel.hpp"
#include "photon_stats.hpp"
#include "rng.hpp"

namespace pdisc {

enum class PairLabel { FirstCoherent, SecondCoherent, Unresolved };

/// A one-photon detector sees the coherent source as the brighter one; from two
/// photons up, bunching makes thermal light click more often, so the lower rate
/// is called coherent.
inline PairLabel classify_pair(double rate_a, double rate_b, int t) {
  if (t < 1) throw DomainError("threshold must be >= 1");
  if (rate_a == rate_b) return PairLabel::Unresolved;
  const bool a_higher = rate_a > rate_b;
  if (t == 1) return a_higher ? PairLabel::FirstCoherent : PairLabel::SecondCoherent;
  return a_higher ? PairLabel::SecondCoherent : PairLabel::FirstCoherent;
}

/// Credit for a label when the first source really is coherent (ties count half).
inline double label_score(PairLabel label, bool first_is_coherent) {
  if (label == PairLabel::Unresolved) return 0.5;
  return (label == PairLabel::FirstCoherent) == first_is_coherent ? 1.0 : 0.0;
}

inline std::vector<long long> default_window_grid() {
  return {100, 300, 1000, 3000, 10000, 30000, 100000, 300000, 1000000};
}

struct ClassificationConfig {
  double N = 0.1;
  std::vector<long long> windows = default_window_grid();  // per source, per trial
  int trials = 1000;
  int threshold = 2;
  int baseline = 1;
  std::uint64_t seed = 1;
  bool coherent_first = true;  // which of the two streams is presented first
  unsigned threads = 1;

  void validate() const {
    if (!(N > 0.0) || !std::isfinite(N)) throw ConfigError("mean photon number must be > 0");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (threshold < 1 || baseline < 1) throw ConfigError("thresholds must be >= 1");
    if (windows.empty()) throw ConfigError("window grid is empty");
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i] < 0) throw ConfigError("window budgets must be >= 0");
      if (i > 0 && windows[i] <= windows[i - 1]) throw ConfigError("window budgets must be strictly increasing");
    }
  }
};

struct AccuracyRow {
  long long windows = 0;
  double accuracy = 0.0;           // the discerner at `threshold`
  double baseline_accuracy = 0.0;  // the single-photon detector
  double z = 0.0;                  // two-proportion z of accuracy over baseline_accuracy
};

/// (accuracy_a - accuracy_b) / sqrt(p(1-p)(2/n)) with the pooled p; +inf or 0
/// when both proportions sit at the same boundary.
inline double two_proportion_z(double pa, double pb, int n) {
  const double p = 0.5 * (pa + pb);
  const double var = p * (1.0 - p) * 2.0 / n;
  if (!(var > 0.0)) return pa > pb ? numeric::kInf : (pa < pb ? -numeric::kInf : 0.0);
  return (pa - pb) / std::sqrt(var);
}

struct ClassificationTable {
  ClassificationConfig config;
  std::vector<AccuracyRow> rows;

  static std::string csv_header() { return "windows,accuracy_t,accuracy_baseline,z"; }
  [[nodiscard]] std::string csv() const {
    std::ostringstream os;
    os.precision(12);
    os << csv_header() << "\r\n";
    for (const auto& r : rows) os << r.windows << ',' << r.accuracy << ',' << r.baseline_accuracy << ',' << r.z << "\r\n";
    return os.str();
  }
};

namespace detail {

/// Window counts falling in the photon-number classes [0, t_lo), [t_lo, t_hi), [t_hi, inf).
struct ClassCounts {
  long long low = 0, mid = 0, high = 0;
};

/// Draws `windows` more windows as a multinomial over the three classes.
inline void add_windows(ClassCounts& c, long long windows, double p_low, double p_mid, RngStream& rng) {
  if (windows <= 0) return;
  const long long low = std::binomial_distribution<long long>(windows, std::clamp(p_low, 0.0, 1.0))(rng);
  const double rest = 1.0 - p_low;
  const double cond = rest > 0.0 ? std::clamp(p_mid / rest, 0.0, 1.0) : 0.0;
  const long long mid = std::binomial_distribution<long long>(windows - low, cond)(rng);
  c.low += low;
  c.mid += mid;
  c.high += windows - low - mid;
}

}  // namespace detail

/// Every trial draws photon-number classes for a coherent and a thermal stream
/// of equal mean N; both detectors read the same windows. Budgets are nested
/// (each budget extends the previous windows of the same trial).
inline ClassificationTable run_classification(const ClassificationConfig& cfg) {
  cfg.validate();
  const int t_lo = std::min(cfg.threshold, cfg.baseline), t_hi = std::max(cfg.threshold, cfg.baseline);
  const PhotonDistribution sources[2] = {CoherentDist(cfg.N), ThermalDist(cfg.N)};
  double p_low[2], p_mid[2];
  for (int s = 0; s < 2; ++s) {
    const double below_lo = 1.0 - counting_rate(sources[s], ThresholdResponse::ideal(t_lo));
    const double below_hi = 1.0 - counting_rate(sources[s], ThresholdResponse::ideal(t_hi));
    p_low[s] = below_lo;
    p_mid[s] = below_hi - below_lo;
  }
  const std::size_t B = cfg.windows.size();
  // score[trial][budget][rule]
  std::vector<std::vector<std::array<double, 2>>> score(cfg.trials, std::vector<std::array<double, 2>>(B));
  const RngStream root(cfg.seed);
  parallel_for(static_cast<std::size_t>(cfg.trials), cfg.threads, [&](std::size_t trial) {
    RngStream rng = root.substream(trial);
    detail::ClassCounts counts[2];
    long long done = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const long long w = cfg.windows[b];
      for (int s = 0; s < 2; ++s) detail::add_windows(counts[s], w - done, p_low[s], p_mid[s], rng);
      done = w;
      for (int rule = 0; rule < 2; ++rule) {
        const int t = rule == 0 ? cfg.threshold : cfg.baseline;
        if (w == 0) {
          score[trial][b][rule] = 0.5;
          continue;
        }
        double rate[2];
        for (int s = 0; s < 2; ++s)
          rate[s] = static_cast<double>(counts[s].high + (t == t_hi ? 0 : counts[s].mid)) / static_cast<double>(w);
        const int first = cfg.coherent_first ? 0 : 1;
        score[trial][b][rule] = label_score(classify_pair(rate[first], rate[1 - first], t), cfg.coherent_first);
      }
    }
  });
  ClassificationTable out;
  out.config = cfg;
  for (std::size_t b = 0; b < B; ++b) {
    AccuracyRow row;
    row.windows = cfg.windows[b];
    for (int trial = 0; trial < cfg.trials; ++trial) {
      row.accuracy += score[trial][b][0];
      row.baseline_accuracy += score[trial][b][1];
    }
    row.accuracy /= cfg.trials;
    row.baseline_accuracy /= cfg.trials;
    row.z = two_proportion_z(row.accuracy, row.baseline_accuracy, cfg.trials);
    out.rows.push_back(row);
  }
  return out;
}

struct LidarThresholds {
  int t_N = 1;
  int t_g = 1;
};

inline LidarThresholds lidar_optimal_thresholds(double N, double g, std::optional<int> t_max = std::nullopt) {
  const DisplacedThermalDist d(N, g);
  return {optimal_threshold(d, ParamSpec{Param::N}, t_max).t_opt, optimal_threshold(d, ParamSpec{Param::G}, t_max).t_opt};
}

struct ComparisonRow {
  int M = 1;
  double ratio_N = 0.0;  // pnrd_fisher / max_t pd_fisher, estimating N
  double ratio_g = 0.0;  // same for g
};

struct ComparisonCurve {
  double N = 0.0, g = 0.0;
  std::vector<ComparisonRow> rows;
  double pd_J_N = 0.0, pd_J_g = 0.0;
  double J0_N = 0.0, J0_g = 0.0;
  std::optional<int> crossover_N, crossover_g;  // first M with ratio >= 1
  int crossings_N = 0, crossings_g = 0;           // sign changes of ratio - 1 over the range

  static std::string csv_header() { return "M,ratio_N,ratio_g"; }
  [[nodiscard]] std::string csv() const {
    std::ostringstream os;
    os.precision(12);
    os << csv_header() << "\r\n";
    for (const auto& r : rows) os << r.M << ',' << r.ratio_N << ',' << r.ratio_g << "\r\n";
    return os.str();
  }
};

inline ComparisonCurve pnrd_vs_pd(double N, double g, int M_lo = 1, int M_hi = 64) {
  if (M_lo < 1 || M_hi > 64 || M_lo > M_hi) throw ConfigError("M range must lie within [1, 64]");
  const DisplacedThermalDist d(N, g);
  const ParamSpec sN{Param::N}, sG{Param::G};
  const auto tN = fisher_tables(d, sN);
  const auto tG = fisher_tables(d, sG);
  ComparisonCurve c;
  c.N = N;
  c.g = g;
  c.pd_J_N = optimal_threshold(d, sN).J_max;
  c.pd_J_g = optimal_threshold(d, sG).J_max;
  c.J0_N = shot_noise_fisher(tN);
  c.J0_g = shot_noise_fisher(tG);
  if (!(c.pd_J_N > 0.0) || !(c.pd_J_g > 0.0)) throw NumericalError("threshold detector carries no information here");
  for (int M = M_lo; M <= M_hi; ++M)
    c.rows.push_back({M, pnrd_fisher(tN, M) / c.pd_J_N, pnrd_fisher(tG, M) / c.pd_J_g});
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const auto& r = c.rows[i];
    if (!c.crossover_N && r.ratio_N >= 1.0) c.crossover_N = r.M;
    if (!c.crossover_g && r.ratio_g >= 1.0) c.crossover_g = r.M;
    if (i > 0) {
      const auto& p = c.rows[i - 1];
      c.crossings_N += (p.ratio_N >= 1.0) != (r.ratio_N >= 1.0);
      c.crossings_g += (p.ratio_g >= 1.0) != (r.ratio_g >= 1.0);
    }
  }
  return c;
}

}  // namespace pdisc
