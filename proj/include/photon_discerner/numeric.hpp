#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

namespace pdisc::numeric {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// e * log(base) with the conventions 0^0 = 1 and 0^e = 0 for e > 0.
inline double log_pow(double base, double exponent) {
  if (exponent == 0.0) return 0.0;
  if (base == 0.0) return -kInf;
  return exponent * std::log(base);
}

/// log(n!) via lgamma; exact for the small n that matter.
inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

/// Streaming log-sum-exp accumulator.
class LogSumExp {
 public:
  void add(double log_term) {
    if (log_term == -kInf) return;
    if (log_term <= max_) {
      sum_ += std::exp(log_term - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    }
  }
  [[nodiscard]] double value() const { return max_ == -kInf ? -kInf : max_ + std::log(sum_); }
  [[nodiscard]] double exp_value() const { return max_ == -kInf ? 0.0 : std::exp(value()); }

 private:
  double max_ = -kInf;
  double sum_ = 0.0;
};

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// log(I0(z) e^{-z}) for z >= 0, stable for arbitrarily large z.
inline double log_bessel_i0e(double z) {
  if (z < 700.0) {
    return std::log(boost::math::cyl_bessel_i(0, z)) - z;
  }
  // Hankel asymptotic series; the first omitted term is < 5e-13 here.
  const double inv = 1.0 / z;
  const double series = inv * (1.0 / 8.0 + inv * (9.0 / 128.0 + inv * (225.0 / 3072.0)));
  return -0.5 * std::log(2.0 * kPi * z) + std::log1p(series);
}

/// Logistic function 1/(1+e^{-x}) without overflow.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Composite trapezoid rule on uniformly spaced samples.
inline double trapezoid(std::span<const double> y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

struct Box2 {
  std::array<double, 2> lo;
  std::array<double, 2> hi;

  [[nodiscard]] std::array<double, 2> clamp(std::array<double, 2> x) const {
    for (int i = 0; i < 2; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  }
};

struct MinimizeResult {
  std::array<double, 2> x;
  double value;
  int evaluations;
};

/// Nelder-Mead on a 2D box; trial points are projected onto the box.
/// Restarts from the incumbent until a restart no longer improves it.
inline MinimizeResult nelder_mead_box(const std::function<double(std::array<double, 2>)>& f,
                                      std::array<double, 2> start, std::array<double, 2> step,
                                      const Box2& box, double xtol = 1e-12, int max_evals = 4000) {
  using P = std::array<double, 2>;
  int evals = 0;
  auto eval = [&](const P& p) {
    ++evals;
    return f(p);
  };
  P best = box.clamp(start);
  double best_val = eval(best);

  for (int restart = 0; restart < 8 && evals < max_evals; ++restart) {
    std::array<P, 3> s{best, best, best};
    for (int i = 0; i < 2; ++i) {
      double d = step[i];
      if (best[i] + d > box.hi[i]) d = -d;
      s[i + 1][i] = std::clamp(best[i] + d, box.lo[i], box.hi[i]);
      if (s[i + 1][i] == best[i]) s[i + 1][i] = std::clamp(best[i] - d, box.lo[i], box.hi[i]);
    }
    std::array<double, 3> v{best_val, eval(s[1]), eval(s[2])};

    while (evals < max_evals) {
      std::array<int, 3> idx{0, 1, 2};
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
      const P xb = s[idx[0]], xm = s[idx[1]], xw = s[idx[2]];
      const double vb = v[idx[0]], vm = v[idx[1]], vw = v[idx[2]];

      double size = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double scale = std::max(1.0, std::abs(xb[i]));
        size = std::max({size, std::abs(xm[i] - xb[i]) / scale, std::abs(xw[i] - xb[i]) / scale});
      }
      if (size < xtol) break;

      const P c{0.5 * (xb[0] + xm[0]), 0.5 * (xb[1] + xm[1])};
      auto along = [&](double t) { return box.clamp(P{c[0] + t * (xw[0] - c[0]), c[1] + t * (xw[1] - c[1])}); };

      const P xr = along(-1.0);
      const double vr = eval(xr);
      P repl = xw;
      double repl_v = vw;
      if (vr < vb) {
        const P xe = along(-2.0);
        const double ve = eval(xe);
        if (ve < vr) {
          repl = xe;
          repl_v = ve;
        } else {
          repl = xr;
          repl_v = vr;
        }
      } else if (vr < vm) {
        repl = xr;
        repl_v = vr;
      } else {
        const P xc = vr < vw ? along(-0.5) : along(0.5);
        const double vc = eval(xc);
        if (vc < std::min(vr, vw)) {
          repl = xc;
          repl_v = vc;
        } else {
          // shrink toward the best vertex
          s = {xb, P{0.5 * (xb[0] + xm[0]), 0.5 * (xb[1] + xm[1])},
               P{0.5 * (xb[0] + xw[0]), 0.5 * (xb[1] + xw[1])}};
          v = {vb, eval(s[1]), eval(s[2])};
          continue;
        }
      }
      s = {xb, xm, repl};
      v = {vb, vm, repl_v};
    }

    int ib = 0;
    for (int i = 1; i < 3; ++i)
      if (v[i] < v[ib]) ib = i;
    const bool improved = v[ib] < best_val;
    if (v[ib] <= best_val) {
      best = s[ib];
      best_val = v[ib];
    }
    if (!improved && restart > 0) break;
    step = {std::max(step[0] * 0.1, 1e-9), std::max(step[1] * 0.1, 1e-9)};
  }
  return {best, best_val, evals};
}

}  // namespace pdisc::numeric
