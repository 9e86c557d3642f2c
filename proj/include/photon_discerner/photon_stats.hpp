#pragma once

// Photon-number distributions of the light sources handled by the toolkit:
// single-mode thermal (Bose-Einstein), coherent (Poisson), two-mode partially
// polarized thermal light, displaced thermal light, and Fock states.
//
// Every distribution is an immutable value. Besides pmf/cdf/moments each one
// exposes analytic derivatives of the pmf with respect to its parameters and
// a sampler driven by an explicit RngStream.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace pdisc {

/// Distribution parameters that estimation and Fisher information refer to.
enum class Param { N, Gamma, G };

inline std::string_view to_string(Param p) {
  switch (p) {
    case Param::N: return "N";
    case Param::Gamma: return "gamma";
    case Param::G: return "g";
  }
  return "?";
}

inline Param parse_param(std::string_view s) {
  if (s == "N" || s == "n") return Param::N;
  if (s == "gamma" || s == "dolp") return Param::Gamma;
  if (s == "g") return Param::G;
  throw ConfigError("unknown parameter '" + std::string(s) + "' (expected N, gamma or g)");
}

namespace detail {

inline void require_count(int n) {
  if (n < 0) throw DomainError("photon count must be >= 0");
}

inline void require_mean(double N) {
  if (!(N >= 0.0) || !std::isfinite(N)) throw DomainError("mean photon number must be finite and >= 0");
}

inline void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

/// Bose-Einstein pmf with log-space evaluation.
inline double thermal_pmf(double N, int n) {
  if (N == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-static_cast<double>(n) * std::log1p(1.0 / N) - std::log1p(N));
}

/// d/dN of the Bose-Einstein pmf: N^{n-1}(n-N)/(N+1)^{n+2}.
inline double thermal_dpmf(double N, int n) {
  if (N == 0.0) return n == 0 ? -1.0 : (n == 1 ? 1.0 : 0.0);
  const double diff = static_cast<double>(n) - N;
  if (diff == 0.0) return 0.0;
  const double logmag = (n - 1) * std::log(N) + std::log(std::abs(diff)) - (n + 2) * std::log1p(N);
  return std::copysign(std::exp(logmag), diff);
}

inline double poisson_pmf(double N, int n) {
  if (N == 0.0) return n == 0 ? 1.0 : 0.0;
  return boost::math::gamma_p_derivative(static_cast<double>(n) + 1.0, N);
}

/// Pmf of the sum of two independent thermal modes with means a and b,
/// given diff = a - b >= 0 (passed separately so callers can supply it exactly).
inline double two_mode_pmf(double a, double b, double diff, int n) {
  if (a == 0.0 && b == 0.0) return n == 0 ? 1.0 : 0.0;
  if (diff < 1e-6 * (a + b)) {
    // near-degenerate modes: the closed form is 0/0, sum the convolution
    numeric::CompensatedSum s;
    for (int k = 0; k <= n; ++k) s.add(thermal_pmf(a, k) * thermal_pmf(b, n - k));
    return s.value();
  }
  // (x^{n+1} - y^{n+1})/(a - b) with x = a/(a+1), y = b/(b+1), written as
  // x^{n+1} (1 - r^{n+1})/(a - b) with log r = log1p((b - a)/(a (b + 1))).
  const double log_x = -std::log1p(1.0 / a);
  const double log_r = std::log1p(-diff / (a * (b + 1.0)));
  const double m = static_cast<double>(n) + 1.0;
  return std::exp(m * log_x + std::log(-std::expm1(m * log_r)) - std::log(diff));
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Single-mode thermal light, p(n) = N^n/(N+1)^{n+1}.
class ThermalDist {
 public:
  explicit ThermalDist(double N) : N_(N) { detail::require_mean(N); }

  [[nodiscard]] double N() const { return N_; }
  [[nodiscard]] double pmf(int n) const {
    detail::require_count(n);
    return detail::thermal_pmf(N_, n);
  }
  [[nodiscard]] double cdf(int n) const {
    if (n < 0) return 0.0;
    if (N_ == 0.0) return 1.0;
    return -std::expm1(-(static_cast<double>(n) + 1.0) * std::log1p(1.0 / N_));
  }
  [[nodiscard]] double dpmf(Param p, int n) const {
    detail::require_count(n);
    return p == Param::N ? detail::thermal_dpmf(N_, n) : 0.0;
  }
  [[nodiscard]] double mean() const { return N_; }
  [[nodiscard]] double variance() const { return N_ * (N_ + 1.0); }
  [[nodiscard]] std::vector<Param> params() const { return {Param::N}; }
  [[nodiscard]] std::string family() const { return "thermal"; }

  template <class Rng>
  int sample(Rng& rng) const {
    if (N_ == 0.0) return 0;
    std::geometric_distribution<int> geo(1.0 / (N_ + 1.0));
    return geo(rng);
  }

 private:
  double N_;
};

/// Coherent light, Poisson statistics.
class CoherentDist {
 public:
  explicit CoherentDist(double N) : N_(N) { detail::require_mean(N); }

  [[nodiscard]] double N() const { return N_; }
  [[nodiscard]] double pmf(int n) const {
    detail::require_count(n);
    return detail::poisson_pmf(N_, n);
  }
  [[nodiscard]] double cdf(int n) const {
    if (n < 0) return 0.0;
    if (N_ == 0.0) return 1.0;
    return boost::math::gamma_q(static_cast<double>(n) + 1.0, N_);
  }
  [[nodiscard]] double dpmf(Param p, int n) const {
    detail::require_count(n);
    if (p != Param::N) return 0.0;
    if (N_ == 0.0) return n == 0 ? -1.0 : (n == 1 ? 1.0 : 0.0);
    // p(n-1) - p(n) = p(n) (n/N - 1), written without cancellation
    return detail::poisson_pmf(N_, n) * (static_cast<double>(n) / N_ - 1.0);
  }
  [[nodiscard]] double mean() const { return N_; }
  [[nodiscard]] double variance() const { return N_; }
  [[nodiscard]] std::vector<Param> params() const { return {Param::N}; }
  [[nodiscard]] std::string family() const { return "coherent"; }

  template <class Rng>
  int sample(Rng& rng) const {
    if (N_ == 0.0) return 0;
    std::poisson_distribution<int> poi(N_);
    return poi(rng);
  }

 private:
  double N_;
};

/// Two orthogonal thermal polarization modes with N_par = N(1+gamma)/2 and
/// N_perp = N(1-gamma)/2; gamma is the degree of linear polarization.
class DolpJointDist {
 public:
  DolpJointDist(double N, double gamma) : N_(N), gamma_(gamma) {
    detail::require_mean(N);
    detail::require_unit(gamma, "degree of linear polarization");
  }

  [[nodiscard]] double N() const { return N_; }
  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] double n_parallel() const { return 0.5 * N_ * (1.0 + gamma_); }
  [[nodiscard]] double n_perpendicular() const { return 0.5 * N_ * (1.0 - gamma_); }

  [[nodiscard]] double pmf(int n) const {
    detail::require_count(n);
    return detail::two_mode_pmf(n_parallel(), n_perpendicular(), N_ * gamma_, n);
  }
  [[nodiscard]] double cdf(int n) const {
    if (n < 0) return 0.0;
    const auto p = pmf_table(n);
    numeric::CompensatedSum s;
    for (double v : p) s.add(v);
    return std::min(1.0, s.value());
  }
  [[nodiscard]] double dpmf(Param p, int n) const {
    detail::require_count(n);
    return dpmf_table(p, n)[static_cast<std::size_t>(n)];
  }
  [[nodiscard]] double mean() const { return N_; }
  [[nodiscard]] double variance() const {
    const double a = n_parallel(), b = n_perpendicular();
    return a * (a + 1.0) + b * (b + 1.0);
  }
  [[nodiscard]] std::vector<Param> params() const { return {Param::N, Param::Gamma}; }
  [[nodiscard]] std::string family() const { return "dolp"; }

  /// p(0..n_max) through G_n = x G_{n-1} + y^n, the incremental convolution.
  [[nodiscard]] std::vector<double> pmf_table(int n_max) const {
    return tables(n_max, false).p;
  }

  [[nodiscard]] std::vector<double> dpmf_table(Param which, int n_max) const {
    if (which != Param::N && which != Param::Gamma) return std::vector<double>(n_max + 1, 0.0);
    const auto t = tables(n_max, true);
    std::vector<double> out(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
      out[n] = which == Param::N
                   ? 0.5 * (1.0 + gamma_) * t.dp_da[n] + 0.5 * (1.0 - gamma_) * t.dp_db[n]
                   : 0.5 * N_ * (t.dp_da[n] - t.dp_db[n]);
    }
    return out;
  }

  template <class Rng>
  int sample(Rng& rng) const {
    return ThermalDist(n_parallel()).sample(rng) + ThermalDist(n_perpendicular()).sample(rng);
  }

 private:
  struct Tables {
    std::vector<double> p, dp_da, dp_db;
  };

  [[nodiscard]] Tables tables(int n_max, bool derivs) const {
    const double a = n_parallel(), b = n_perpendicular();
    const double x = a / (a + 1.0), y = b / (b + 1.0);
    const double ux = 1.0 / (a + 1.0), uy = 1.0 / (b + 1.0);  // 1-x, 1-y
    Tables t;
    t.p.resize(n_max + 1);
    if (derivs) {
      t.dp_da.resize(n_max + 1);
      t.dp_db.resize(n_max + 1);
    }
    double G = 1.0, Gx = 0.0, Gy = 0.0, xn = 1.0, yn = 1.0;
    for (int n = 0; n <= n_max; ++n) {
      if (n > 0) {
        xn *= x;
        yn *= y;
        const double Gprev = G;
        G = x * Gprev + yn;
        Gx = Gprev + x * Gx;
        Gy = Gprev + y * Gy;
      }
      t.p[n] = ux * uy * G;
      if (derivs) {
        // dp/dx = (1-y)[(1-x) dG/dx - G], dx/da = (1-x)^2
        t.dp_da[n] = ux * ux * uy * (ux * Gx - G);
        t.dp_db[n] = uy * uy * ux * (uy * Gy - G);
      }
    }
    return t;
  }

  double N_;
  double gamma_;
};

/// Displaced thermal state: coherent amplitude |alpha|^2 = N g on top of
/// thermal noise of mean N(1-g).
class DisplacedThermalDist {
 public:
  struct QuadratureResult {
    double value;
    double error_estimate;
    double l1_norm;
  };

  DisplacedThermalDist(double N, double g) : N_(N), g_(g) {
    detail::require_mean(N);
    detail::require_unit(g, "signal fraction");
  }

  [[nodiscard]] double N() const { return N_; }
  [[nodiscard]] double g() const { return g_; }
  [[nodiscard]] double thermal_mean() const { return N_ * (1.0 - g_); }
  [[nodiscard]] double signal_mean() const { return N_ * g_; }

  /// Reference value: quadrature of the Bessel-weighted integral, checked
  /// against the Laguerre series. Throws NumericalError on disagreement.
  [[nodiscard]] double pmf(int n) const {
    detail::require_count(n);
    const auto q = pmf_quadrature(n);
    const double s = pmf_series(n);
    if (std::abs(q.value - s) > 1e-9) {
      throw NumericalError("displaced thermal pmf: quadrature " + std::to_string(q.value) +
                           " and series " + std::to_string(s) + " disagree at n=" + std::to_string(n));
    }
    return q.value;
  }

  /// p(n) = (1/nth) e^{-s/nth}/n! Int_0^inf I0(2 sqrt(x s)/nth) e^{-x(1+1/nth)} x^n dx,
  /// integrated in u = sqrt(x) with the exponential factors folded into
  /// log space and adaptive Gauss-Kronrod on both sides of the peak.
  [[nodiscard]] QuadratureResult pmf_quadrature(int n) const {
    detail::require_count(n);
    const double nth = thermal_mean(), s = signal_mean();
    if (N_ == 0.0) return {n == 0 ? 1.0 : 0.0, 0.0, 1.0};
    if (nth == 0.0) return {detail::poisson_pmf(s, n), 0.0, 1.0};
    if (s == 0.0) return {detail::thermal_pmf(nth, n), 0.0, 1.0};

    const double rs = std::sqrt(s);
    const double m = 2.0 * n + 1.0;
    const double lognorm = std::log(2.0) - numeric::log_factorial(n) - std::log(nth);
    auto integrand = [&](double u) {
      if (u <= 0.0) return 0.0;
      const double d = u - rs;
      const double L = lognorm + m * std::log(u) - u * u - d * d / nth +
                       numeric::log_bessel_i0e(2.0 * u * rs / nth);
      return std::exp(L);
    };
    const double c = 1.0 + 1.0 / nth;
    const double peak = (rs / nth + std::sqrt(s / (nth * nth) + 2.0 * c * m)) / (2.0 * c);
    const double sigma = 1.0 / std::sqrt(m / (peak * peak) + 2.0 * c);
    // piecewise Gauss-Kronrod on rings of widening width around the peak
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    constexpr double kEdges[] = {0.0, 2.0, 6.0, 15.0, 40.0};
    QuadratureResult r{0.0, 0.0, 0.0};
    for (int side : {-1, 1}) {
      for (std::size_t i = 0; i + 1 < std::size(kEdges); ++i) {
        double a = peak + side * kEdges[i] * sigma;
        double b = peak + side * kEdges[i + 1] * sigma;
        if (side < 0) std::swap(a, b);
        a = std::max(a, 0.0);
        if (b <= a) continue;
        double err = 0.0, l1 = 0.0;
        r.value += GK::integrate(integrand, a, b, 12, 1e-11, &err, &l1);
        r.error_estimate += err;
        r.l1_norm += l1;
      }
    }
    if (!(r.error_estimate <= 1e-10) || !std::isfinite(r.value)) {
      throw NumericalError("displaced thermal quadrature did not converge: n=" + std::to_string(n) +
                           " N=" + std::to_string(N_) + " g=" + std::to_string(g_) +
                           " estimate=" + std::to_string(r.value) +
                           " error=" + std::to_string(r.error_estimate));
    }
    return r;
  }

  /// Closed form via the generalized Laguerre series:
  /// p(n) = nth^n/(1+nth)^{n+1} e^{-s/(1+nth)} L_n(-s/(nth(1+nth))).
  [[nodiscard]] double pmf_series(int n) const {
    detail::require_count(n);
    return series(n, false).p;
  }

  [[nodiscard]] double cdf(int n) const {
    if (n < 0) return 0.0;
    numeric::CompensatedSum s;
    for (int k = 0; k <= n; ++k) s.add(series(k, false).p);
    return std::min(1.0, s.value());
  }

  [[nodiscard]] double dpmf(Param p, int n) const {
    detail::require_count(n);
    if (p != Param::N && p != Param::G) return 0.0;
    const auto t = series(n, true);
    return p == Param::N ? (1.0 - g_) * t.dp_dnth + g_ * t.dp_ds : N_ * (t.dp_ds - t.dp_dnth);
  }

  [[nodiscard]] double mean() const { return N_; }
  [[nodiscard]] double variance() const {
    const double nth = thermal_mean(), s = signal_mean();
    return nth * (nth + 1.0) + s * (2.0 * nth + 1.0);
  }
  [[nodiscard]] std::vector<Param> params() const { return {Param::N, Param::G}; }
  [[nodiscard]] std::string family() const { return "displaced"; }

  [[nodiscard]] std::vector<double> pmf_table(int n_max) const {
    std::vector<double> out(n_max + 1);
    for (int n = 0; n <= n_max; ++n) out[n] = series(n, false).p;
    return out;
  }
  [[nodiscard]] std::vector<double> dpmf_table(Param which, int n_max) const {
    std::vector<double> out(n_max + 1, 0.0);
    if (which != Param::N && which != Param::G) return out;
    for (int n = 0; n <= n_max; ++n) out[n] = dpmf(which, n);
    return out;
  }

  /// Amplitude mixture: complex Gaussian thermal amplitude around sqrt(s),
  /// then a Poisson count at rate |alpha + beta|^2.
  template <class Rng>
  int sample(Rng& rng) const {
    const double nth = thermal_mean();
    double re = std::sqrt(signal_mean()), im = 0.0;
    if (nth > 0.0) {
      std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * nth));
      re += gauss(rng);
      im += gauss(rng);
    }
    const double rate = re * re + im * im;
    if (rate <= 0.0) return 0;
    std::poisson_distribution<int> poi(rate);
    return poi(rng);
  }

 private:
  struct SeriesValue {
    double p = 0.0, dp_ds = 0.0, dp_dnth = 0.0;
  };

  [[nodiscard]] SeriesValue series(int n, bool derivs) const {
    using numeric::log_pow;
    const double nth = thermal_mean(), s = signal_mean();
    if (N_ == 0.0 && !derivs) return {n == 0 ? 1.0 : 0.0, 0.0, 0.0};
    const double l1n = std::log1p(nth);
    const double common = -(n + 1.0) * l1n - s / (1.0 + nth);
    const double lfn = numeric::log_factorial(n);
    numeric::LogSumExp T, A, B, C;
    for (int k = 0; k <= n; ++k) {
      const double base = lfn - 2.0 * numeric::log_factorial(k) - numeric::log_factorial(n - k) - k * l1n;
      const double lt = base + log_pow(nth, n - k) + log_pow(s, k);
      T.add(lt);
      if (!derivs) continue;
      C.add(lt + std::log(n + 1.0 + k));
      if (k >= 1) A.add(base + std::log(static_cast<double>(k)) + log_pow(nth, n - k) + log_pow(s, k - 1));
      if (k <= n - 1)
        B.add(base + std::log(static_cast<double>(n - k)) + log_pow(nth, n - k - 1) + log_pow(s, k));
    }
    SeriesValue v;
    v.p = std::exp(T.value() + common);
    if (derivs) {
      const double a = std::exp(A.value() + common);
      const double b = std::exp(B.value() + common);
      const double c = std::exp(C.value() + common);
      v.dp_ds = a - v.p / (1.0 + nth);
      v.dp_dnth = b - c / (1.0 + nth) + s * v.p / ((1.0 + nth) * (1.0 + nth));
    }
    return v;
  }

  double N_;
  double g_;
};

/// Fock state |m>.
class FockDist {
 public:
  explicit FockDist(int m) : m_(m) {
    if (m < 0) throw DomainError("Fock photon number must be >= 0");
  }
  [[nodiscard]] int m() const { return m_; }
  [[nodiscard]] double pmf(int n) const {
    detail::require_count(n);
    return n == m_ ? 1.0 : 0.0;
  }
  [[nodiscard]] double cdf(int n) const { return n >= m_ ? 1.0 : 0.0; }
  [[nodiscard]] double dpmf(Param, int n) const {
    detail::require_count(n);
    return 0.0;
  }
  [[nodiscard]] double mean() const { return m_; }
  [[nodiscard]] double variance() const { return 0.0; }
  [[nodiscard]] std::vector<Param> params() const { return {}; }
  [[nodiscard]] std::string family() const { return "fock"; }
  template <class Rng>
  int sample(Rng&) const {
    return m_;
  }

 private:
  int m_;
};

// ---------------------------------------------------------------------------

/// Convenience free functions matching the closed forms.
inline double thermal_pmf(double N, int n) { return ThermalDist(N).pmf(n); }
inline double coherent_pmf(double N, int n) { return CoherentDist(N).pmf(n); }
inline double dolp_pmf(double N, double gamma, int n) { return DolpJointDist(N, gamma).pmf(n); }
inline double displaced_thermal_pmf(double N, double g, int n) { return DisplacedThermalDist(N, g).pmf(n); }

/// Sum of two independent thermal modes (means a, b) evaluated at n; symmetric in (a, b).
inline double two_mode_thermal_pmf(double a, double b, int n) {
  detail::require_mean(a);
  detail::require_mean(b);
  detail::require_count(n);
  if (a < b) std::swap(a, b);
  return detail::two_mode_pmf(a, b, a - b, n);
}

/// Tagged union over all supported sources.
class PhotonDistribution {
 public:
  using Variant = std::variant<ThermalDist, CoherentDist, DolpJointDist, DisplacedThermalDist, FockDist>;

  template <class D>
    requires std::is_constructible_v<Variant, D>
  PhotonDistribution(D d) : v_(std::move(d)) {}  // NOLINT(google-explicit-constructor)

  [[nodiscard]] const Variant& variant() const { return v_; }

  template <class D>
  [[nodiscard]] const D* get_if() const {
    return std::get_if<D>(&v_);
  }

  [[nodiscard]] double pmf(int n) const {
    return std::visit([n](const auto& d) { return d.pmf(n); }, v_);
  }
  [[nodiscard]] double cdf(int n) const {
    return std::visit([n](const auto& d) { return d.cdf(n); }, v_);
  }
  [[nodiscard]] double dpmf(Param p, int n) const {
    return std::visit([&](const auto& d) { return d.dpmf(p, n); }, v_);
  }
  [[nodiscard]] double mean() const {
    return std::visit([](const auto& d) { return d.mean(); }, v_);
  }
  [[nodiscard]] double variance() const {
    return std::visit([](const auto& d) { return d.variance(); }, v_);
  }
  [[nodiscard]] std::vector<Param> params() const {
    return std::visit([](const auto& d) { return d.params(); }, v_);
  }
  [[nodiscard]] std::string family() const {
    return std::visit([](const auto& d) { return d.family(); }, v_);
  }
  [[nodiscard]] bool depends_on(Param p) const {
    const auto ps = params();
    return std::find(ps.begin(), ps.end(), p) != ps.end();
  }

  /// Current value of a parameter; throws ConfigError if the family lacks it.
  [[nodiscard]] double param_value(Param p) const {
    return std::visit(
        [p](const auto& d) -> double {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, FockDist>) {
            throw ConfigError("Fock distribution has no continuous parameters");
          } else {
            if (p == Param::N) return d.N();
            if constexpr (std::is_same_v<D, DolpJointDist>) {
              if (p == Param::Gamma) return d.gamma();
            }
            if constexpr (std::is_same_v<D, DisplacedThermalDist>) {
              if (p == Param::G) return d.g();
            }
            throw ConfigError("parameter " + std::string(to_string(p)) + " not defined for " + d.family());
          }
        },
        v_);
  }

  /// Domain [lo, hi] of a parameter.
  [[nodiscard]] std::pair<double, double> param_domain(Param p) const {
    if (p == Param::N) return {0.0, numeric::kInf};
    return {0.0, 1.0};
  }

  /// Same family with one parameter replaced.
  [[nodiscard]] PhotonDistribution with_param(Param p, double value) const {
    return std::visit(
        [&](const auto& d) -> PhotonDistribution {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ThermalDist> || std::is_same_v<D, CoherentDist>) {
            if (p == Param::N) return D(value);
          } else if constexpr (std::is_same_v<D, DolpJointDist>) {
            if (p == Param::N) return D(value, d.gamma());
            if (p == Param::Gamma) return D(d.N(), value);
          } else if constexpr (std::is_same_v<D, DisplacedThermalDist>) {
            if (p == Param::N) return D(value, d.g());
            if (p == Param::G) return D(d.N(), value);
          }
          throw ConfigError("parameter " + std::string(to_string(p)) + " not defined for " + d.family());
        },
        v_);
  }

  /// p(0..n_max), using the fastest exact path of each family.
  [[nodiscard]] std::vector<double> pmf_table(int n_max) const {
    return std::visit(
        [n_max](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, DolpJointDist> || std::is_same_v<D, DisplacedThermalDist>) {
            return d.pmf_table(n_max);
          } else {
            std::vector<double> out(n_max + 1);
            for (int n = 0; n <= n_max; ++n) out[n] = d.pmf(n);
            return out;
          }
        },
        v_);
  }

  /// Analytic d/dmu p(0..n_max).
  [[nodiscard]] std::vector<double> dpmf_table(Param p, int n_max) const {
    return std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, DolpJointDist> || std::is_same_v<D, DisplacedThermalDist>) {
            return d.dpmf_table(p, n_max);
          } else {
            std::vector<double> out(n_max + 1);
            for (int n = 0; n <= n_max; ++n) out[n] = d.dpmf(p, n);
            return out;
          }
        },
        v_);
  }

  template <class Rng>
  int sample(Rng& rng) const {
    return std::visit([&rng](const auto& d) { return d.sample(rng); }, v_);
  }

 private:
  Variant v_;
};

inline constexpr double kTailMass = 1e-12;

/// Truncation point for series over n: the smallest n with cdf(n) > 1 - 1e-12,
/// capped at ceil(30 (mean + 1)).
inline int tail_cutoff(const PhotonDistribution& d) {
  if (const auto* f = d.get_if<FockDist>()) return f->m();
  const int cap = static_cast<int>(std::ceil(30.0 * (d.mean() + 1.0)));
  if (const auto* t = d.get_if<ThermalDist>()) {
    if (t->N() == 0.0) return 0;
    // 1 - x^{n+1} > 1 - eps  <=>  n + 1 > log(eps)/log(x)
    const double need = std::log(kTailMass) / -std::log1p(1.0 / t->N());
    int n = std::clamp(static_cast<int>(std::floor(need)) - 1, 0, cap);
    while (n < cap && !(t->cdf(n) > 1.0 - kTailMass)) ++n;
    return n;
  }
  if (const auto* dt = d.get_if<DisplacedThermalDist>()) {
    numeric::CompensatedSum s;
    for (int n = 0; n <= cap; ++n) {
      s.add(dt->pmf_series(n));
      if (s.value() > 1.0 - kTailMass) return n;
    }
    return cap;
  }
  if (const auto* dj = d.get_if<DolpJointDist>()) {
    const auto p = dj->pmf_table(cap);
    numeric::CompensatedSum s;
    for (int n = 0; n <= cap; ++n) {
      s.add(p[n]);
      if (s.value() > 1.0 - kTailMass) return n;
    }
    return cap;
  }
  numeric::CompensatedSum s;
  for (int n = 0; n <= cap; ++n) {
    s.add(d.pmf(n));
    if (s.value() > 1.0 - kTailMass) return n;
  }
  return cap;
}

/// (variance - mean)/mean, defined as 0 for the vacuum.
inline double mandel_q(const PhotonDistribution& d) {
  const double m = d.mean();
  if (m == 0.0) return 0.0;
  return (d.variance() - m) / m;
}

template <class Rng>
int sample_photon_number(const PhotonDistribution& d, Rng& rng) {
  return d.sample(rng);
}

/// Builds a distribution from a family name and its parameters.
inline PhotonDistribution make_distribution(std::string_view family, double N, double second = 0.0,
                                            int fock_m = 0) {
  if (family == "thermal") return ThermalDist(N);
  if (family == "coherent") return CoherentDist(N);
  if (family == "dolp") return DolpJointDist(N, second);
  if (family == "displaced") return DisplacedThermalDist(N, second);
  if (family == "fock") return FockDist(fock_m);
  throw ConfigError("unknown family '" + std::string(family) +
                    "' (expected thermal, coherent, dolp, displaced or fock)");
}

}  // namespace pdisc
