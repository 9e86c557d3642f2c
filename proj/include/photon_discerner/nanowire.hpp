#pragma once

// Superconducting-nanowire photon discerner. n absorbed photons seed a hot-
// electron cloud that diffuses across the strip and converts into
// quasiparticles; the depleted superfluid density pushes the bias current
// toward the edges and lowers the barrier a vortex must cross. Integrating the
// thermally activated crossing rate gives the click probability P_n(I_b), and
// searching I_b for P_n = 0.999 gives the staircase of switching currents.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "detector_models.hpp"
#include "errors.hpp"
#include "numeric.hpp"
#include "parallel.hpp"

namespace pdisc {

inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kElectronVolt = 1.602176634e-19;

struct NanowireParams {
  // geometry and operating point
  double width = 500e-9;
  double length = 500e-9;
  double thickness = 50e-9;
  double temperature = 0.3;
  double photon_energy_eV = 0.3;
  // material coefficients; no defaults, they come from a parameter file
  double D_e = 0.0;          // hot-electron diffusion, m^2/s
  double D_qp = 0.0;         // quasiparticle diffusion, m^2/s
  double varsigma = 0.0;     // quasiparticle conversion efficiency
  double tau_r = 0.0;        // recombination time, s
  double tau_qp = 0.0;       // multiplication lifetime, s
  double n_se0 = 0.0;        // superfluid electron density, 1/m^3
  double gap_eV = 0.0;       // superconducting gap
  double eps0 = 0.0;         // vortex energy scale, J
  double xi = 0.0;           // vortex core radius, m
  double I_c = 0.0;          // vortex critical current, A
  double alpha = 0.0;        // crossing-rate prefactor, 1/(A s)
  // numerics
  int nx = 128;              // cells across the width
  int ny = 128;              // cells along the length
  double t_end = 50e-12;
  std::optional<double> dt;  // defaults to 0.2 h^2 / max(D)
  double bias_ceiling = 0.0; // upper end of the switching-current search, A

  [[nodiscard]] double hx() const { return width / nx; }
  [[nodiscard]] double hy() const { return length / ny; }
  [[nodiscard]] double max_stable_dt() const {
    const double h = std::min(hx(), hy());
    return 0.25 * h * h / std::max(D_e, D_qp);
  }
  [[nodiscard]] double time_step() const { return dt ? *dt : 0.8 * max_stable_dt(); }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("nanowire parameter '") + name + "' must be > 0");
    };
    positive(width, "width");
    positive(length, "length");
    positive(thickness, "thickness");
    positive(temperature, "temperature");
    positive(photon_energy_eV, "photon_energy_eV");
    positive(D_e, "D_e");
    positive(D_qp, "D_qp");
    if (!(varsigma >= 0.0)) throw ConfigError("nanowire parameter 'varsigma' must be >= 0");
    positive(tau_r, "tau_r");
    positive(tau_qp, "tau_qp");
    positive(n_se0, "n_se0");
    positive(gap_eV, "gap_eV");
    positive(eps0, "eps0");
    positive(xi, "xi");
    positive(I_c, "I_c");
    positive(alpha, "alpha");
    positive(t_end, "t_end");
    if (!(xi < width)) throw ConfigError("vortex core radius must be smaller than the width");
    if (nx < 4 || ny < 4) throw ConfigError("nanowire grid needs at least 4x4 cells");
    if (dt && !(*dt > 0.0)) throw ConfigError("time step must be > 0");
    if (time_step() > max_stable_dt() * (1 + 1e-12)) {
      std::ostringstream os;
      os << "time step " << time_step() << " s exceeds the explicit diffusion limit " << max_stable_dt() << " s";
      throw ConfigError(os.str());
    }
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j{{"width", width},     {"length", length}, {"thickness", thickness},
                     {"temperature", temperature}, {"photon_energy_eV", photon_energy_eV},
                     {"D_e", D_e},         {"D_qp", D_qp},     {"varsigma", varsigma},
                     {"tau_r", tau_r},     {"tau_qp", tau_qp}, {"n_se0", n_se0},
                     {"gap_eV", gap_eV},   {"eps0", eps0},     {"xi", xi},
                     {"I_c", I_c},         {"alpha", alpha},   {"nx", nx},
                     {"ny", ny},           {"t_end", t_end},   {"bias_ceiling", bias_ceiling}};
    if (dt) j["dt"] = *dt;
    return j;
  }

  /// Reads SI-unit fields; material coefficients are required, geometry and
  /// numerics fall back to the defaults above. Unknown keys are rejected.
  static NanowireParams from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("nanowire parameters must be a JSON object");
    NanowireParams p;
    const std::vector<std::pair<const char*, double*>> fields = {
        {"width", &p.width},   {"length", &p.length}, {"thickness", &p.thickness},
        {"temperature", &p.temperature}, {"photon_energy_eV", &p.photon_energy_eV},
        {"D_e", &p.D_e},       {"D_qp", &p.D_qp},     {"varsigma", &p.varsigma},
        {"tau_r", &p.tau_r},   {"tau_qp", &p.tau_qp}, {"n_se0", &p.n_se0},
        {"gap_eV", &p.gap_eV}, {"eps0", &p.eps0},     {"xi", &p.xi},
        {"I_c", &p.I_c},       {"alpha", &p.alpha},   {"t_end", &p.t_end},
        {"bias_ceiling", &p.bias_ceiling}};
    const std::vector<const char*> required = {"D_e", "D_qp", "varsigma", "tau_r", "tau_qp", "n_se0",
                                               "gap_eV", "eps0", "xi", "I_c", "alpha", "bias_ceiling"};
    for (const char* r : required)
      if (!j.contains(r)) throw ConfigError(std::string("nanowire parameter file is missing '") + r + "'");
    for (const auto& [key, value] : j.items()) {
      bool known = key == "nx" || key == "ny" || key == "dt" || key == "_comment";
      for (const auto& f : fields) known = known || key == f.first;
      if (!known) throw ConfigError("unknown nanowire parameter '" + key + "'");
    }
    try {
      for (auto& [key, ptr] : fields)
        if (j.contains(key)) *ptr = j.at(key).get<double>();
      if (j.contains("nx")) p.nx = j.at("nx").get<int>();
      if (j.contains("ny")) p.ny = j.at("ny").get<int>();
      if (j.contains("dt")) p.dt = j.at("dt").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad nanowire parameter: ") + e.what());
    }
    p.validate();
    return p;
  }
};

// ---------------------------------------------------------------------------
// Vortex barrier.

struct BarrierProfile {
  std::vector<double> x_nu;
  std::vector<double> tan_term;      // (pi/W) int_{(xi-W)/2}^{x} (n_se/n_se0) tan(pi x'/W) dx'
  std::vector<double> current_term;  // 2W/(I_c e xi) int_{-W/2}^{x} (n_se/n_se0) j_y dx'
  std::vector<double> U;             // barrier in units of eps0
  double U_max = 0.0;
};

/// Barrier across the strip from a cross-wire profile on nodes x (from -W/2
/// to W/2, increasing) of n_se/n_se0 and the sheet current density j_y (A/m).
///
/// The barrier grows from the entry edge toward the middle, so the tan term
/// enters with the sign that makes it positive there: U = -tan_term -
/// current_term. Within each cell the density ratio is taken as its mean and
/// tan is integrated exactly, which keeps the pole near the edge harmless;
/// the last half-cell before x = W/2 is excluded.
inline BarrierProfile vortex_barrier(const std::vector<double>& x, const std::vector<double>& ns_ratio,
                                     const std::vector<double>& j_y, const NanowireParams& p) {
  const std::size_t n = x.size();
  if (n < 3 || ns_ratio.size() != n || j_y.size() != n) throw DomainError("barrier profile arrays must match (>= 3 nodes)");
  const double W = p.width;
  if (std::abs(x.front() + 0.5 * W) > 1e-9 * W || std::abs(x.back() - 0.5 * W) > 1e-9 * W)
    throw DomainError("barrier profile must span the full width");
  const double k = numeric::kPi / W;
  const double K = 2.0 * W / (p.I_c * std::exp(1.0) * p.xi);
  auto log_cos = [&](double v) { return std::log(std::abs(std::cos(k * v))); };
  // (pi/W) int_a^b tan(pi x/W) dx
  auto tan_int = [&](double a, double b) { return log_cos(a) - log_cos(b); };

  BarrierProfile out;
  const double x0 = 0.5 * (p.xi - W);
  // cumulative current integral at each node (trapezoid)
  std::vector<double> cur(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    cur[i] = cur[i - 1] + 0.5 * (x[i] - x[i - 1]) * (ns_ratio[i - 1] * j_y[i - 1] + ns_ratio[i] * j_y[i]);

  std::size_t i = 1;
  while (i < n && x[i] <= x0) ++i;
  // the entry point itself
  const double w0 = (x0 - x[i - 1]) / (x[i] - x[i - 1]);
  const double r0 = ns_ratio[i - 1] + w0 * (ns_ratio[i] - ns_ratio[i - 1]);
  const double f_prev = ns_ratio[i - 1] * j_y[i - 1], f_next = ns_ratio[i] * j_y[i];
  const double f0 = f_prev + w0 * (f_next - f_prev);
  const double c0 = cur[i - 1] + 0.5 * (x0 - x[i - 1]) * (f_prev + f0);
  double T = 0.0, r_prev = r0, x_prev = x0;
  auto push = [&](double xv, double t, double c) {
    out.x_nu.push_back(xv);
    out.tan_term.push_back(t);
    out.current_term.push_back(K * c);
    out.U.push_back(-t - K * c);
  };
  push(x0, 0.0, c0);
  for (; i + 1 < n; ++i) {
    T += 0.5 * (r_prev + ns_ratio[i]) * tan_int(x_prev, x[i]);
    push(x[i], T, cur[i]);
    r_prev = ns_ratio[i];
    x_prev = x[i];
  }
  out.U_max = *std::max_element(out.U.begin(), out.U.end());
  return out;
}

// ---------------------------------------------------------------------------
// Hot-spot evolution.

struct HotspotState {
  double time = 0.0;
  int nx = 0, ny = 0;
  std::vector<double> C_e, C_qp, n_se;  // row-major [iy * nx + ix], 1/m^3
  std::vector<double> x;                // cross-wire nodes, -W/2 .. W/2
  std::vector<double> ns_ratio;         // n_se/n_se0 along the line through the deposit
  std::vector<double> j_y;              // sheet current density, A/m
  BarrierProfile barrier;
  double hot_electrons = 0.0;           // integral of C_e over the volume
  double total_current = 0.0;           // integral of j_y across the width
};

namespace detail {

class HotspotSolver {
 public:
  HotspotSolver(const NanowireParams& p, int photons) : p_(p), nx_(p.nx), ny_(p.ny) {
    p.validate();
    if (photons < 0) throw DomainError("photon number must be >= 0");
    const std::size_t N = static_cast<std::size_t>(nx_) * ny_;
    Ce_.assign(N, 0.0);
    Cqp_.assign(N, 0.0);
    lap_.assign(N, 0.0);
    dt_ = p.time_step();
    if (photons > 0) {
      // Gaussian of width xi at the centre, normalized on the grid to n electrons
      double sum = 0.0;
      for (int iy = 0; iy < ny_; ++iy)
        for (int ix = 0; ix < nx_; ++ix) {
          const double dx = xc(ix), dy = yc(iy) - 0.5 * p.length;
          const double g = std::exp(-0.5 * (dx * dx + dy * dy) / (p.xi * p.xi));
          Ce_[idx(ix, iy)] = g;
          sum += g;
        }
      const double scale = photons / (sum * cell_volume());
      for (auto& v : Ce_) v *= scale;
    }
    source_ = p.varsigma * p.photon_energy_eV / (p.gap_eV * p.tau_qp);
  }

  void step() {
    laplacian(Cqp_, lap_);
    const double decay = std::exp(-t_ / p_.tau_qp);
    for (std::size_t k = 0; k < Cqp_.size(); ++k) {
      const double c = Cqp_[k];
      const double gen = source_ * (p_.n_se0 - c) / p_.n_se0 * decay * Ce_[k];
      Cqp_[k] = std::max(0.0, c + dt_ * (p_.D_qp * lap_[k] - c / p_.tau_r + gen));
    }
    laplacian(Ce_, lap_);
    for (std::size_t k = 0; k < Ce_.size(); ++k) Ce_[k] += dt_ * p_.D_e * lap_[k];
    t_ += dt_;
  }

  [[nodiscard]] double time() const { return t_; }
  [[nodiscard]] double dt() const { return dt_; }

  /// Cross-wire nodes: the two edges plus every cell centre.
  [[nodiscard]] std::vector<double> nodes() const {
    std::vector<double> x{-0.5 * p_.width};
    for (int ix = 0; ix < nx_; ++ix) x.push_back(xc(ix));
    x.push_back(0.5 * p_.width);
    return x;
  }

  /// n_se/n_se0 on the nodes along the line through the deposit (mean of the
  /// two central rows when ny is even); zero-flux edges copy the edge cell.
  [[nodiscard]] std::vector<double> center_ratio() const {
    const int a = (ny_ - 1) / 2, b = ny_ / 2;
    std::vector<double> r;
    r.reserve(nx_ + 2);
    for (int ix = 0; ix < nx_; ++ix) {
      const double c = 0.5 * (Cqp_[idx(ix, a)] + Cqp_[idx(ix, b)]);
      r.push_back(std::max(0.0, p_.n_se0 - c) / p_.n_se0);
    }
    r.insert(r.begin(), r.front());
    r.push_back(r.back());
    return r;
  }

  [[nodiscard]] double hot_electrons() const {
    numeric::CompensatedSum s;
    for (double v : Ce_) s.add(v);
    return s.value() * cell_volume();
  }

  [[nodiscard]] HotspotState state(double I_b) const;

 private:
  [[nodiscard]] std::size_t idx(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx_ + ix; }
  [[nodiscard]] double xc(int ix) const { return -0.5 * p_.width + (ix + 0.5) * p_.hx(); }
  [[nodiscard]] double yc(int iy) const { return (iy + 0.5) * p_.hy(); }
  [[nodiscard]] double cell_volume() const { return p_.hx() * p_.hy() * p_.thickness; }

  // five-point Laplacian with mirrored (zero-flux) boundaries
  void laplacian(const std::vector<double>& u, std::vector<double>& out) const {
    const double ax = 1.0 / (p_.hx() * p_.hx()), ay = 1.0 / (p_.hy() * p_.hy());
    for (int iy = 0; iy < ny_; ++iy) {
      const int ym = iy > 0 ? iy - 1 : iy, yp = iy + 1 < ny_ ? iy + 1 : iy;
      for (int ix = 0; ix < nx_; ++ix) {
        const int xm = ix > 0 ? ix - 1 : ix, xp = ix + 1 < nx_ ? ix + 1 : ix;
        const double c = u[idx(ix, iy)];
        out[idx(ix, iy)] = ax * (u[idx(xm, iy)] + u[idx(xp, iy)] - 2 * c) + ay * (u[idx(ix, ym)] + u[idx(ix, yp)] - 2 * c);
      }
    }
  }

  NanowireParams p_;
  int nx_, ny_;
  std::vector<double> Ce_, Cqp_, lap_;
  double t_ = 0.0, dt_ = 0.0, source_ = 0.0;
};

/// Sheet current I_b n_se(x)/int n_se dx' on the nodes; uniform when the
/// superfluid is fully depleted. Integrates to I_b by the same trapezoid rule.
inline std::vector<double> redistribute_current(const std::vector<double>& x, const std::vector<double>& ratio,
                                                double I_b) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (ratio[i - 1] + ratio[i]);
  std::vector<double> j(x.size(), I_b / (x.back() - x.front()));
  if (area > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) j[i] = I_b * ratio[i] / area;
  return j;
}

inline double trapezoid_nodes(const std::vector<double>& x, const std::vector<double>& f) {
  numeric::CompensatedSum s;
  for (std::size_t i = 1; i < x.size(); ++i) s.add(0.5 * (x[i] - x[i - 1]) * (f[i - 1] + f[i]));
  return s.value();
}

inline HotspotState HotspotSolver::state(double I_b) const {
  HotspotState s;
  s.time = t_;
  s.nx = nx_;
  s.ny = ny_;
  s.C_e = Ce_;
  s.C_qp = Cqp_;
  s.n_se.resize(Cqp_.size());
  for (std::size_t k = 0; k < Cqp_.size(); ++k) s.n_se[k] = std::max(0.0, p_.n_se0 - Cqp_[k]);
  s.x = nodes();
  s.ns_ratio = center_ratio();
  s.j_y = redistribute_current(s.x, s.ns_ratio, I_b);
  s.barrier = vortex_barrier(s.x, s.ns_ratio, s.j_y, p_);
  s.hot_electrons = hot_electrons();
  s.total_current = trapezoid_nodes(s.x, s.j_y);
  return s;
}

}  // namespace detail

/// States at t = 0 and then every `every` steps up to t_end (the final step is
/// always included). `every` = 0 keeps only the first and last states.
inline std::vector<HotspotState> evolve_hotspot(const NanowireParams& p, int photons, double I_b,
                                                std::optional<double> t_end = std::nullopt, int every = 0) {
  if (!(I_b >= 0.0)) throw DomainError("bias current must be >= 0");
  detail::HotspotSolver solver(p, photons);
  const double T = t_end ? *t_end : p.t_end;
  const long steps = std::max(1L, std::lround(std::ceil(T / solver.dt() - 1e-9)));
  std::vector<HotspotState> out{solver.state(I_b)};
  for (long s = 1; s <= steps; ++s) {
    solver.step();
    if (s == steps || (every > 0 && s % every == 0)) out.push_back(solver.state(I_b));
  }
  return out;
}

/// Bias-independent part of a trajectory: the centre-line density ratio at
/// every time step. Click probabilities for any bias are evaluated from it.
struct ProfileHistory {
  int photons = 0;
  std::vector<double> x;
  std::vector<double> times;
  std::vector<std::vector<double>> ratio;
};

inline ProfileHistory hotspot_history(const NanowireParams& p, int photons, std::optional<double> t_end = std::nullopt) {
  detail::HotspotSolver solver(p, photons);
  const double T = t_end ? *t_end : p.t_end;
  const long steps = std::max(1L, std::lround(std::ceil(T / solver.dt() - 1e-9)));
  ProfileHistory h;
  h.photons = photons;
  h.x = solver.nodes();
  h.times.push_back(0.0);
  h.ratio.push_back(solver.center_ratio());
  for (long s = 1; s <= steps; ++s) {
    solver.step();
    h.times.push_back(solver.time());
    // without photons nothing changes; keep the history cheap
    h.ratio.push_back(photons == 0 ? h.ratio.front() : solver.center_ratio());
  }
  return h;
}

/// U_max(t) in units of eps0 along a history at bias I_b.
inline std::vector<double> barrier_maxima(const ProfileHistory& h, const NanowireParams& p, double I_b) {
  std::vector<double> u(h.times.size());
  std::optional<double> constant;
  for (std::size_t k = 0; k < h.times.size(); ++k) {
    if (h.photons == 0 && constant) {
      u[k] = *constant;
      continue;
    }
    u[k] = vortex_barrier(h.x, h.ratio[k], detail::redistribute_current(h.x, h.ratio[k], I_b), p).U_max;
    if (h.photons == 0) constant = u[k];
  }
  return u;
}

/// P_n = 1 - exp(-int alpha I_b exp(-U_max(t)/k_B T) dt), trapezoid in time.
inline double click_probability(const ProfileHistory& h, const NanowireParams& p, double I_b) {
  if (!(I_b >= 0.0)) throw DomainError("bias current must be >= 0");
  if (I_b == 0.0) return 0.0;
  const auto u = barrier_maxima(h, p, I_b);
  const double beta = p.eps0 / (kBoltzmann * p.temperature);
  numeric::CompensatedSum integral;
  for (std::size_t k = 1; k < u.size(); ++k) {
    const double g0 = p.alpha * I_b * std::exp(-beta * u[k - 1]);
    const double g1 = p.alpha * I_b * std::exp(-beta * u[k]);
    const double step = 0.5 * (h.times[k] - h.times[k - 1]) * (g0 + g1);
    // a vanished barrier switches for certain; stop before the sum overflows
    if (!(step < 1e3)) return 1.0;
    integral.add(step);
    if (integral.value() > 1e3) return 1.0;
  }
  return std::clamp(-std::expm1(-integral.value()), 0.0, 1.0);
}

inline double click_probability(const NanowireParams& p, int photons, double I_b,
                                std::optional<double> t_end = std::nullopt) {
  return click_probability(hotspot_history(p, photons, t_end), p, I_b);
}

struct SwitchingCurrent {
  int photons = 0;
  double I_sw = 0.0;        // A
  double probability = 0.0; // P_n at I_sw
  bool reachable = true;    // P_target reached below the bias ceiling
};

/// Smallest bias (to relative 1e-4) with P_n >= P_target, by bisection.
inline SwitchingCurrent switching_current(const ProfileHistory& h, const NanowireParams& p, double P_target = 0.999) {
  if (!(P_target > 0.0 && P_target < 1.0)) throw DomainError("target probability must lie in (0, 1)");
  if (!(p.bias_ceiling > 0.0)) throw ConfigError("bias_ceiling must be > 0 for the switching-current search");
  SwitchingCurrent s;
  s.photons = h.photons;
  double lo = 0.0, hi = p.bias_ceiling;
  double P_hi = click_probability(h, p, hi);
  if (P_hi < P_target) {
    s.reachable = false;
    s.I_sw = hi;
    s.probability = P_hi;
    return s;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-4 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double P = click_probability(h, p, mid);
    if (P >= P_target) {
      hi = mid;
      P_hi = P;
    } else {
      lo = mid;
    }
  }
  s.I_sw = hi;
  s.probability = P_hi;
  return s;
}

inline SwitchingCurrent switching_current(const NanowireParams& p, int photons, double P_target = 0.999) {
  return switching_current(hotspot_history(p, photons), p, P_target);
}

/// Switching currents for n = 0..n_max, computed in parallel.
inline std::vector<SwitchingCurrent> switching_currents(const NanowireParams& p, int n_max, unsigned threads = 1,
                                                        double P_target = 0.999) {
  std::vector<SwitchingCurrent> out(n_max + 1);
  parallel_for(out.size(), threads, [&](std::size_t n) { out[n] = switching_current(p, static_cast<int>(n), P_target); });
  return out;
}

struct BiasChoice {
  int threshold = 1;
  double I_b = 0.0;               // A
  double normalized = 0.0;        // I_b / I_SW,0
  std::vector<double> P;          // P_0 .. P_{t+2}
  bool interval_empty = false;    // I_SW,t >= I_SW,t-1: no clean step exists
  double contrast = 0.0;          // P_t - P_{t-1}

  [[nodiscard]] TabulatedResponse response() const { return TabulatedResponse(P); }
};

/// Bias halfway between I_SW,t and I_SW,t-1 and the response it produces.
inline BiasChoice bias_for_threshold(const NanowireParams& p, int t, unsigned threads = 1) {
  if (t < 1) throw DomainError("photon threshold must be >= 1");
  std::vector<ProfileHistory> hist(t + 3);
  parallel_for(hist.size(), threads, [&](std::size_t n) { hist[n] = hotspot_history(p, static_cast<int>(n)); });
  const auto sw_t = switching_current(hist[t], p);
  const auto sw_prev = switching_current(hist[t - 1], p);
  const auto sw_0 = t - 1 == 0 ? sw_prev : switching_current(hist[0], p);
  BiasChoice b;
  b.threshold = t;
  b.interval_empty = !(sw_t.I_sw < sw_prev.I_sw) || !sw_t.reachable;
  b.I_b = 0.5 * (sw_t.I_sw + sw_prev.I_sw);
  b.normalized = b.I_b / sw_0.I_sw;
  b.P.resize(hist.size());
  parallel_for(hist.size(), threads, [&](std::size_t n) { b.P[n] = click_probability(hist[n], p, b.I_b); });
  b.contrast = b.P[t] - b.P[t - 1];
  return b;
}

struct BiasSchedule {
  double I_sw0 = 0.0;
  std::vector<SwitchingCurrent> switching;  // n = 0..t_max
  std::vector<std::pair<int, double>> rows; // (t, I_SW,t / I_SW,0), t = 1..t_max

  [[nodiscard]] bool strictly_decreasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (!(rows[i].second < rows[i - 1].second)) return false;
    return true;
  }
  static std::string csv_header() { return "t,bias_fraction"; }
  [[nodiscard]] std::string csv() const {
    std::ostringstream os;
    os.precision(12);
    os << csv_header() << "\r\n";
    for (const auto& [t, f] : rows) os << t << ',' << f << "\r\n";
    return os.str();
  }
};

/// The minimum bias for threshold t is I_SW,t: from there up an n >= t event clicks.
inline BiasSchedule bias_schedule(const NanowireParams& p, int t_max, unsigned threads = 1) {
  if (t_max < 1) throw DomainError("t_max must be >= 1");
  BiasSchedule s;
  s.switching = switching_currents(p, t_max, threads);
  s.I_sw0 = s.switching[0].I_sw;
  for (int t = 1; t <= t_max; ++t) s.rows.emplace_back(t, s.switching[t].I_sw / s.I_sw0);
  return s;
}

struct SweepRow {
  int photons = 0;
  double bias_fraction = 0.0;  // I_b / I_SW,0
  double P = 0.0;
};

/// P_n over a grid of normalized bias currents for n = 0..n_max.
inline std::vector<SweepRow> click_sweep(const NanowireParams& p, int n_max, const std::vector<double>& fractions,
                                         unsigned threads = 1) {
  std::vector<ProfileHistory> hist(n_max + 1);
  parallel_for(hist.size(), threads, [&](std::size_t n) { hist[n] = hotspot_history(p, static_cast<int>(n)); });
  const double I0 = switching_current(hist[0], p).I_sw;
  std::vector<SweepRow> rows(hist.size() * fractions.size());
  parallel_for(rows.size(), threads, [&](std::size_t k) {
    const std::size_t n = k / fractions.size(), f = k % fractions.size();
    rows[k] = {static_cast<int>(n), fractions[f], click_probability(hist[n], p, fractions[f] * I0)};
  });
  return rows;
}

}  // namespace pdisc
