#pragma once

// Polarized thermal scenes and the quantum DoLP camera.
//
// A surface is a blackbody under a dielectric interface. Each pixel sees the
// environment reflected by the interface plus the body's own emission
// transmitted through it; Fresnel reflectances in the local s-p frame set the
// polarization. The camera turns the normalized (N, DoLP) maps into per-pixel
// two-mode thermal sources and estimates them back from threshold clicks.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptive_estimation.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "photon_stats.hpp"
#include "rng.hpp"

namespace pdisc {

struct StokesVector {
  double S0 = 0.0, S1 = 0.0, S2 = 0.0;

  [[nodiscard]] double dolp() const {
    if (!(S0 > 0.0)) return 0.0;
    return std::min(1.0, std::hypot(S1, S2) / S0);
  }
};

// ---------------------------------------------------------------------------
// Fresnel optics and Mueller matrices.

struct FresnelCoefficients {
  double Rs = 0.0, Rp = 0.0;  // power reflectances
  double rs = 0.0, rp = 0.0;  // amplitude reflectances
  bool total_internal = false;
};

/// Reflection of light travelling in index n1 onto index n2 at incidence theta.
inline FresnelCoefficients fresnel(double n1, double n2, double theta) {
  if (!(n1 >= 1.0 && n2 >= 1.0)) throw DomainError("refractive indices must be >= 1");
  if (!(theta >= 0.0 && theta < numeric::kPi / 2)) throw DomainError("incidence angle must lie in [0, pi/2)");
  FresnelCoefficients f;
  const double ci = std::cos(theta);
  const double st = n1 * std::sin(theta) / n2;
  if (st >= 1.0) {
    f.Rs = f.Rp = 1.0;
    f.rs = f.rp = 1.0;
    f.total_internal = true;
    return f;
  }
  const double ct = std::sqrt((1.0 - st) * (1.0 + st));
  f.rs = (n1 * ci - n2 * ct) / (n1 * ci + n2 * ct);
  f.rp = (n2 * ci - n1 * ct) / (n2 * ci + n1 * ct);
  f.Rs = f.rs * f.rs;
  f.Rp = f.rp * f.rp;
  return f;
}

inline std::pair<double, double> fresnel_power(double n1, double n2, double theta) {
  const auto f = fresnel(n1, n2, theta);
  return {f.Rs, f.Rp};
}

using Mat3 = std::array<std::array<double, 3>, 3>;

struct MuellerPair {
  Mat3 R{};  // reflection
  Mat3 T{};  // transmission of the body's emission
};

/// Reflection and transmission matrices acting on (S0, S1, S2) in the local
/// s-p frame, S1 > 0 meaning s-polarized. The transmission off-diagonal is
/// (Rp - Rs)/2: transmitted emission is p-rich, which is what makes an
/// isothermal scene unpolarized. `rs_rp` is the amplitude product r_s r_p
/// (defaults to +sqrt(Rs Rp)). `same_sign_transmission` keeps +(Rs - Rp)/2 in
/// the transmission matrix instead, for comparison against that convention.
inline MuellerPair mueller_matrices(double Rs, double Rp, std::optional<double> rs_rp = std::nullopt,
                                    bool same_sign_transmission = false) {
  if (!(Rs >= 0.0 && Rs <= 1.0 && Rp >= 0.0 && Rp <= 1.0)) throw DomainError("reflectances must lie in [0, 1]");
  const double mean = 0.5 * (Rs + Rp), half = 0.5 * (Rs - Rp);
  MuellerPair m;
  m.R = {{{mean, half, 0.0}, {half, mean, 0.0}, {0.0, 0.0, rs_rp ? *rs_rp : std::sqrt(Rs * Rp)}}};
  const double t = same_sign_transmission ? half : -half;
  m.T = {{{1.0 - mean, t, 0.0}, {t, 1.0 - mean, 0.0}, {0.0, 0.0, std::sqrt((1.0 - Rs) * (1.0 - Rp))}}};
  return m;
}

inline std::array<double, 3> apply(const Mat3& M, const std::array<double, 3>& v) {
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) out[i] = M[i][0] * v[0] + M[i][1] * v[1] + M[i][2] * v[2];
  return out;
}

/// Planck spectral radiance B(T, lambda) in W sr^-1 m^-3.
inline double planck_radiance(double T, double lambda) {
  if (!(T > 0.0) || !(lambda > 0.0)) throw DomainError("temperature and wavelength must be > 0");
  constexpr double h = 6.62607015e-34, c = 299792458.0, k = 1.380649e-23;
  const double x = h * c / (lambda * k * T);
  if (x > 700.0) return 0.0;
  return 2.0 * h * c * c / std::pow(lambda, 5) / std::expm1(x);
}

// ---------------------------------------------------------------------------
// Scenes.

enum class Geometry { Sphere, Plane, Cylinder, NormalMapFile };

inline Geometry parse_geometry(std::string_view s) {
  if (s == "sphere") return Geometry::Sphere;
  if (s == "plane") return Geometry::Plane;
  if (s == "cylinder") return Geometry::Cylinder;
  if (s == "normal-map") return Geometry::NormalMapFile;
  throw ConfigError("unknown geometry '" + std::string(s) + "' (expected sphere, plane, cylinder or normal-map)");
}

inline std::string to_string(Geometry g) {
  switch (g) {
    case Geometry::Sphere: return "sphere";
    case Geometry::Plane: return "plane";
    case Geometry::Cylinder: return "cylinder";
    case Geometry::NormalMapFile: return "normal-map";
  }
  return "?";
}

struct SceneSpec {
  Geometry geometry = Geometry::Sphere;
  double surface_temperature = 310.15;
  double environment_temperature = 273.15;
  double n_interior = 1.1;
  double n_exterior = 1.0;
  double wavelength = 10e-6;
  int width = 64;
  int height = 64;
  double radius = 0.9;     // sphere/cylinder radius as a fraction of the half-size of the image
  double tilt_deg = 0.0;   // plane tilt about the horizontal image axis
  std::optional<io::NormalMap> normal_map;

  void validate() const {
    if (!(surface_temperature > 0.0) || !(environment_temperature > 0.0))
      throw ConfigError("temperatures must be > 0 K");
    if (!(n_interior >= 1.0) || !(n_exterior >= 1.0)) throw ConfigError("refractive indices must be >= 1");
    if (!(wavelength > 0.0)) throw ConfigError("wavelength must be > 0");
    if (geometry == Geometry::NormalMapFile) {
      if (!normal_map) throw ConfigError("normal-map geometry needs a normal map");
    } else if (width < 1 || height < 1) {
      throw ConfigError("image dimensions must be >= 1");
    }
    if (!(radius > 0.0)) throw ConfigError("radius must be > 0");
    if (!(std::abs(tilt_deg) < 90.0)) throw ConfigError("plane tilt must lie in (-90, 90) degrees");
  }
  [[nodiscard]] int image_width() const { return normal_map ? normal_map->width : width; }
  [[nodiscard]] int image_height() const { return normal_map ? normal_map->height : height; }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"geometry", to_string(geometry)},
            {"surface_temperature", surface_temperature},
            {"environment_temperature", environment_temperature},
            {"n_interior", n_interior},
            {"n_exterior", n_exterior},
            {"wavelength", wavelength},
            {"width", image_width()},
            {"height", image_height()},
            {"radius", radius},
            {"tilt_deg", tilt_deg}};
  }
};

/// What a pixel sees: background environment, or a surface with a normal.
struct PixelGeometry {
  bool object = false;
  bool valid = true;
  std::array<double, 3> normal{0.0, 0.0, 1.0};
};

inline PixelGeometry pixel_geometry(const SceneSpec& s, int i, int j) {
  PixelGeometry g;
  if (s.geometry == Geometry::NormalMapFile) {
    auto n = s.normal_map->normals[static_cast<std::size_t>(j) * s.normal_map->width + i];
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    g.object = true;
    if (!(len > 1e-12) || !std::isfinite(len)) {
      g.valid = false;
      return g;
    }
    for (auto& c : n) c /= len;
    if (n[2] <= 0.0) g.valid = false;  // facing away from the camera
    g.normal = n;
    return g;
  }
  const double half = 0.5 * std::min(s.width, s.height);
  const double u = (i + 0.5 - 0.5 * s.width) / half;
  const double v = (0.5 * s.height - (j + 0.5)) / half;
  const double R = s.radius;
  switch (s.geometry) {
    case Geometry::Sphere: {
      const double r2 = (u * u + v * v) / (R * R);
      if (r2 >= 1.0) return g;
      g.object = true;
      g.normal = {u / R, v / R, std::sqrt(1.0 - r2)};
      return g;
    }
    case Geometry::Cylinder: {
      const double x = u / R;
      if (std::abs(x) >= 1.0) return g;
      g.object = true;
      g.normal = {x, 0.0, std::sqrt(1.0 - x * x)};
      return g;
    }
    case Geometry::Plane: {
      const double a = s.tilt_deg * numeric::kPi / 180.0;
      g.object = true;
      g.normal = {0.0, std::sin(a), std::cos(a)};
      return g;
    }
    case Geometry::NormalMapFile: break;
  }
  return g;
}

namespace detail {

struct LocalFrame {
  double theta = 0.0;     // incidence angle of the view ray
  double cos2 = 1.0;      // rotation of the local s axis into the camera frame
  double sin2 = 0.0;
  bool degenerate = false;
};

inline LocalFrame local_frame(const std::array<double, 3>& n, const std::array<double, 3>& view) {
  LocalFrame f;
  const double c = std::clamp(n[0] * view[0] + n[1] * view[1] + n[2] * view[2], -1.0, 1.0);
  f.theta = std::acos(std::abs(c));
  if (std::abs(c) > 1.0 - 1e-9) {
    f.degenerate = true;
    return f;
  }
  // s axis = normalized n x view, expressed in the camera (x, y) plane
  const double sx = n[1] * view[2] - n[2] * view[1];
  const double sy = n[2] * view[0] - n[0] * view[2];
  const double psi = std::atan2(sy, sx);
  f.cos2 = std::cos(2.0 * psi);
  f.sin2 = std::sin(2.0 * psi);
  return f;
}

inline StokesVector to_camera(const std::array<double, 3>& local, const LocalFrame& f) {
  if (f.degenerate) return {local[0], 0.0, 0.0};
  return {local[0], f.cos2 * local[1] - f.sin2 * local[2], f.sin2 * local[1] + f.cos2 * local[2]};
}

inline MuellerPair pixel_mueller(const SceneSpec& s, double theta) {
  const auto fr = fresnel(s.n_exterior, s.n_interior, std::min(theta, std::nextafter(numeric::kPi / 2, 0.0)));
  return mueller_matrices(fr.Rs, fr.Rp, fr.rs * fr.rp);
}

}  // namespace detail

/// Monte Carlo pixel: environment reflected by R plus T applied to the emission
/// E0 (1, cos theta, sin theta) with theta uniform, averaged over `samples` draws.
inline StokesVector render_pixel(const std::array<double, 3>& normal, const std::array<double, 3>& view,
                                 const SceneSpec& scene, int samples, RngStream& rng) {
  if (samples < 1) throw DomainError("samples must be >= 1");
  const auto frame = detail::local_frame(normal, view);
  const auto m = detail::pixel_mueller(scene, frame.theta);
  const double E0 = planck_radiance(scene.surface_temperature, scene.wavelength);
  const double Eenv = planck_radiance(scene.environment_temperature, scene.wavelength);
  const auto reflected = apply(m.R, {Eenv, 0.0, 0.0});
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (int k = 0; k < samples; ++k) {
    const double th = 2.0 * numeric::kPi * rng.uniform();
    const auto t = apply(m.T, {E0, E0 * std::cos(th), E0 * std::sin(th)});
    for (int i = 0; i < 3; ++i) acc[i] += t[i];
  }
  for (int i = 0; i < 3; ++i) acc[i] = reflected[i] + acc[i] / samples;
  return detail::to_camera(acc, frame);
}

/// The theta-average of render_pixel in closed form (the cos/sin terms vanish).
inline StokesVector expected_pixel(const std::array<double, 3>& normal, const std::array<double, 3>& view,
                                   const SceneSpec& scene) {
  const auto frame = detail::local_frame(normal, view);
  const auto m = detail::pixel_mueller(scene, frame.theta);
  const double E0 = planck_radiance(scene.surface_temperature, scene.wavelength);
  const double Eenv = planck_radiance(scene.environment_temperature, scene.wavelength);
  const auto r = apply(m.R, {Eenv, 0.0, 0.0});
  const auto t = apply(m.T, {E0, 0.0, 0.0});
  return detail::to_camera({r[0] + t[0], r[1] + t[1], r[2] + t[2]}, frame);
}

struct StokesImage {
  int width = 0, height = 0;
  std::vector<StokesVector> stokes;
  std::vector<double> N;          // S0 min-max normalized to [0, 1]
  std::vector<double> dolp_raw;   // sqrt(S1^2 + S2^2)/S0
  std::vector<double> dolp;       // dolp_raw min-max normalized to [0, 1]
  std::vector<unsigned char> object;
  std::vector<unsigned char> valid;
  bool N_constant = false;        // normalization impossible; map set to 0
  bool dolp_constant = false;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(width) * height; }
};

namespace detail {

inline std::vector<double> min_max(const std::vector<double>& v, bool* constant) {
  double lo = numeric::kInf, hi = -numeric::kInf;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<double> out(v.size(), 0.0);
  *constant = !(hi > lo);
  if (*constant) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
  return out;
}

}  // namespace detail

/// Renders every pixel (orthographic camera looking down -z). `samples` = 0
/// uses the closed-form theta average; otherwise each pixel is Monte Carlo
/// sampled from its own substream. Background pixels see the unpolarized
/// environment; invalid normals are rendered as background and flagged.
inline StokesImage render_scene(const SceneSpec& scene, int samples, const RngStream& rng, unsigned threads = 1) {
  scene.validate();
  if (samples < 0) throw DomainError("samples must be >= 0");
  StokesImage img;
  img.width = scene.image_width();
  img.height = scene.image_height();
  const std::size_t n = img.size();
  img.stokes.resize(n);
  img.object.assign(n, 0);
  img.valid.assign(n, 1);
  const std::array<double, 3> view{0.0, 0.0, 1.0};
  const double Eenv = planck_radiance(scene.environment_temperature, scene.wavelength);
  parallel_for(n, threads, [&](std::size_t k) {
    const int i = static_cast<int>(k % img.width), j = static_cast<int>(k / img.width);
    const auto g = pixel_geometry(scene, i, j);
    img.object[k] = g.object ? 1 : 0;
    img.valid[k] = g.valid ? 1 : 0;
    if (!g.object || !g.valid) {
      img.stokes[k] = {Eenv, 0.0, 0.0};
      return;
    }
    if (samples == 0) {
      img.stokes[k] = expected_pixel(g.normal, view, scene);
    } else {
      RngStream sub = rng.substream(k);
      img.stokes[k] = render_pixel(g.normal, view, scene, samples, sub);
    }
  });
  std::vector<double> s0(n);
  img.dolp_raw.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s0[k] = img.stokes[k].S0;
    img.dolp_raw[k] = img.stokes[k].dolp();
  }
  img.N = detail::min_max(s0, &img.N_constant);
  img.dolp = detail::min_max(img.dolp_raw, &img.dolp_constant);
  return img;
}

// ---------------------------------------------------------------------------
// Pinhole camera design.

struct PinholeDesign {
  double wavelength = 0.0, bandwidth = 0.0, focal = 0.0;
  double pinhole = 0.0;            // diameter d in use
  double optimal_pinhole = 0.0;    // sqrt(2 lambda f)
  double coherence_radius = 0.0;   // lambda f / d
  double max_window = 0.0;         // lambda^2/(c dlambda)
  std::optional<double> pixel_size, pixel_pitch, window;
  bool window_ok = true;           // tau <= max_window
  bool pixel_ok = true;            // b <= lambda f/d <= B
  bool pinhole_ok = true;          // d within 5% of sqrt(2 lambda f)

  [[nodiscard]] bool all_ok() const { return window_ok && pixel_ok && pinhole_ok; }
};

inline PinholeDesign pinhole_design(double lambda, double dlambda, double f, std::optional<double> d = std::nullopt,
                                    std::optional<double> b = std::nullopt, std::optional<double> B = std::nullopt,
                                    std::optional<double> tau = std::nullopt) {
  if (!(lambda > 0.0 && dlambda > 0.0 && f > 0.0)) throw DomainError("wavelength, bandwidth and focal distance must be > 0");
  constexpr double c = 299792458.0;
  PinholeDesign p;
  p.wavelength = lambda;
  p.bandwidth = dlambda;
  p.focal = f;
  p.optimal_pinhole = std::sqrt(2.0 * lambda * f);
  p.pinhole = d ? *d : p.optimal_pinhole;
  if (!(p.pinhole > 0.0)) throw DomainError("pinhole diameter must be > 0");
  p.coherence_radius = lambda * f / p.pinhole;
  p.max_window = lambda * lambda / (c * dlambda);
  p.pixel_size = b;
  p.pixel_pitch = B;
  p.window = tau;
  if (tau) p.window_ok = *tau <= p.max_window;
  if (b) p.pixel_ok = p.pixel_ok && *b <= p.coherence_radius;
  if (B) p.pixel_ok = p.pixel_ok && p.coherence_radius <= *B;
  p.pinhole_ok = std::abs(p.pinhole - p.optimal_pinhole) <= 0.05 * p.optimal_pinhole;
  return p;
}

// ---------------------------------------------------------------------------
// Camera pipeline.

enum class CameraMode { NonAdaptive, Adaptive, Exact };

inline CameraMode parse_camera_mode(std::string_view s) {
  if (s == "non-adaptive") return CameraMode::NonAdaptive;
  if (s == "adaptive") return CameraMode::Adaptive;
  if (s == "exact") return CameraMode::Exact;
  throw ConfigError("unknown camera mode '" + std::string(s) + "' (expected non-adaptive, adaptive or exact)");
}
inline std::string to_string(CameraMode m) {
  switch (m) {
    case CameraMode::NonAdaptive: return "non-adaptive";
    case CameraMode::Adaptive: return "adaptive";
    case CameraMode::Exact: return "exact";
  }
  return "?";
}

struct CameraConfig {
  CameraMode mode = CameraMode::Adaptive;
  AdaptiveConfig adaptive{};  // windows, iterations, pair rule and estimator
  unsigned threads = 1;

  /// Defaults for each mode: the non-adaptive camera keeps t = {1, 2} and inverts
  /// the pooled rates in closed form; the adaptive one re-chooses the pair.
  static CameraConfig defaults(CameraMode mode) {
    CameraConfig c;
    c.mode = mode;
    if (mode == CameraMode::NonAdaptive) {
      c.adaptive.pair_rule = PairRule::Fixed;
      c.adaptive.estimator = EstimatorMode::ClosedForm;
    } else {
      c.adaptive.pair_rule = PairRule::JointCrlb;
      c.adaptive.estimator = EstimatorMode::Likelihood;
    }
    return c;
  }
};

struct CameraResult {
  int width = 0, height = 0;
  std::vector<double> N_hat, gamma_hat;
  std::vector<double> N_true, gamma_true;
  std::vector<unsigned char> object;
  std::vector<std::array<int, 2>> final_pair;
  // per iteration k (0-based): map-wide DoLP error and windows spent so far
  std::vector<double> mae_object;      // mean |gamma_hat - gamma| over object pixels
  std::vector<double> mae_all;         // over every pixel
  std::vector<long long> windows_total;
  long long flagged_pixels = 0;

  [[nodiscard]] double final_mae() const { return mae_object.empty() ? 0.0 : mae_object.back(); }
};

/// Per pixel: DolpJointDist(N, gamma) from the normalized truth maps, then the
/// requested estimation mode. Pixels that stop early keep their last estimate
/// and window count in later iterations.
inline CameraResult camera_pipeline(const StokesImage& truth, const CameraConfig& cfg, const RngStream& rng) {
  cfg.adaptive.validate();
  CameraResult res;
  res.width = truth.width;
  res.height = truth.height;
  const std::size_t n = truth.size();
  res.N_true = truth.N;
  res.gamma_true = truth.dolp;
  res.object = truth.object;
  res.N_hat.assign(n, 0.0);
  res.gamma_hat.assign(n, 0.0);
  res.final_pair.assign(n, {1, 2});

  const int K = cfg.mode == CameraMode::Exact ? 1 : cfg.adaptive.max_iterations;
  std::vector<std::vector<double>> gamma_k(n, std::vector<double>(K, 0.0));
  std::vector<std::vector<long long>> windows_k(n, std::vector<long long>(K, 0));
  std::vector<unsigned char> flagged(n, 0);

  parallel_for(n, cfg.threads, [&](std::size_t k) {
    const double N = truth.N[k], g = truth.dolp[k];
    if (cfg.mode == CameraMode::Exact) {
      const auto q = forward_q12(N, g);
      if (q.q1 == 0.0) return;
      const auto inv = invert_q12(q.q1, std::min(q.q2, q.q1));
      res.N_hat[k] = inv.N;
      res.gamma_hat[k] = inv.gamma;
      gamma_k[k][0] = inv.gamma;
      flagged[k] = inv.flagged() ? 1 : 0;
      return;
    }
    const auto trace = adaptive_loop(DolpJointDist(N, g), cfg.adaptive, rng.substream(k));
    const auto& its = trace.iterations;
    for (int i = 0; i < K; ++i) {
      const auto& it = its[std::min<std::size_t>(i, its.size() - 1)];
      gamma_k[k][i] = it.second_hat;
      windows_k[k][i] = it.cumulative_windows;
    }
    res.N_hat[k] = its.back().N_hat;
    res.gamma_hat[k] = its.back().second_hat;
    res.final_pair[k] = its.back().pair;
    for (const auto& it : its)
      if (it.clamped || it.boundary) flagged[k] = 1;
  });

  std::size_t n_obj = 0;
  for (std::size_t k = 0; k < n; ++k) n_obj += truth.object[k] ? 1 : 0;
  for (int i = 0; i < K; ++i) {
    double e_obj = 0.0, e_all = 0.0;
    long long w = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = std::abs(gamma_k[k][i] - truth.dolp[k]);
      e_all += e;
      if (truth.object[k]) e_obj += e;
      w += windows_k[k][i];
    }
    res.mae_all.push_back(n ? e_all / n : 0.0);
    res.mae_object.push_back(n_obj ? e_obj / n_obj : 0.0);
    res.windows_total.push_back(w);
  }
  for (auto f : flagged) res.flagged_pixels += f;
  return res;
}

}  // namespace pdisc
