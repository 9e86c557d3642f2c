// pdisc: command-line front end to the photon_discerner library.
//
// Exit status: 0 success, 1 invalid input or configuration, 2 numerical
// failure (including failed reproduction checks), 64 usage error.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "photon_discerner/adaptive_estimation.hpp"
#include "photon_discerner/detector_models.hpp"
#include "photon_discerner/dolp_imaging.hpp"
#include "photon_discerner/fisher_info.hpp"
#include "photon_discerner/lidar.hpp"
#include "photon_discerner/nanowire.hpp"
#include "photon_discerner/photon_stats.hpp"
#include "reproduce.hpp"

using namespace pdisc;
using namespace pdisc::cli;

namespace {

constexpr int kExitUsage = 64;

struct Globals {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  unsigned threads = 0;
};

struct SourceOpts {
  std::string family = "thermal";
  double N = 1.0;
  double gamma = 0.5;
  double g = 0.5;
  int m = 1;

  [[nodiscard]] double second() const {
    if (family == "dolp") return gamma;
    if (family == "displaced") return g;
    return 0.0;
  }
  [[nodiscard]] PhotonDistribution make() const { return make_distribution(family, N, second(), m); }
};

void add_source(CLI::App* s, SourceOpts& o, const std::string& family = "thermal") {
  o.family = family;
  s->add_option("--family", o.family, "thermal, coherent, dolp, displaced or fock")
      ->check(CLI::IsMember({"thermal", "coherent", "dolp", "displaced", "fock"}));
  s->add_option("--N", o.N, "mean photon number");
  s->add_option("--gamma", o.gamma, "degree of linear polarization (dolp)");
  s->add_option("--g", o.g, "signal fraction (displaced)");
  s->add_option("--m", o.m, "photon number (fock)");
}

struct DetectorOpts {
  double efficiency = 1.0;
  double dark = 0.0;
  [[nodiscard]] DetectionModel model() const {
    DetectionModel m{efficiency, dark};
    m.validate();
    return m;
  }
};

void add_detector(CLI::App* s, DetectorOpts& o) {
  s->add_option("--efficiency", o.efficiency, "detection efficiency in (0, 1]");
  s->add_option("--dark", o.dark, "mean dark counts per window");
}

double parse_sharpness(const std::string& s) {
  if (s == "inf" || s == "ideal") return numeric::kInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("sharpness must be a number or 'inf', got '" + s + "'");
}

ThresholdResponse make_response(double t, double S) {
  if (std::isinf(S)) {
    if (t != std::floor(t)) throw ConfigError("an ideal threshold must be an integer");
    return ThresholdResponse::ideal(static_cast<int>(t));
  }
  return ThresholdResponse::flux(t, S);
}

NanowireParams load_params(Run& run, const std::string& path) {
  const auto text = io::read_file(path);
  run.input(path, text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  auto p = NanowireParams::from_json(j);
  p.validate();
  return p;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
  if (points < 2 || !(hi > lo)) throw ConfigError("grid needs >= 2 points and hi > lo");
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(lo + (hi - lo) * i / (points - 1));
  return out;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (points < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("log grid needs >= 2 points and 0 < lo < hi");
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  return out;
}

// Console output: ten significant digits; the CSV artifacts keep full precision.
std::string show(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------

int cmd_stats(Run& run, const Globals& g, const SourceOpts& src, std::optional<int> n_max, long long samples) {
  const auto d = src.make();
  const int n = n_max ? *n_max : tail_cutoff(d);
  if (n < 0) throw ConfigError("--n-max must be >= 0");
  io::CsvTable t({"n", "pmf", "cdf"});
  const auto p = d.pmf_table(n);
  for (int k = 0; k <= n; ++k) t.add(k, p[k], d.cdf(k));
  run.write("pmf.csv", t.str());
  const double q = mandel_q(d);
  std::cout << "family " << d.family() << ": mean = " << d.mean() << ", variance = " << d.variance()
            << ", Mandel Q = " << q << '\n';
  run.results()["mean"] = d.mean();
  run.results()["variance"] = d.variance();
  run.results()["mandel_q"] = q;
  run.results()["n_max"] = n;
  if (samples > 0) {
    RngStream rng(g.seed);
    numeric::CompensatedSum s1, s2;
    for (long long i = 0; i < samples; ++i) {
      const double x = d.sample(rng);
      s1.add(x);
      s2.add(x * x);
    }
    const double m = s1.value() / samples;
    const double v = samples > 1 ? (s2.value() - samples * m * m) / (samples - 1) : 0.0;
    std::cout << "sampled " << samples << ": mean = " << m << ", variance = " << v << '\n';
    run.results()["sample_mean"] = m;
    run.results()["sample_variance"] = v;
  }
  return run.finish();
}

int cmd_rates(Run& run, const Globals& g, const SourceOpts& src, const DetectorOpts& det, int t_max,
              const std::string& sharpness, long long windows) {
  if (t_max < 1) throw ConfigError("--t-max must be >= 1");
  const auto d = src.make();
  const auto model = det.model();
  const double S = parse_sharpness(sharpness);
  io::CsvTable t({"t", "q"});
  std::string clicks = ClickRecord::csv_header() + "\r\n";
  for (int k = 1; k <= t_max; ++k) {
    const auto r = make_response(k, S);
    const double q = counting_rate(d, r, model);
    t.add(k, q);
    std::cout << "q(" << k << ") = " << show(q) << '\n';
    if (windows > 0) {
      RngStream rng = RngStream(g.seed).substream(k);
      clicks += simulate_clicks(d, r, windows, rng, model).csv_row() + "\r\n";
    }
  }
  run.write("rates.csv", t.str());
  if (windows > 0) run.write("clicks.csv", clicks);
  return run.finish();
}

int cmd_fisher(Run& run, const SourceOpts& src, const DetectorOpts& det, const std::string& param,
               std::optional<int> t, std::optional<int> t_max, bool fd) {
  const auto d = src.make();
  const auto model = det.model();
  ParamSpec spec{parse_param(param), fd ? DerivativeMode::FiniteDifference : DerivativeMode::Analytic};
  const auto tab = fisher_tables(d, spec, model);
  const double J0 = shot_noise_fisher(tab);
  const int tm = t_max ? *t_max : std::max(tab.n_max(), t ? *t : 1);
  const auto J = pd_fisher_scan(tab, tm);
  io::CsvTable csv({"t", "J", "efficiency"});
  for (int k = 1; k <= tm; ++k) csv.add(k, J[k], J0 > 0.0 ? J[k] / J0 : 0.0);
  run.write("fisher.csv", csv.str());
  run.results()["J0"] = J0;
  if (t) {
    const double Jt = pd_fisher(d, *t, spec, model);
    std::cout << "J = " << show(Jt) << ", J0 = " << show(J0) << '\n';
    run.results()["J"] = Jt;
    run.results()["gamma_e"] = finite_or_null(Jt > 0.0 ? J0 / Jt - 1.0 : numeric::kInf);
  } else {
    std::cout << "J0 = " << show(J0) << " (per-threshold J in fisher.csv)\n";
  }
  return run.finish();
}

int cmd_optimal(Run& run, const Globals& g, const SourceOpts& src, const DetectorOpts& det, const std::string& param,
                std::optional<int> t_max, const std::vector<double>& N_grid) {
  const auto d = src.make();
  const auto model = det.model();
  const ParamSpec spec{parse_param(param)};
  const auto rep = fisher_report(d, spec, model, t_max);
  std::cout << "t_opt = " << rep.t_opt << '\n'
            << "J = " << show(rep.J) << ", J0 = " << show(rep.J0)
            << ", efficiency = " << show(rep.efficiency) << '\n';
  run.write("report.csv", FisherReport::csv_header() + "\r\n" + rep.csv_row() + "\r\n");
  run.results()["t_opt"] = rep.t_opt;
  run.results()["efficiency"] = rep.efficiency;
  if (!N_grid.empty()) write_curve(run, "curve.csv", efficiency_curve(src.family, spec, N_grid, src.second(), g.threads, model));
  return run.finish();
}

int cmd_tradespace(Run& run, const Globals& g, const SourceOpts& src, const DetectorOpts& det, const std::string& param,
                   std::vector<double> thresholds, double S_min, double S_max, int points) {
  const auto d = src.make();
  const auto model = det.model();
  const ParamSpec spec{parse_param(param)};
  if (thresholds.empty()) thresholds.push_back(src.N);
  auto S = log_grid(S_min, S_max, points);
  S.push_back(numeric::kInf);
  const double J0 = shot_noise_fisher(d, spec, model);
  std::vector<double> ge(thresholds.size() * S.size());
  parallel_for(ge.size(), g.threads, [&](std::size_t k) {
    ge[k] = threshold_equiv_noise(d, thresholds[k / S.size()], S[k % S.size()], spec, model);
  });
  io::CsvTable t({"family", "param", "N", "gamma_or_g", "t", "S", "J", "J0", "efficiency", "gamma_e"});
  for (std::size_t k = 0; k < ge.size(); ++k) {
    const double eff = std::isfinite(ge[k]) ? 1.0 / (1.0 + ge[k]) : 0.0;
    t.add(src.family, std::string(to_string(spec.param)), src.N, src.second(), thresholds[k / S.size()],
          S[k % S.size()], J0 * eff, J0, eff, ge[k]);
  }
  run.write("tradespace.csv", t.str());
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    std::cout << "t = " << thresholds[i] << ": gamma_e(S=" << S_min << ") = " << ge[i * S.size()]
              << ", gamma_e(S=inf) = " << ge[i * S.size() + S.size() - 1] << '\n';
  return run.finish();
}

struct SceneOpts {
  std::string geometry = "sphere";
  std::string normal_map;
  SceneSpec spec;
};

void add_scene(CLI::App* s, SceneOpts& o) {
  s->add_option("--geometry", o.geometry, "sphere, plane, cylinder or normal-map");
  s->add_option("--normal-map", o.normal_map, "normal-map file for --geometry normal-map");
  s->add_option("--width", o.spec.width, "image width in pixels");
  s->add_option("--height", o.spec.height, "image height in pixels");
  s->add_option("--radius", o.spec.radius, "object radius as a fraction of the half-size");
  s->add_option("--tilt", o.spec.tilt_deg, "plane tilt in degrees");
  s->add_option("--surface-temperature", o.spec.surface_temperature, "K");
  s->add_option("--environment-temperature", o.spec.environment_temperature, "K");
  s->add_option("--n-interior", o.spec.n_interior, "refractive index of the object");
  s->add_option("--n-exterior", o.spec.n_exterior, "refractive index of the medium");
  s->add_option("--wavelength", o.spec.wavelength, "m");
}

SceneSpec build_scene(Run& run, SceneOpts o) {
  o.spec.geometry = parse_geometry(o.geometry);
  if (o.spec.geometry == Geometry::NormalMapFile) {
    if (o.normal_map.empty()) throw ConfigError("--geometry normal-map needs --normal-map FILE");
    const auto text = io::read_file(o.normal_map);
    run.input(o.normal_map, text);
    o.spec.normal_map = io::parse_normal_map(text);
  }
  o.spec.validate();
  return o.spec;
}

void write_maps(Run& run, const StokesImage& img) {
  for (int bits : {8, 16}) {
    const std::string suffix = bits == 8 ? "" : "_16";
    run.write("N" + suffix + ".pgm", io::pgm_bytes(img.width, img.height, img.N, bits));
    run.write("dolp" + suffix + ".pgm", io::pgm_bytes(img.width, img.height, img.dolp, bits));
  }
  io::CsvTable t({"x", "y", "object", "valid", "S0", "S1", "S2", "N", "dolp_raw", "dolp"});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * img.width + x;
      const auto& s = img.stokes[k];
      t.add(x, y, img.object[k] != 0, img.valid[k] != 0, s.S0, s.S1, s.S2, img.N[k], img.dolp_raw[k], img.dolp[k]);
    }
  run.write("maps.csv", t.str());
}

int cmd_render(Run& run, const Globals& g, const SceneOpts& so, int samples) {
  const auto scene = build_scene(run, so);
  const auto img = render_scene(scene, samples, RngStream(g.seed), g.threads);
  write_maps(run, img);
  std::size_t object = 0, invalid = 0;
  double dolp_max = 0.0;
  for (std::size_t k = 0; k < img.size(); ++k) {
    object += img.object[k];
    invalid += img.valid[k] ? 0 : 1;
    if (img.object[k]) dolp_max = std::max(dolp_max, img.dolp_raw[k]);
  }
  if (img.N_constant) run.note("S0 is constant over the image; the N map is all zeros");
  if (img.dolp_constant) run.note("DoLP is constant over the image; the DoLP map is all zeros");
  if (invalid > 0) run.note(std::to_string(invalid) + " pixels have an invalid normal");
  json report = {{"scene", scene.to_json()},
                 {"samples", samples},
                 {"object_pixels", object},
                 {"invalid_pixels", invalid},
                 {"max_object_dolp", dolp_max}};
  run.write("report.json", report.dump(2) + "\n");
  run.results() = report;
  std::cout << img.width << "x" << img.height << " image, " << object << " object pixels, max DoLP "
            << show(dolp_max) << '\n';
  return run.finish();
}

int cmd_camera(Run& run, const Globals& g, const SceneOpts& so, int samples, const std::string& mode,
               std::optional<long long> windows, std::optional<int> iterations, const std::string& pair_rule,
               const std::string& estimator, std::optional<double> target_se) {
  const auto scene = build_scene(run, so);
  const auto truth = render_scene(scene, samples, RngStream(g.seed), g.threads);
  auto cfg = CameraConfig::defaults(parse_camera_mode(mode));
  if (windows) cfg.adaptive.windows = *windows;
  if (iterations) cfg.adaptive.max_iterations = *iterations;
  if (!pair_rule.empty()) cfg.adaptive.pair_rule = parse_pair_rule(pair_rule);
  if (!estimator.empty()) cfg.adaptive.estimator = parse_estimator_mode(estimator);
  cfg.adaptive.target_se = target_se;
  cfg.threads = g.threads;
  const auto res = camera_pipeline(truth, cfg, RngStream(g.seed).substream(1));

  for (int bits : {8, 16}) {
    const std::string suffix = bits == 8 ? "" : "_16";
    run.write("N_hat" + suffix + ".pgm", io::pgm_bytes(res.width, res.height, res.N_hat, bits));
    run.write("dolp_hat" + suffix + ".pgm", io::pgm_bytes(res.width, res.height, res.gamma_hat, bits));
  }
  io::CsvTable maps({"x", "y", "object", "N_true", "N_hat", "dolp_true", "dolp_hat", "t_a", "t_b"});
  for (int y = 0; y < res.height; ++y)
    for (int x = 0; x < res.width; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * res.width + x;
      maps.add(x, y, res.object[k] != 0, res.N_true[k], res.N_hat[k], res.gamma_true[k], res.gamma_hat[k],
               res.final_pair[k][0], res.final_pair[k][1]);
    }
  run.write("maps.csv", maps.str());
  io::CsvTable err({"iteration", "windows_total", "mae_object", "mae_all"});
  for (std::size_t i = 0; i < res.mae_object.size(); ++i) {
    err.add(static_cast<int>(i + 1), res.windows_total[i], res.mae_object[i], res.mae_all[i]);
    std::cout << "iteration " << i + 1 << ": windows " << res.windows_total[i] << ", DoLP MAE "
              << show(res.mae_object[i]) << '\n';
  }
  run.write("errors.csv", err.str());
  if (res.flagged_pixels > 0)
    run.note(std::to_string(res.flagged_pixels) + " pixels hit an estimator boundary or clamp");
  run.results()["mode"] = to_string(cfg.mode);
  run.results()["pair_rule"] = to_string(cfg.adaptive.pair_rule);
  run.results()["estimator"] = to_string(cfg.adaptive.estimator);
  run.results()["final_mae"] = res.final_mae();
  run.results()["flagged_pixels"] = res.flagged_pixels;
  return run.finish();
}

int cmd_adaptive(Run& run, const Globals& g, const SourceOpts& src, long long windows, int iterations,
                 const std::string& pair_rule, const std::string& estimator, std::optional<double> target_se,
                 std::vector<int> initial) {
  if (src.family != "dolp" && src.family != "displaced")
    throw ConfigError("adaptive estimation needs a two-parameter family (dolp or displaced)");
  AdaptiveConfig cfg;
  cfg.windows = windows;
  cfg.max_iterations = iterations;
  cfg.pair_rule = parse_pair_rule(pair_rule);
  cfg.estimator = parse_estimator_mode(estimator);
  cfg.target_se = target_se;
  if (!initial.empty()) {
    if (initial.size() != 2) throw ConfigError("--initial takes exactly two thresholds");
    cfg.initial_pair = {initial[0], initial[1]};
  }
  const auto trace = adaptive_loop(src.make(), cfg, RngStream(g.seed));
  run.write("trace.csv", trace.csv());
  run.write("trace.json", trace.to_json().dump(2) + "\n");
  for (const auto& it : trace.iterations) {
    std::cout << "iteration " << it.iteration << ": t = {" << it.pair[0] << ", " << it.pair[1]
              << "}, N_hat = " << show(it.N_hat) << ", second_hat = " << show(it.second_hat)
              << ", se = " << show(it.se_second) << '\n';
    if (it.clamped || it.boundary) run.note("iteration " + std::to_string(it.iteration) + " estimate hit a boundary");
  }
  if (target_se && !trace.target_met) run.note("target standard error not reached within the iteration limit");
  run.results()["total_windows"] = trace.total_windows();
  run.results()["target_met"] = trace.target_met;
  return run.finish();
}

int cmd_lidar_classify(Run& run, const Globals& g, double N, int trials, int threshold, int baseline,
                       const std::vector<long long>& windows) {
  ClassificationConfig cfg;
  cfg.N = N;
  cfg.trials = trials;
  cfg.threshold = threshold;
  cfg.baseline = baseline;
  if (!windows.empty()) cfg.windows = windows;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  const auto table = run_classification(cfg);
  run.write("accuracy.csv", table.csv());
  for (const auto& r : table.rows)
    std::cout << "windows " << r.windows << ": accuracy(t=" << threshold << ") = " << r.accuracy << ", accuracy(t="
              << baseline << ") = " << r.baseline_accuracy << ", z = " << r.z << '\n';
  return run.finish();
}

int cmd_lidar_thresholds(Run& run, double N, double gsig, std::optional<int> t_max) {
  const auto t = lidar_optimal_thresholds(N, gsig, t_max);
  std::cout << "(t_N, t_g) = (" << t.t_N << ", " << t.t_g << ")\n";
  run.results()["t_N"] = t.t_N;
  run.results()["t_g"] = t.t_g;
  return run.finish();
}

int cmd_pnrd(Run& run, double N, double gsig, int M_lo, int M_hi) {
  const auto c = pnrd_vs_pd(N, gsig, M_lo, M_hi);
  run.write("pnrd.csv", c.csv());
  auto cross = [](const std::optional<int>& m) { return m ? std::to_string(*m) : std::string("none"); };
  std::cout << "first M with PNRD >= best threshold detector: N -> " << cross(c.crossover_N) << ", g -> "
            << cross(c.crossover_g) << '\n';
  run.results()["crossover_N"] = c.crossover_N ? json(*c.crossover_N) : json(nullptr);
  run.results()["crossover_g"] = c.crossover_g ? json(*c.crossover_g) : json(nullptr);
  run.results()["crossings_N"] = c.crossings_N;
  run.results()["crossings_g"] = c.crossings_g;
  if (c.crossings_N > 1 || c.crossings_g > 1) run.note("ratio crosses 1 more than once");
  return run.finish();
}

int cmd_nanowire_sweep(Run& run, const Globals& g, const std::string& params, int n_max, int t_max, double f_lo,
                       double f_hi, int points) {
  const auto p = load_params(run, params);
  const auto fractions = linear_grid(f_lo, f_hi, points);
  const auto rows = click_sweep(p, n_max, fractions, g.threads);
  io::CsvTable sweep({"n", "bias_fraction", "P"});
  for (const auto& r : rows) sweep.add(r.photons, r.bias_fraction, r.P);
  run.write("sweep.csv", sweep.str());
  const auto sched = bias_schedule(p, t_max, g.threads);
  run.write("staircase.csv", sched.csv());
  io::CsvTable sw({"n", "I_sw", "bias_fraction", "P_at_I_sw", "reachable"});
  for (const auto& s : sched.switching) {
    sw.add(s.photons, s.I_sw, s.I_sw / sched.I_sw0, s.probability, s.reachable);
    std::cout << "I_SW," << s.photons << " = " << show(s.I_sw) << " A ("
              << show(s.I_sw / sched.I_sw0) << " of I_SW,0)" << (s.reachable ? "" : " unreachable")
              << '\n';
    if (!s.reachable) run.fail("P = 0.999 not reached below bias_ceiling for n = " + std::to_string(s.photons));
  }
  run.write("switching.csv", sw.str());
  if (!sched.strictly_decreasing()) run.fail("switching currents are not strictly decreasing in photon number");
  run.set_config(p.to_json());
  return run.finish();
}

int cmd_nanowire_bias(Run& run, const Globals& g, const std::string& params, int t, const SourceOpts& src,
                      const std::string& param) {
  const auto p = load_params(run, params);
  const auto b = bias_for_threshold(p, t, g.threads);
  io::CsvTable resp({"n", "P"});
  for (std::size_t n = 0; n < b.P.size(); ++n) resp.add(static_cast<int>(n), b.P[n]);
  run.write("response.csv", resp.str());
  std::cout << "t = " << t << ": I_b = " << show(b.I_b) << " A (" << show(b.normalized)
            << " of I_SW,0), contrast P_t - P_(t-1) = " << show(b.contrast) << '\n';
  run.results()["I_b"] = b.I_b;
  run.results()["bias_fraction"] = b.normalized;
  run.results()["P"] = b.P;
  run.results()["contrast"] = b.contrast;
  if (b.interval_empty) {
    run.fail("no bias interval separates " + std::to_string(t - 1) + " from " + std::to_string(t) + " photons");
  } else {
    const double ge = response_equiv_noise(src.make(), b.response(), ParamSpec{parse_param(param)});
    std::cout << "gamma_e = " << show(ge) << " for a " << src.family << " source, N = " << src.N << '\n';
    run.results()["gamma_e"] = finite_or_null(ge);
  }
  run.set_config(p.to_json());
  return run.finish();
}

int cmd_reproduce(Run& run, const Globals& g, const std::string& fig, const std::string& params) {
  if (fig == "fig3") reproduce_fig3(run, g.threads);
  else if (fig == "fig4") reproduce_fig4(run, g.seed, g.threads);
  else if (fig == "fig5") reproduce_fig5(run, g.threads);
  else if (fig == "fig6") reproduce_fig6(run, g.seed, g.threads);
  else if (fig == "fig7") reproduce_fig7(run, load_params(run, params), g.threads);
  else if (fig == "fig8") reproduce_fig8(run);
  else if (fig == "fig9") reproduce_fig9(run, g.threads);
  return run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-number discerner toolkit", "pdisc"};
  app.set_version_flag("--version", std::string(PHOTON_DISCERNER_VERSION));
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values");
  app.allow_config_extras(false);
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "root random seed");
  app.add_option("--out-dir", g.out_dir, "directory for artifacts (one subdirectory per command)");
  app.add_option("--threads", g.threads, "worker threads, 0 = all cores");

  // stats
  SourceOpts st_src;
  std::optional<int> st_nmax;
  long long st_samples = 0;
  auto* stats = app.add_subcommand("stats", "photon-number pmf, moments and Mandel Q");
  add_source(stats, st_src);
  stats->add_option("--n-max", st_nmax, "largest n to tabulate (default: tail cutoff)");
  stats->add_option("--samples", st_samples, "also draw this many samples");

  // rates
  SourceOpts ra_src;
  DetectorOpts ra_det;
  int ra_tmax = 5;
  std::string ra_S = "inf";
  long long ra_windows = 0;
  auto* rates = app.add_subcommand("rates", "counting rates q(t) of a threshold detector");
  add_source(rates, ra_src);
  add_detector(rates, ra_det);
  rates->add_option("--t-max", ra_tmax, "largest threshold");
  rates->add_option("--sharpness", ra_S, "flux-detector sharpness S, or inf for an ideal threshold");
  rates->add_option("--windows", ra_windows, "simulate this many windows per threshold");

  // fisher
  SourceOpts fi_src;
  DetectorOpts fi_det;
  std::string fi_param = "N";
  std::optional<int> fi_t, fi_tmax;
  bool fi_fd = false;
  auto* fisher = app.add_subcommand("fisher", "Fisher information of threshold and photon-counting detectors");
  add_source(fisher, fi_src);
  add_detector(fisher, fi_det);
  fisher->add_option("--param", fi_param, "N, gamma or g");
  fisher->add_option("--t", fi_t, "threshold to report");
  fisher->add_option("--t-max", fi_tmax, "largest threshold in fisher.csv");
  fisher->add_flag("--fd", fi_fd, "finite-difference derivatives");

  // optimal-threshold
  SourceOpts op_src;
  DetectorOpts op_det;
  std::string op_param = "N";
  std::optional<int> op_tmax;
  std::vector<double> op_grid;
  auto* optimal = app.add_subcommand("optimal-threshold", "threshold maximizing the Fisher information");
  add_source(optimal, op_src);
  add_detector(optimal, op_det);
  optimal->add_option("--param", op_param, "N, gamma or g");
  optimal->add_option("--t-max", op_tmax, "largest threshold scanned");
  optimal->add_option("--N-grid", op_grid, "also tabulate the efficiency over these mean photon numbers");

  // tradespace
  SourceOpts tr_src;
  DetectorOpts tr_det;
  std::string tr_param = "N";
  std::vector<double> tr_t;
  double tr_smin = 1.0, tr_smax = 100.0;
  int tr_points = 41;
  auto* trade = app.add_subcommand("tradespace", "equivalent noise of flux detectors over sharpness");
  add_source(trade, tr_src, "coherent");
  tr_src.N = 1000.0;
  add_detector(trade, tr_det);
  trade->add_option("--param", tr_param, "N, gamma or g");
  trade->add_option("--t", tr_t, "flux thresholds (default: N)");
  trade->add_option("--S-min", tr_smin, "smallest sharpness");
  trade->add_option("--S-max", tr_smax, "largest finite sharpness");
  trade->add_option("--points", tr_points, "log-spaced sharpness values (S = inf is added)");

  // dolp-render
  SceneOpts re_scene;
  int re_samples = 0;
  auto* render = app.add_subcommand("dolp-render", "render S0 and DoLP maps of a thermal scene");
  add_scene(render, re_scene);
  render->add_option("--samples", re_samples, "Monte Carlo environment samples per pixel (0 = exact)");

  // dolp-camera
  SceneOpts ca_scene;
  int ca_samples = 0;
  std::string ca_mode = "adaptive", ca_rule, ca_est;
  std::optional<long long> ca_windows;
  std::optional<int> ca_iter;
  std::optional<double> ca_target;
  auto* camera = app.add_subcommand("dolp-camera", "estimate N and DoLP maps with a discerner camera");
  add_scene(camera, ca_scene);
  camera->add_option("--samples", ca_samples, "Monte Carlo samples for the truth maps (0 = exact)");
  camera->add_option("--mode", ca_mode, "non-adaptive, adaptive or exact")
      ->check(CLI::IsMember({"non-adaptive", "adaptive", "exact"}));
  camera->add_option("--windows", ca_windows, "windows per threshold per iteration");
  camera->add_option("--iterations", ca_iter, "iterations");
  camera->add_option("--pair-rule", ca_rule, "fixed, per-parameter or joint-crlb (default depends on mode)");
  camera->add_option("--estimator", ca_est, "closed-form or likelihood (default depends on mode)");
  camera->add_option("--target-se", ca_target, "stop a pixel once its DoLP standard error is below this");

  // adaptive
  SourceOpts ad_src;
  long long ad_windows = 1000;
  int ad_iter = 5;
  std::string ad_rule = "joint-crlb", ad_est = "likelihood";
  std::optional<double> ad_target;
  std::vector<int> ad_init;
  auto* adaptive = app.add_subcommand("adaptive", "adaptive two-threshold estimation of one source");
  add_source(adaptive, ad_src, "dolp");
  adaptive->add_option("--windows", ad_windows, "windows per threshold per iteration");
  adaptive->add_option("--iterations", ad_iter, "maximum iterations");
  adaptive->add_option("--pair-rule", ad_rule, "fixed, per-parameter or joint-crlb");
  adaptive->add_option("--estimator", ad_est, "closed-form or likelihood");
  adaptive->add_option("--target-se", ad_target, "stop once the second parameter's standard error is below this");
  adaptive->add_option("--initial", ad_init, "initial threshold pair")->expected(2);

  // lidar-classify
  double lc_N = 0.1;
  int lc_trials = 1000, lc_t = 2, lc_base = 1;
  std::vector<long long> lc_windows;
  auto* classify = app.add_subcommand("lidar-classify", "coherent-vs-thermal classification accuracy");
  classify->add_option("--N", lc_N, "mean photon number of both sources");
  classify->add_option("--trials", lc_trials, "trials per budget");
  classify->add_option("--t", lc_t, "discerner threshold");
  classify->add_option("--baseline", lc_base, "baseline threshold");
  classify->add_option("--windows", lc_windows, "window budgets per source (strictly increasing)");

  // lidar-thresholds
  double lt_N = 3.0, lt_g = 0.01;
  std::optional<int> lt_tmax;
  auto* lthr = app.add_subcommand("lidar-thresholds", "optimal thresholds for a displaced-thermal return");
  lthr->add_option("--N", lt_N, "mean photon number");
  lthr->add_option("--g", lt_g, "signal fraction");
  lthr->add_option("--t-max", lt_tmax, "largest threshold scanned");

  // pnrd-compare
  double pc_N = 3.0, pc_g = 0.01;
  int pc_lo = 1, pc_hi = 64;
  auto* pnrd = app.add_subcommand("pnrd-compare", "number-resolving detectors against the best threshold detector");
  pnrd->add_option("--N", pc_N, "mean photon number");
  pnrd->add_option("--g", pc_g, "signal fraction");
  pnrd->add_option("--M-min", pc_lo, "smallest resolving depth");
  pnrd->add_option("--M-max", pc_hi, "largest resolving depth (<= 64)");

  // nanowire-sweep
  std::string nw_params;
  int nw_nmax = 5, nw_tmax = 5, nw_points = 61;
  double nw_lo = 0.7, nw_hi = 1.0;
  auto* nsweep = app.add_subcommand("nanowire-sweep", "click probability of a nanowire over bias and photon number");
  nsweep->add_option("--params", nw_params, "nanowire parameter file (JSON)")->required();
  nsweep->add_option("--n-max", nw_nmax, "largest photon number");
  nsweep->add_option("--t-max", nw_tmax, "largest threshold in the bias staircase");
  nsweep->add_option("--bias-min", nw_lo, "smallest bias as a fraction of I_SW,0");
  nsweep->add_option("--bias-max", nw_hi, "largest bias as a fraction of I_SW,0");
  nsweep->add_option("--points", nw_points, "bias grid points");

  // nanowire-bias
  std::string nb_params, nb_param = "N";
  int nb_t = 1;
  SourceOpts nb_src;
  auto* nbias = app.add_subcommand("nanowire-bias", "bias current that makes a nanowire a threshold-t detector");
  nbias->add_option("--params", nb_params, "nanowire parameter file (JSON)")->required();
  nbias->add_option("--t", nb_t, "photon threshold");
  add_source(nbias, nb_src);
  nbias->add_option("--param", nb_param, "parameter for the equivalent noise");

  // reproduce
  std::string rp_fig;
  std::string rp_params = PDISC_SOURCE_DIR "/configs/nanowire_example.json";
  auto* repro = app.add_subcommand("reproduce", "regenerate one figure's data with its checks");
  repro->add_option("figure", rp_fig, "fig3 .. fig9")
      ->required()
      ->check(CLI::IsMember({"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"}));
  repro->add_option("--params", rp_params, "nanowire parameter file for fig7");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const bool no_command = app.get_subcommands().empty();
    if (no_command && (dynamic_cast<const CLI::ExtrasError*>(&e) || dynamic_cast<const CLI::RequiredError*>(&e))) {
      std::cerr << e.what() << "\n\n" << app.help();
      return kExitUsage;
    }
    app.exit(e);
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    Run run(sub->get_name(), g.out_dir, g.seed, resolve_threads(g.threads));
    json config = resolved_options(app);
    config[sub->get_name()] = resolved_options(*sub);
    run.set_config(config);
    const std::string name = sub->get_name();
    if (name == "stats") return cmd_stats(run, g, st_src, st_nmax, st_samples);
    if (name == "rates") return cmd_rates(run, g, ra_src, ra_det, ra_tmax, ra_S, ra_windows);
    if (name == "fisher") return cmd_fisher(run, fi_src, fi_det, fi_param, fi_t, fi_tmax, fi_fd);
    if (name == "optimal-threshold") return cmd_optimal(run, g, op_src, op_det, op_param, op_tmax, op_grid);
    if (name == "tradespace")
      return cmd_tradespace(run, g, tr_src, tr_det, tr_param, tr_t, tr_smin, tr_smax, tr_points);
    if (name == "dolp-render") return cmd_render(run, g, re_scene, re_samples);
    if (name == "dolp-camera")
      return cmd_camera(run, g, ca_scene, ca_samples, ca_mode, ca_windows, ca_iter, ca_rule, ca_est, ca_target);
    if (name == "adaptive") return cmd_adaptive(run, g, ad_src, ad_windows, ad_iter, ad_rule, ad_est, ad_target, ad_init);
    if (name == "lidar-classify") return cmd_lidar_classify(run, g, lc_N, lc_trials, lc_t, lc_base, lc_windows);
    if (name == "lidar-thresholds") return cmd_lidar_thresholds(run, lt_N, lt_g, lt_tmax);
    if (name == "pnrd-compare") return cmd_pnrd(run, pc_N, pc_g, pc_lo, pc_hi);
    if (name == "nanowire-sweep")
      return cmd_nanowire_sweep(run, g, nw_params, nw_nmax, nw_tmax, nw_lo, nw_hi, nw_points);
    if (name == "nanowire-bias") return cmd_nanowire_bias(run, g, nb_params, nb_t, nb_src, nb_param);
    if (name == "reproduce") return cmd_reproduce(run, g, rp_fig, rp_params);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "invalid JSON: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
