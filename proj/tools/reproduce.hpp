#pragma once

// `pdisc reproduce figN`: the pipeline behind one figure at desk scale, with
// pinned seeds. Writes plain CSV for external plotting and one check per
// acceptance threshold; any failed check makes the command exit with 2.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "photon_discerner/adaptive_estimation.hpp"
#include "photon_discerner/dolp_imaging.hpp"
#include "photon_discerner/fisher_info.hpp"
#include "photon_discerner/lidar.hpp"
#include "photon_discerner/nanowire.hpp"

namespace pdisc::cli {

inline std::string num(double v) { return io::format_double(v); }

inline void write_curve(Run& run, const std::string& name, const std::vector<FisherReport>& rows) {
  std::string text = FisherReport::csv_header() + "\r\n";
  for (const auto& r : rows) text += r.csv_row() + "\r\n";
  run.write(name, text);
}

inline void reproduce_fig3(Run& run, unsigned threads) {
  const ParamSpec sN{Param::N}, sG{Param::Gamma};
  const auto thermal = efficiency_curve("thermal", sN, {50.0, 100.0, 200.0}, 0.0, threads);
  write_curve(run, "thermal_large_N.csv", thermal);
  bool L = true;
  std::string dl;
  for (const auto& r : thermal) {
    const double x = r.t_opt / r.N;
    L = L && x >= 1.55 && x <= 1.63 && r.efficiency >= 0.64 && r.efficiency <= 0.66;
    dl += "N=" + num(r.N) + " t/N=" + num(x) + " eff=" + num(r.efficiency) + "; ";
  }
  run.check("fixed_point_L", L, dl);

  const auto unpol = efficiency_curve("dolp", sN, {25.0, 50.0, 100.0}, 0.0, threads);
  write_curve(run, "unpolarized_large_N.csv", unpol);
  const auto& u = unpol.back();
  const double xu = u.t_opt / u.N;
  run.check("fixed_point_U", xu >= 1.25 && xu <= 1.33 && u.efficiency >= 0.63 && u.efficiency <= 0.66,
            "N=100 t/N=" + num(xu) + " eff=" + num(u.efficiency));

  io::CsvTable asym({"x", "thermal", "unpolarized"});
  for (int i = 1; i <= 80; ++i) {
    const double x = 0.05 * i;
    asym.add(x, thermal_asymptotic_efficiency(x), unpolarized_asymptotic_efficiency(x));
  }
  run.write("asymptotic_curves.csv", asym.str());

  std::vector<double> lowN;
  for (int i = 0; i <= 30; ++i) lowN.push_back(0.01 * std::pow(1000.0, i / 30.0));
  const auto low = efficiency_curve("thermal", sN, lowN, 0.0, threads);
  write_curve(run, "thermal_efficiency.csv", low);
  run.check("spd_near_shot_noise_at_low_N", low.front().spd_efficiency > 0.99,
            "N=0.01 single-photon efficiency " + num(low.front().spd_efficiency));

  io::CsvTable weak({"N", "gamma", "t_opt", "J_t1", "J_t2", "J0"});
  bool all_two = true;
  for (double N : {0.01, 0.05, 0.1})
    for (int k = 1; k <= 9; ++k) {
      const DolpJointDist d(N, 0.1 * k);
      const auto s = optimal_threshold(d, sG);
      all_two = all_two && s.t_opt == 2;
      weak.add(N, 0.1 * k, s.t_opt, s.J[1], s.J[2], shot_noise_fisher(d, sG));
    }
  run.write("weak_dolp_thresholds.csv", weak.str());
  run.check("weak_dolp_t2", all_two, "N in {0.01,0.05,0.1}, gamma in {0.1..0.9}");
}

inline void reproduce_fig4(Run& run, std::uint64_t seed, unsigned threads) {
  SceneSpec scene;
  const auto truth = render_scene(scene, 0, RngStream(seed), threads);
  auto fixed_cfg = CameraConfig::defaults(CameraMode::NonAdaptive);
  auto adapt_cfg = CameraConfig::defaults(CameraMode::Adaptive);
  fixed_cfg.threads = adapt_cfg.threads = threads;
  const auto fixed = camera_pipeline(truth, fixed_cfg, RngStream(seed + 6));
  const auto adapt = camera_pipeline(truth, adapt_cfg, RngStream(seed + 6));

  io::CsvTable errors({"iteration", "windows_total", "mae_non_adaptive", "mae_adaptive"});
  for (std::size_t i = 0; i < fixed.mae_object.size(); ++i)
    errors.add(static_cast<int>(i + 1), fixed.windows_total[i], fixed.mae_object[i],
               i < adapt.mae_object.size() ? adapt.mae_object[i] : adapt.final_mae());
  run.write("dolp_error.csv", errors.str());
  run.write("dolp_truth.pgm", io::pgm_bytes(truth.width, truth.height, truth.dolp_raw));
  run.write("dolp_non_adaptive.pgm", io::pgm_bytes(fixed.width, fixed.height, fixed.gamma_hat));
  run.write("dolp_adaptive.pgm", io::pgm_bytes(adapt.width, adapt.height, adapt.gamma_hat));

  const double target = fixed.final_mae();
  std::optional<long long> reached;
  for (std::size_t i = 0; i < adapt.mae_object.size() && !reached; ++i)
    if (adapt.mae_object[i] <= target) reached = adapt.windows_total[i];
  const double ratio = reached ? static_cast<double>(*reached) / fixed.windows_total.back() : numeric::kInf;
  run.check("adaptive_window_ratio_le_0.6", ratio <= 0.6,
            "non-adaptive MAE " + num(target) + ", adaptive reaches it at " + num(ratio) + "x the windows");
  run.results()["adaptive_final_mae"] = adapt.final_mae();
  run.results()["non_adaptive_final_mae"] = target;
  if (std::abs(adapt.final_mae() - 0.11) > 0.04)
    run.note("adaptive final MAE " + num(adapt.final_mae()) + " is outside 0.11 +/- 0.04 (informative only)");
}

inline void reproduce_fig5(Run& run, unsigned threads) {
  const ParamSpec sN{Param::N}, sG{Param::G};
  const auto coh = efficiency_curve("coherent", sN, {25.0, 50.0, 100.0, 200.0}, 0.0, threads);
  write_curve(run, "coherent_large_N.csv", coh);
  const auto& c = coh[2];
  run.check("fixed_point_C", std::abs(c.t_opt / c.N - 1.0) <= 0.02 && std::abs(c.efficiency - 2 / numeric::kPi) <= 0.01,
            "N=100 t/N=" + num(c.t_opt / c.N) + " eff=" + num(c.efficiency));

  const auto thermal = efficiency_curve("displaced", sN, {50.0, 100.0, 200.0}, 0.0, threads);
  write_curve(run, "displaced_g0_large_N.csv", thermal);
  bool T = true;
  for (const auto& r : thermal) {
    const double x = r.t_opt / r.N;
    T = T && x >= 1.55 && x <= 1.63 && r.efficiency >= 0.64 && r.efficiency <= 0.66;
  }
  run.check("fixed_point_T", T, "displaced thermal at g=0, N in {50,100,200}");

  io::CsvTable weak({"N", "g", "t_opt_g"});
  bool two = true;
  for (double N : {0.01, 0.05, 0.1})
    for (int k = 1; k <= 9; ++k) {
      const auto t = optimal_threshold(DisplacedThermalDist(N, 0.1 * k), sG).t_opt;
      two = two && t == 2;
      weak.add(N, 0.1 * k, t);
    }
  run.write("weak_g_thresholds.csv", weak.str());
  run.check("weak_signal_t2", two, "estimating g with N <= 0.1");
}

inline void reproduce_fig6(Run& run, std::uint64_t seed, unsigned threads) {
  const double N = 0.1;
  const double c1 = counting_rate(CoherentDist(N), ThresholdResponse::ideal(1));
  const double h1 = counting_rate(ThermalDist(N), ThresholdResponse::ideal(1));
  const double c2 = counting_rate(CoherentDist(N), ThresholdResponse::ideal(2));
  const double h2 = counting_rate(ThermalDist(N), ThresholdResponse::ideal(2));
  io::CsvTable rates({"source", "q1", "q2"});
  rates.add("coherent", c1, c2);
  rates.add("thermal", h1, h2);
  run.write("counting_rates.csv", rates.str());
  run.check("counting_rate_inequality", c1 > h1 && c2 < h2,
            "q_coh(1)=" + num(c1) + " q_th(1)=" + num(h1) + " q_coh(2)=" + num(c2) + " q_th(2)=" + num(h2));

  ClassificationConfig cfg;
  cfg.seed = seed;
  cfg.threads = threads;
  const auto table = run_classification(cfg);
  run.write("accuracy.csv", table.csv());
  bool never_worse = true, clearly_better = false, all_z = true;
  for (const auto& r : table.rows) {
    never_worse = never_worse && r.accuracy >= r.baseline_accuracy;
    clearly_better = clearly_better || r.z > 3.0;
    if (r.windows >= 10000) all_z = all_z && r.z > 3.0;
  }
  run.check("t2_beats_t1", never_worse && clearly_better,
            "accuracy(t=2) >= accuracy(t=1) at every budget and z > 3 somewhere");
  run.check("z_gt_3_at_every_budget_ge_1e4", all_z, "both rules saturate at accuracy 1 for large budgets");
}

inline void reproduce_fig7(Run& run, const NanowireParams& p, unsigned threads) {
  const int n_max = 5;
  std::vector<ProfileHistory> h(n_max + 1);
  parallel_for(h.size(), threads, [&](std::size_t n) { h[n] = hotspot_history(p, static_cast<int>(n)); });
  std::vector<SwitchingCurrent> sw(n_max + 1);
  parallel_for(sw.size(), threads, [&](std::size_t n) { sw[n] = switching_current(h[n], p); });
  const double I0 = sw[0].I_sw;

  std::vector<double> fractions;
  for (int i = 0; i <= 70; ++i) fractions.push_back(0.7 + 0.005 * i);
  std::vector<double> P(h.size() * fractions.size());
  parallel_for(P.size(), threads, [&](std::size_t k) {
    P[k] = click_probability(h[k / fractions.size()], p, fractions[k % fractions.size()] * I0);
  });
  io::CsvTable sweep({"n", "bias_fraction", "P"});
  bool bounds = true, mono_n = true, mono_b = true;
  for (std::size_t n = 0; n < h.size(); ++n)
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      const double v = P[n * fractions.size() + i];
      sweep.add(static_cast<int>(n), fractions[i], v);
      bounds = bounds && v >= 0.0 && v <= 1.0;
      if (i > 0) mono_b = mono_b && v >= P[n * fractions.size() + i - 1];
      if (n > 0) mono_n = mono_n && v >= P[(n - 1) * fractions.size() + i];
    }
  run.write("click_probability.csv", sweep.str());

  io::CsvTable stairs({"t", "bias_fraction"});
  bool strict = true;
  for (int t = 1; t <= n_max; ++t) {
    stairs.add(t, sw[t].I_sw / I0);
    strict = strict && sw[t].reachable && sw[t].I_sw < sw[t - 1].I_sw;
  }
  run.write("bias_staircase.csv", stairs.str());

  bool plateau = false;
  for (double f : fractions) {
    bool ok = click_probability(h[0], p, f * I0) <= 1e-3;
    for (int n = 1; n <= n_max && ok; ++n) ok = click_probability(h[n], p, f * I0) >= 0.999;
    plateau = plateau || ok;
  }

  const double W = p.width;
  std::vector<double> x{-W / 2};
  for (int i = 0; i < 510; ++i) x.push_back(-W / 2 + (i + 0.5) * W / 510);
  x.push_back(W / 2);
  const auto b = vortex_barrier(x, std::vector<double>(x.size(), 1.0), std::vector<double>(x.size(), 0.0), p);
  double worst = 0.0;
  const double k = numeric::kPi / W;
  for (std::size_t i = 1; i < b.x_nu.size(); ++i) {
    const double exact = -std::log(std::abs(std::cos(k * b.x_nu[i]))) + std::log(std::abs(std::cos(k * (p.xi - W) / 2)));
    worst = std::max(worst, std::abs(b.tan_term[i] - exact) / std::abs(exact));
  }

  run.check("probability_bounds", bounds);
  run.check("monotone_in_photon_number", mono_n);
  run.check("monotone_in_bias", mono_b);
  run.check("switching_staircase_strict", strict);
  run.check("one_photon_plateau", plateau, "P_0 <= 0.001 while P_n >= 0.999 for n >= 1");
  run.check("barrier_oracle", worst <= 1e-4, "max relative error " + num(worst));
}

inline void reproduce_fig8(Run& run) {
  const auto c = pnrd_vs_pd(3.0, 0.01);
  run.write("pnrd_vs_pd.csv", c.csv());
  bool below_N = true, below_g = true;
  for (const auto& r : c.rows) {
    if (r.M < 6) below_N = below_N && r.ratio_N < 1.0;
    if (r.M < 18) below_g = below_g && r.ratio_g < 1.0;
  }
  run.results()["crossover_N"] = c.crossover_N ? json(*c.crossover_N) : json(nullptr);
  run.results()["crossover_g"] = c.crossover_g ? json(*c.crossover_g) : json(nullptr);
  run.results()["J0_over_pd_N"] = c.J0_N / c.pd_J_N;
  run.results()["J0_over_pd_g"] = c.J0_g / c.pd_J_g;
  std::cout << "crossover M: N -> " << (c.crossover_N ? std::to_string(*c.crossover_N) : "none") << ", g -> "
            << (c.crossover_g ? std::to_string(*c.crossover_g) : "none") << '\n';
  run.check("ratio_N_below_1_for_M_lt_6", below_N);
  run.check("ratio_g_below_1_for_M_lt_18", below_g);
  run.check("single_crossing", c.crossings_N == 1 && c.crossings_g == 1,
            "crossings N=" + std::to_string(c.crossings_N) + " g=" + std::to_string(c.crossings_g));
}

inline void reproduce_fig9(Run& run, unsigned threads) {
  const CoherentDist d(1000.0);
  const ParamSpec sN{Param::N};
  const std::vector<double> thresholds{900.5, 950.5, 1000.0, 1050.5, 1100.5};
  std::vector<double> S;
  for (int i = 0; i <= 40; ++i) S.push_back(std::pow(100.0, i / 40.0));
  S.push_back(numeric::kInf);
  std::vector<double> ge(thresholds.size() * S.size());
  parallel_for(ge.size(), threads, [&](std::size_t k) {
    ge[k] = threshold_equiv_noise(d, thresholds[k / S.size()], S[k % S.size()], sN);
  });
  io::CsvTable table({"t", "S", "gamma_e"});
  for (std::size_t k = 0; k < ge.size(); ++k) table.add(thresholds[k / S.size()], S[k % S.size()], ge[k]);
  run.write("tradespace.csv", table.str());

  const std::size_t at_N = 2 * S.size();
  bool decreasing = true;
  for (std::size_t i = 1; i + 1 < S.size(); ++i) decreasing = decreasing && ge[at_N + i] < ge[at_N + i - 1];
  const double limit = ge[at_N + S.size() - 1];
  run.check("coherent_limit", std::abs(limit - (numeric::kPi / 2 - 1)) <= 0.02,
            "gamma_e(t=N=1000, S=inf)=" + num(limit) + " vs pi/2-1");
  run.check("gamma_e_decreasing_in_S", decreasing, "t=N=1000, S in [1, 100]");
}

}  // namespace pdisc::cli
