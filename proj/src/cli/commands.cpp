#include "coag/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>

#include "coag/checkpoint.hpp"
#include "coag/localization.hpp"
#include "coag/observables.hpp"
#include "coag/reference.hpp"
#include "coag/svg.hpp"

namespace coag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string());
  out << text;
}

fs::path artifact(const fs::path& dir, const RunConfig& cfg, const std::string& suffix) {
  return dir / (cfg.output.name + suffix);
}

void report_config_error(const ConfigError& e, std::ostream& err) { err << e.what() << '\n'; }

int exit_code(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return kOk;
    case SolverStatus::Diverged: return kDiverged;
    case SolverStatus::BudgetExhausted: return kBudgetExhausted;
  }
  return kBudgetExhausted;
}

json report_json(const SteadyStateReport& r, const SourceSpec& source) {
  const InjectionVector j0 = injection_vector(source);
  double rel = 0.0;
  for (Index j = 0; j < j0.j0.size(); ++j)
    if (j0.j0[j] > 0.0) rel = std::max(rel, std::abs(r.outflux[j] - j0.j0[j]) / j0.j0[j]);
  return {{"status", to_string(r.status)},
          {"converged", r.converged},
          {"residual", nan_safe(r.residual)},
          {"steps", r.steps},
          {"time", nan_safe(r.time)},
          {"wall_time", r.wall_time},
          {"method", to_string(r.method)},
          {"outflux", to_std(r.outflux)},
          {"j0", to_std(j0.j0)},
          {"outflux_relative_error", nan_safe(rel)},
          {"gamma_plus_2p", r.gamma_plus_2p},
          {"tail_moment_share", nan_safe(r.tail_moment_share)},
          {"message", r.message}};
}

struct Loaded {
  RunConfig config;
  PopulationState state;
};

// Checkpoint plus the config it was produced with (or an explicit override).
Loaded load_for_analysis(const AnalyzeOptions& options, const GlobalOptions& global) {
  if (!options.checkpoint) throw Error("this analysis needs --checkpoint");
  Checkpoint ck = read_checkpoint(*options.checkpoint);
  RunConfig cfg = options.config ? load_config(*options.config) : parse_config(ck.config());
  if (cfg.dimension != ck.state.lattice().dimension() || cfg.n_max != ck.state.lattice().n_max())
    throw Error("config (d = " + std::to_string(cfg.dimension) + ", n_max = " + std::to_string(cfg.n_max) +
                ") does not match the checkpoint lattice");
  apply_globals(global, cfg);
  return {std::move(cfg), std::move(ck.state)};
}

int analyze_flux(const Loaded& in, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const RunConfig& cfg = in.config;
  const json resolved = cfg.resolved();
  const KernelSpec kernel = cfg.kernel_spec();
  const FluxCurve curve = flux(in.state, kernel, cfg.analysis.flux_radii, cfg.solver.exec);
  for (const auto& w : curve.warnings) err << "warning: " << w << '\n';
  const InjectionVector j0 = injection_vector(cfg.source);
  const int d = cfg.dimension;

  std::vector<std::string> header{"R"};
  for (int j = 1; j <= d; ++j) header.push_back("A_" + std::to_string(j));
  header.push_back("sum");
  std::vector<std::vector<std::string>> rows;
  const Eigen::VectorXd total = curve.total();
  double worst = 0.0;
  for (std::size_t r = 0; r < curve.radii.size(); ++r) {
    std::vector<std::string> row{num(curve.radii[r])};
    for (int j = 0; j < d; ++j) {
      const double a = curve.flux(static_cast<Index>(r), j);
      row.push_back(num(a));
      if (j0.j0[j] > 0.0) worst = std::max(worst, std::abs(a / j0.j0[j] - 1.0));
    }
    row.push_back(num(total[static_cast<Index>(r)]));
    rows.push_back(std::move(row));
  }
  json summary = {{"radii", curve.radii.size()}, {"max_relative_deviation_from_j0", nan_safe(worst)}};
  if (cfg.output.csv) {
    write_csv(artifact(dir, cfg, "_flux.csv"), resolved, header, rows);
    summary["csv"] = artifact(dir, cfg, "_flux.csv").string();
  }
  if (cfg.output.svg) {
    SvgPlot plot;
    plot.title = "Per-species flux across size surfaces";
    plot.xlabel = "R";
    plot.ylabel = "A_j(R)";
    for (int j = 0; j < d; ++j) {
      SvgSeries s;
      s.name = "A_" + std::to_string(j + 1);
      s.x = curve.radii;
      s.color = kPalette[j % 6];
      for (Index r = 0; r < curve.flux.rows(); ++r) s.y.push_back(curve.flux(r, j));
      plot.series.push_back(std::move(s));
      plot.hlines.emplace_back(j0.j0[j], "J0_" + std::to_string(j + 1));
    }
    write_text(artifact(dir, cfg, "_flux.svg"), plot.render(resolved.dump()));
    summary["svg"] = artifact(dir, cfg, "_flux.svg").string();
  }

  // Reference constant-flux family at the same radii, when the kernel admits it.
  if (existence_gate(kernel).stationary_expected && cfg.output.csv) {
    try {
      const PowerLawFluxSolution ref(1.0, kernel, source_direction(cfg.source));
      const QuadratureFlux q = c4_flux(ref, kernel, cfg.analysis.flux_radii);
      const Eigen::VectorXd qt = q.curve.total();
      const double mean = qt.size() ? qt.mean() : 0.0;
      std::vector<std::string> h{"R"};
      for (int j = 1; j <= d; ++j) h.push_back("A_" + std::to_string(j));
      h.insert(h.end(), {"total", "relative_deviation_from_mean"});
      std::vector<std::vector<std::string>> qrows;
      for (std::size_t r = 0; r < q.curve.radii.size(); ++r) {
        std::vector<std::string> row{num(q.curve.radii[r])};
        for (int j = 0; j < d; ++j) row.push_back(num(q.curve.flux(static_cast<Index>(r), j)));
        row.push_back(num(qt[static_cast<Index>(r)]));
        row.push_back(num(qt[static_cast<Index>(r)] / mean - 1.0));
        qrows.push_back(std::move(row));
      }
      write_csv(artifact(dir, cfg, "_reference_flux.csv"), resolved, h, qrows);
      summary["reference_max_relative_deviation"] = nan_safe(max_relative_deviation(q.curve));
      for (const auto& w : q.curve.warnings) err << "warning: reference flux " << w << '\n';
    } catch (const Error& e) {
      err << "note: reference flux skipped: " << e.what() << '\n';
    }
  }
  out << summary.dump(2) << '\n';
  return kOk;
}

int analyze_scaling(const Loaded& in, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const RunConfig& cfg = in.config;
  const json resolved = cfg.resolved();
  const KernelSpec kernel = cfg.kernel_spec();
  const double gamma = kernel.gamma();
  const ScalingFit fit = fit_shell_scaling(in.state, cfg.analysis.b, cfg.analysis.fit_lo, cfg.analysis.fit_hi, gamma);

  // Guide line with the predicted slope through the centroid of the fitted points.
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < fit.z.size(); ++k) {
    mx += std::log(fit.z[k]);
    my += std::log(fit.shell_average[k]);
  }
  mx /= static_cast<double>(fit.z.size());
  my /= static_cast<double>(fit.z.size());
  const double anchor = std::exp(my - fit.predicted_exponent * mx);
  std::vector<double> guide;
  for (double z : fit.z) guide.push_back(anchor * std::pow(z, fit.predicted_exponent));

  const double j0 = injection_vector(cfg.source).norm;
  const BoundConstants c =
      calibrate_bound_constants(in.state, cfg.analysis.b, j0, gamma, cfg.analysis.fit_lo, cfg.analysis.fit_hi);
  const BoundReport bounds = two_sided_bound_check(in.state, cfg.analysis.b, c.C1, c.C2, j0, gamma,
                                                   cfg.source.support_bound());
  json summary = {{"exponent", fit.exponent},
                  {"exponent_stderr", fit.exponent_stderr},
                  {"predicted_exponent", fit.predicted_exponent},
                  {"prefactor", fit.prefactor},
                  {"fit_range", {fit.z_lo, fit.z_hi}},
                  {"C1", c.C1},
                  {"C2", c.C2},
                  {"bound_rows", bounds.rows.size()},
                  {"bound_violations", bounds.violations.size()}};
  if (!bounds.violations.empty())
    err << "note: " << bounds.violations.size()
        << " sizes outside the fit range fall outside the bounds calibrated on it\n";
  if (cfg.output.csv) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < fit.z.size(); ++k)
      rows.push_back({num(fit.z[k]), num(fit.shell_average[k]), num(guide[k])});
    write_csv(artifact(dir, cfg, "_scaling.csv"), resolved, {"z", "shell_average", "predicted"}, rows);
    std::vector<std::vector<std::string>> brows;
    for (const auto& r : bounds.rows)
      brows.push_back({num(r.z), num(r.lower), num(r.value), num(r.upper), r.ok ? "true" : "false"});
    write_csv(artifact(dir, cfg, "_bounds.csv"), resolved, {"z", "lower", "value", "upper", "ok"}, brows);
  }
  if (cfg.output.svg) {
    SvgPlot plot;
    plot.title = "Shell average against size";
    plot.xlabel = "z";
    plot.ylabel = "shell average";
    plot.logx = plot.logy = true;
    plot.series.push_back({"shell average", fit.z, fit.shell_average, kPalette[0], true, false});
    plot.series.push_back({"slope " + num(fit.predicted_exponent).substr(0, 7), fit.z, guide, kPalette[1], false, true});
    write_text(artifact(dir, cfg, "_scaling.svg"), plot.render(resolved.dump()));
  }
  out << summary.dump(2) << '\n';
  return kOk;
}

int analyze_localize(const Loaded& in, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const RunConfig& cfg = in.config;
  const json resolved = cfg.resolved();
  const double gamma = cfg.kernel_spec().gamma();
  std::vector<std::vector<std::string>> rows;
  SvgPlot fraction, dispersion_plot;
  fraction.title = "Shell mass within epsilon of the injection direction";
  fraction.xlabel = "R";
  fraction.ylabel = "fraction";
  fraction.logx = true;
  dispersion_plot.title = "Tail dispersion V(R)";
  dispersion_plot.xlabel = "R";
  dispersion_plot.ylabel = "V(R)";
  dispersion_plot.logx = true;
  json summary = json::array();
  int colour = 0;
  for (double eps : cfg.analysis.epsilon) {
    const LocalizationProfile prof = localization_profile(in.state, cfg.source, cfg.analysis.localization_radii, eps,
                                                          cfg.analysis.localization_b, gamma);
    SvgSeries fs_{"eps = " + num(eps), {}, {}, kPalette[colour++ % 6], true, false};
    SvgSeries vs{"V(R)", {}, {}, kPalette[0], true, false};
    json per = json::array();
    for (const auto& r : prof.rows) {
      if (r.empty) err << "warning: empty tail at R = " << num(r.R) << '\n';
      rows.push_back({num(r.R), num(r.fraction_l1), num(r.dispersion), num(r.theta0_err_l1), num(eps), num(r.shell_hi),
                      num(r.fraction_euclidean), num(r.delta90), num(r.delta99), r.empty ? "true" : "false"});
      fs_.x.push_back(r.R);
      fs_.y.push_back(r.fraction_l1);
      vs.x.push_back(r.R);
      vs.y.push_back(r.dispersion);
      per.push_back({{"R", r.R},
                     {"fraction", nan_safe(r.fraction_l1)},
                     {"V", nan_safe(r.dispersion)},
                     {"theta0_err_l1", nan_safe(r.theta0_err_l1)},
                     {"empty", r.empty}});
    }
    fraction.series.push_back(std::move(fs_));
    if (dispersion_plot.series.empty()) dispersion_plot.series.push_back(std::move(vs));
    summary.push_back({{"epsilon", eps}, {"rows", per}});
  }
  if (cfg.output.csv)
    write_csv(artifact(dir, cfg, "_localize.csv"), resolved,
              {"R", "fraction_eps", "V", "theta0_err_l1", "epsilon", "shell_hi", "fraction_eps_euclidean", "delta90",
               "delta99", "empty"},
              rows);
  if (cfg.output.svg) {
    write_text(artifact(dir, cfg, "_fraction.svg"), fraction.render(resolved.dump()));
    write_text(artifact(dir, cfg, "_dispersion.svg"), dispersion_plot.render(resolved.dump()));
  }
  out << json{{"theta0", to_std(source_direction(cfg.source))}, {"profiles", summary}}.dump(2) << '\n';
  return kOk;
}

int analyze_lemma(const AnalyzeOptions& options, const GlobalOptions& global, std::ostream& out, std::ostream& err) {
  // Runs without a checkpoint; the config only supplies the output location when given.
  std::optional<Loaded> loaded;
  RunConfig cfg;
  if (options.checkpoint) {
    loaded = load_for_analysis(options, global);
    cfg = loaded->config;
  } else if (options.config) {
    cfg = load_config(*options.config);
    apply_globals(global, cfg);
  }
  const long trials = options.trials.value_or(options.checkpoint || options.config ? cfg.analysis.lemma_trials : 10000);
  const fs::path dir = resolve_output_dir(global, cfg);
  fs::create_directories(dir);
  json resolved = options.checkpoint || options.config ? cfg.resolved() : json::object();
  resolved["lemma"] = {{"seed", options.seed}, {"trials", trials}};

  const double grid[] = {0.05, 0.1, 0.3};
  std::mt19937_64 rng(options.seed);
  std::vector<std::vector<std::string>> rows;
  long violations = 0;
  for (long t = 0; t < trials; ++t) {
    const int d = 2 + static_cast<int>(t % 2);
    const SimplexMeasure m = random_simplex_measure(d, rng);
    for (double eps : grid)
      for (double delta : grid) {
        std::string branch;
        double value = 0.0;
        try {
          const DichotomyResult r = dichotomy(m, eps, delta, calibrated_cd(d));
          branch = r.branch == DichotomyResult::Branch::Covered ? "covered" : "dispersed";
          value = r.branch == DichotomyResult::Branch::Covered ? r.mass : r.functional;
        } catch (const DichotomyViolation&) {
          branch = "violated";
          value = dispersion(m);
          ++violations;
        }
        rows.push_back({std::to_string(t), num(eps), num(delta), branch, num(value), std::to_string(d)});
      }
  }
  json summary = {{"trials", trials},
                  {"seed", options.seed},
                  {"checks", rows.size()},
                  {"violations", violations},
                  {"c_d", {{"2", calibrated_cd(2)}, {"3", calibrated_cd(3)}}}};
  if (cfg.output.csv)
    write_csv(dir / (cfg.output.name + "_dichotomy.csv"), resolved,
              {"trial", "epsilon", "delta", "branch", "value", "dimension"}, rows);

  if (loaded) {
    // Interval bound from the shell averages over the fit range.
    const double gamma = cfg.kernel_spec().gamma();
    const double q = -(3.0 + gamma) / 2.0;
    const double j0 = injection_vector(cfg.source).norm;
    const BoundConstants c = calibrate_bound_constants(loaded->state, cfg.analysis.b, j0, gamma, cfg.analysis.fit_lo,
                                                       cfg.analysis.fit_hi);
    try {
      const TailBoundResult tb = tail_bound_from_shells(loaded->state, cfg.analysis.b, c.C1 * std::sqrt(j0), q,
                                                        cfg.analysis.fit_lo, cfg.analysis.fit_hi);
      summary["tail_bound"] = {{"holds", tb.holds}, {"constant", tb.constant}, {"measured", tb.measured_constant}};
    } catch (const PremiseViolated& e) {
      summary["tail_bound"] = {{"premise_violated", e.offending()}};
    }
  }
  out << summary.dump(2) << '\n';
  if (violations > 0) err << "dichotomy violated in " << violations << " checks\n";
  return violations > 0 ? kDiverged : kOk;
}

}  // namespace

void write_csv(const fs::path& path, const json& config, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string());
  out << "# config: " << config.dump() << "\n";
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << csv_field(header[k]);
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << csv_field(row[k]);
    out << "\n";
  }
}

fs::path resolve_output_dir(const GlobalOptions& global, const RunConfig& config) {
  if (global.output_dir) return *global.output_dir;
  if (const char* env = std::getenv("COAGSIM_OUTPUT_DIR"); env && *env) return env;
  return config.output.directory;
}

void apply_globals(const GlobalOptions& global, RunConfig& config) {
  if (global.threads) config.solver.exec.threads = *global.threads;
  if (global.reproducible) config.solver.exec.reproducible = true;
}

int simulate(const fs::path& config_path, const GlobalOptions& global, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    report_config_error(e, err);
    return kInvalidInput;
  }
  apply_globals(global, cfg);
  try {
    const fs::path dir = resolve_output_dir(global, cfg);
    fs::create_directories(dir);
    const json resolved = cfg.resolved();
    const KernelSpec kernel = cfg.kernel_spec();
    SteadyStateResult run = integrate_to_steady_state(make_initial_state(cfg, cfg.initial), kernel, cfg.source, cfg.solver);
    json report = report_json(run.report, cfg.source);

    const fs::path ckpt = artifact(dir, cfg, ".ckpt");
    write_checkpoint(ckpt, run.state, resolved);
    report["checkpoint"] = ckpt.string();
    if (cfg.output.csv) {
      write_state_csv(artifact(dir, cfg, "_state.csv"), run.state, resolved);
      report["state_csv"] = artifact(dir, cfg, "_state.csv").string();
    }
    if (cfg.alternate_initial) {
      // Same problem from a second initial state; a large difference flags non-uniqueness.
      const SteadyStateResult alt =
          integrate_to_steady_state(make_initial_state(cfg, *cfg.alternate_initial), kernel, cfg.source, cfg.solver);
      const double scale = run.state.concentrations().abs().maxCoeff();
      const double diff = (run.state.concentrations() - alt.state.concentrations()).abs().maxCoeff();
      json a = report_json(alt.report, cfg.source);
      a["max_difference_relative"] = nan_safe(scale > 0.0 ? diff / scale : diff);
      report["alternate"] = a;
    }
    out << report.dump(2) << '\n';
    if (!run.report.message.empty()) err << run.report.message << '\n';
    return exit_code(run.report.status);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

int analyze(const std::string& subcommand, const AnalyzeOptions& options, const GlobalOptions& global,
            std::ostream& out, std::ostream& err) {
  try {
    if (subcommand == "lemma") return analyze_lemma(options, global, out, err);
    if (subcommand != "flux" && subcommand != "localize" && subcommand != "scaling") {
      err << "error: unknown analysis '" << subcommand << "' (flux, localize, scaling, lemma)\n";
      return kInvalidInput;
    }
    const Loaded in = load_for_analysis(options, global);
    const fs::path dir = resolve_output_dir(global, in.config);
    fs::create_directories(dir);
    if (subcommand == "flux") return analyze_flux(in, dir, out, err);
    if (subcommand == "scaling") return analyze_scaling(in, dir, out, err);
    return analyze_localize(in, dir, out, err);
  } catch (const ConfigError& e) {
    report_config_error(e, err);
    return kInvalidInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

namespace {

struct SweepCell {
  std::optional<double> gamma, p, asymmetry;
};

std::vector<std::optional<double>> axis(const json& grid, const char* key, bool& empty, std::vector<std::string>& issues) {
  if (!grid.contains(key)) return {std::nullopt};
  const json& v = grid.at(key);
  if (!v.is_array()) {
    issues.push_back(std::string("grid.") + key + ": expected an array of numbers");
    return {};
  }
  std::vector<std::optional<double>> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number() || !std::isfinite(v[k].get<double>()))
      issues.push_back(std::string("grid.") + key + "[" + std::to_string(k) + "]: expected a finite number");
    else
      out.push_back(v[k].get<double>());
  }
  if (out.empty()) empty = true;
  return out;
}

json cell_document(json doc, const SweepCell& cell) {
  if (cell.gamma || cell.p) {
    const json& k = doc.at("kernel");
    const bool powerlaw = k.value("form", "") == "product_powerlaw";
    json kernel = {{"form", "product_powerlaw"},
                   {"gamma", cell.gamma.value_or(powerlaw ? k.value("gamma", 0.0) : 0.0)},
                   {"p", cell.p.value_or(powerlaw ? k.value("p", 0.0) : 0.0)},
                   {"prefactor", powerlaw ? k.value("prefactor", 1.0) : 1.0}};
    doc["kernel"] = kernel;
  }
  if (cell.asymmetry) {
    const int d = doc.value("dimension", 0);
    if (d < 2) throw Error("source asymmetry needs dimension >= 2");
    std::vector<int> e1(d, 0), e2(d, 0);
    e1[0] = 1;
    e2[1] = 1;
    doc["source"] = json::array({{{"composition", e1}, {"rate", *cell.asymmetry}}, {{"composition", e2}, {"rate", 1.0}}});
  }
  return doc;
}

std::vector<std::string> run_cell(const json& templ, const SweepCell& cell, const GlobalOptions& global) {
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  std::vector<std::string> row{opt(cell.gamma), opt(cell.p), opt(cell.asymmetry)};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    RunConfig cfg = parse_config(cell_document(templ, cell));
    apply_globals(global, cfg);
    cfg.solver.exec.threads = 1;
    const KernelSpec kernel = cfg.kernel_spec();
    const SteadyStateResult run =
        integrate_to_steady_state(make_initial_state(cfg, cfg.initial), kernel, cfg.source, cfg.solver);
    std::string note = run.report.message;
    auto append = [&note](const std::string& s) { note += (note.empty() ? "" : "; ") + s; };

    double exponent = nan;
    try {
      exponent = fit_shell_scaling(run.state, cfg.analysis.b, cfg.analysis.fit_lo, cfg.analysis.fit_hi, kernel.gamma())
                     .exponent;
    } catch (const Error& e) {
      append(std::string("fit: ") + e.what());
    }
    double theta_err = nan;
    try {
      const Eigen::VectorXd theta = effective_theta0(run.state, cfg.n_max / 2.0, cfg.n_max, 0).theta;
      theta_err = (theta - source_direction(cfg.source)).lpNorm<1>();
    } catch (const Error& e) {
      append(std::string("direction: ") + e.what());
    }
    double plateau = nan;
    std::vector<double> radii;
    for (double R : cfg.analysis.flux_radii)
      if (R >= cfg.source.support_bound() && R <= cfg.n_max / 4.0) radii.push_back(R);
    if (!radii.empty()) {
      const FluxCurve curve = flux(run.state, kernel, radii);
      const Eigen::VectorXd j0 = injection_vector(cfg.source).j0;
      plateau = 0.0;
      for (Index r = 0; r < curve.flux.rows(); ++r)
        for (Index j = 0; j < j0.size(); ++j)
          if (j0[j] > 0.0) plateau = std::max(plateau, std::abs(curve.flux(r, j) / j0[j] - 1.0));
    }
    row.insert(row.end(), {to_string(run.report.status), num(run.report.residual), std::to_string(run.report.steps),
                           num(exponent), num(-(3.0 + kernel.gamma()) / 2.0), num(theta_err), num(plateau), note});
  } catch (const ConfigError& e) {
    std::string msg;
    for (const auto& i : e.issues()) msg += (msg.empty() ? "" : "; ") + i;
    row.insert(row.end(), {"invalid", "", "", "", "", "", "", msg});
  } catch (const std::exception& e) {
    row.insert(row.end(), {"error", "", "", "", "", "", "", e.what()});
  }
  return row;
}

}  // namespace

int sweep(const fs::path& template_path, const fs::path& grid_path, const GlobalOptions& global, std::ostream& out,
          std::ostream& err) {
  json templ, grid;
  try {
    std::ifstream t(template_path), g(grid_path);
    if (!t) throw Error("cannot open template " + template_path.string());
    if (!g) throw Error("cannot open grid " + grid_path.string());
    templ = json::parse(t);
    grid = json::parse(g);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
  RunConfig base;
  try {
    base = parse_config(templ);
  } catch (const ConfigError& e) {
    report_config_error(e, err);
    return kInvalidInput;
  }
  apply_globals(global, base);

  std::vector<std::string> issues;
  bool empty = !grid.is_object() || grid.empty();
  if (!grid.is_object()) issues.push_back("grid: expected an object with gamma, p and/or asymmetry arrays");
  if (grid.is_object())
    for (auto it = grid.begin(); it != grid.end(); ++it)
      if (it.key() != "gamma" && it.key() != "p" && it.key() != "asymmetry")
        issues.push_back("grid." + it.key() + ": unknown axis (gamma, p, asymmetry)");
  const auto gammas = axis(grid, "gamma", empty, issues);
  const auto ps = axis(grid, "p", empty, issues);
  const auto asym = axis(grid, "asymmetry", empty, issues);
  if (!issues.empty()) {
    report_config_error(ConfigError(issues), err);
    return kInvalidInput;
  }
  std::vector<SweepCell> cells;
  if (!empty)
    for (const auto& g : gammas)
      for (const auto& p : ps)
        for (const auto& a : asym) cells.push_back({g, p, a});

  std::vector<std::vector<std::string>> rows(cells.size());
  ThreadPool pool(std::max(1, base.solver.exec.threads));
  pool.parallel_for(static_cast<std::ptrdiff_t>(cells.size()),
                    [&](std::ptrdiff_t c) { rows[static_cast<std::size_t>(c)] = run_cell(templ, cells[static_cast<std::size_t>(c)], global); });

  const std::vector<std::string> header{"gamma",    "p",        "asymmetry",          "status",
                                        "residual", "steps",    "exponent",           "predicted_exponent",
                                        "theta0_err_l1", "plateau_deviation", "message"};
  try {
    const fs::path dir = resolve_output_dir(global, base);
    fs::create_directories(dir);
    const fs::path csv = dir / (base.output.name + "_sweep.csv");
    json provenance = base.resolved();
    provenance["grid"] = grid;
    write_csv(csv, provenance, header, rows);
    json summary = {{"cells", cells.size()}, {"csv", csv.string()}, {"rows", json::array()}};
    for (const auto& r : rows) {
      json row;
      for (std::size_t k = 0; k < header.size(); ++k) row[header[k]] = r[k];
      summary["rows"].push_back(row);
    }
    out << summary.dump(2) << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
  return kOk;
}

}  // namespace coag::cli
