#include "coag/cli/config.hpp"

#include <cmath>
#include <fstream>

namespace coag::cli {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& issues) {
  std::string out = "invalid configuration:";
  for (const auto& i : issues) out += "\n  " + i;
  return out;
}

// Typed field readers: record a problem and fall back to the default on any mismatch.
struct Reader {
  std::vector<std::string>& issues;

  const json* find(const json& obj, const std::string& key) const {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
  }

  double number(const json& obj, const std::string& key, const std::string& path, double fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number()) {
      issues.push_back(path + ": expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  long integer(const json& obj, const std::string& key, const std::string& path, long fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      issues.push_back(path + ": expected an integer");
      return fallback;
    }
    return v->get<long>();
  }

  bool boolean(const json& obj, const std::string& key, const std::string& path, bool fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      issues.push_back(path + ": expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& path, std::string fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_string()) {
      issues.push_back(path + ": expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path,
                              std::vector<double> fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_array()) {
      issues.push_back(path + ": expected an array of numbers");
      return fallback;
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < v->size(); ++k) {
      if (!(*v)[k].is_number()) {
        issues.push_back(path + "[" + std::to_string(k) + "]: expected a number");
        continue;
      }
      out.push_back((*v)[k].get<double>());
    }
    return out;
  }
};

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed,
                std::vector<std::string>& issues) {
  if (!obj.is_object()) return;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) issues.push_back(path + "." + it.key() + ": unknown field");
  }
}

std::vector<double> default_flux_radii(int support, int n_max) {
  std::vector<double> r;
  for (int R = std::max(1, support); R <= n_max / 2; ++R) r.push_back(R);
  return r;
}

std::vector<double> default_localization_radii(int n_max) { return {n_max / 100.0, n_max / 10.0}; }

InitialConfig read_initial(const json& v, const std::string& path, std::vector<std::string>& issues) {
  InitialConfig init;
  if (v.is_string()) {
    init.kind = v.get<std::string>();
  } else if (v.is_object()) {
    Reader rd{issues};
    init.kind = rd.string(v, "kind", path + ".kind", "zero");
    init.level = rd.number(v, "level", path + ".level", 0.0);
    check_keys(v, path, {"kind", "level"}, issues);
  } else {
    issues.push_back(path + ": expected a string or an object");
  }
  if (init.kind != "zero" && init.kind != "source" && init.kind != "uniform")
    issues.push_back(path + ": unknown initial state '" + init.kind + "' (zero, source, uniform)");
  if (init.kind == "uniform" && !(init.level > 0.0)) issues.push_back(path + ".level: must be > 0 for uniform");
  if (init.level < 0.0) issues.push_back(path + ".level: must be >= 0");
  return init;
}

json initial_json(const InitialConfig& i) { return {{"kind", i.kind}, {"level", i.level}}; }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : Error(join(issues)), issues_(std::move(issues)) {}

std::optional<KernelSpec> kernel_from_json(const json& block, int dimension, const std::string& path,
                                           std::vector<std::string>& issues) {
  if (!block.is_object()) {
    issues.push_back(path + ": expected an object");
    return std::nullopt;
  }
  Reader rd{issues};
  const std::size_t before = issues.size();
  const std::string form = rd.string(block, "form", path + ".form", "");
  std::optional<KernelSpec> spec;
  auto positive = [&](double v, const std::string& field) {
    if (!(v > 0.0)) issues.push_back(path + "." + field + ": must be > 0");
  };
  if (form == "constant") {
    check_keys(block, path, {"form", "c", "c1", "c2"}, issues);
    const double c = rd.number(block, "c", path + ".c", 1.0);
    positive(c, "c");
    if (issues.size() == before) spec = KernelSpec::constant(c);
  } else if (form == "brownian") {
    check_keys(block, path, {"form", "C", "volumes", "c1", "c2"}, issues);
    const double C = rd.number(block, "C", path + ".C", 1.0);
    positive(C, "C");
    std::vector<double> volumes = rd.numbers(block, "volumes", path + ".volumes", std::vector<double>(dimension, 1.0));
    if (static_cast<int>(volumes.size()) != dimension)
      issues.push_back(path + ".volumes: needs one volume per species (" + std::to_string(dimension) + ")");
    for (std::size_t k = 0; k < volumes.size(); ++k)
      if (!(volumes[k] > 0.0)) issues.push_back(path + ".volumes[" + std::to_string(k) + "]: must be > 0");
    if (issues.size() == before) spec = KernelSpec::brownian(C, volumes);
  } else if (form == "product_powerlaw") {
    check_keys(block, path, {"form", "gamma", "p", "prefactor", "c1", "c2"}, issues);
    const double gamma = rd.number(block, "gamma", path + ".gamma", 0.0);
    const double p = rd.number(block, "p", path + ".p", 0.0);
    const double pref = rd.number(block, "prefactor", path + ".prefactor", 1.0);
    positive(pref, "prefactor");
    if (!std::isfinite(gamma)) issues.push_back(path + ".gamma: must be finite");
    if (issues.size() == before) spec = KernelSpec::product_powerlaw(gamma, p, pref);
  } else if (form == "additive") {
    check_keys(block, path, {"form", "prefactor", "c1", "c2"}, issues);
    const double pref = rd.number(block, "prefactor", path + ".prefactor", 1.0);
    positive(pref, "prefactor");
    if (issues.size() == before) spec = KernelSpec::additive(pref);
  } else if (form == "size_table") {
    check_keys(block, path, {"form", "table", "gamma", "p", "c1", "c2"}, issues);
    const json* t = rd.find(block, "table");
    Eigen::MatrixXd table;
    if (!t || !t->is_array() || t->empty()) {
      issues.push_back(path + ".table: expected a square array of arrays");
    } else {
      const auto m = static_cast<Index>(t->size());
      table.resize(m, m);
      for (Index i = 0; i < m; ++i) {
        const json& row = (*t)[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != m) {
          issues.push_back(path + ".table[" + std::to_string(i) + "]: expected " + std::to_string(m) + " numbers");
          continue;
        }
        for (Index j = 0; j < m; ++j) {
          const json& v = row[static_cast<std::size_t>(j)];
          if (!v.is_number() || !(v.get<double>() > 0.0)) {
            issues.push_back(path + ".table[" + std::to_string(i) + "][" + std::to_string(j) + "]: must be > 0");
            continue;
          }
          table(i, j) = v.get<double>();
        }
      }
      if (issues.size() == before && !table.isApprox(table.transpose(), 0.0))
        issues.push_back(path + ".table: must be symmetric");
    }
    const double gamma = rd.number(block, "gamma", path + ".gamma", 0.0);
    const double p = rd.number(block, "p", path + ".p", 0.0);
    const double c1 = rd.number(block, "c1", path + ".c1", 0.0);
    const double c2 = rd.number(block, "c2", path + ".c2", 0.0);
    if (!(c1 > 0.0)) issues.push_back(path + ".c1: must be > 0");
    if (!(c2 >= c1)) issues.push_back(path + ".c2: must be >= c1");
    if (issues.size() == before) spec = KernelSpec::size_table(table, gamma, p, c1, c2);
    return spec;
  } else {
    issues.push_back(path + ".form: unknown kernel form '" + form +
                     "' (constant, brownian, product_powerlaw, additive, size_table)");
    return std::nullopt;
  }
  if (spec && (rd.find(block, "c1") || rd.find(block, "c2"))) {
    const double c1 = rd.number(block, "c1", path + ".c1", spec->c1());
    const double c2 = rd.number(block, "c2", path + ".c2", spec->c2());
    if (!(c1 > 0.0) || !(c2 >= c1)) {
      issues.push_back(path + ".c1/c2: need 0 < c1 <= c2");
      return std::nullopt;
    }
    spec = spec->with_envelope(c1, c2);
  }
  return spec;
}

KernelSpec RunConfig::kernel_spec() const {
  std::vector<std::string> issues;
  auto spec = kernel_from_json(kernel, dimension, "kernel", issues);
  if (!spec) throw ConfigError(issues);
  return *spec;
}

RunConfig parse_config(const json& doc) {
  std::vector<std::string> issues;
  RunConfig cfg;
  if (!doc.is_object()) throw ConfigError({"(root): expected a JSON object"});
  check_keys(doc, "(root)", {"dimension", "n_max", "kernel", "source", "solver", "analysis", "output"}, issues);
  Reader rd{issues};

  cfg.dimension = static_cast<int>(rd.integer(doc, "dimension", "dimension", 0));
  cfg.n_max = static_cast<int>(rd.integer(doc, "n_max", "n_max", 0));
  if (cfg.dimension < 1 || cfg.dimension > 3) issues.push_back("dimension: must be 1, 2 or 3");
  if (cfg.n_max < 4) issues.push_back("n_max: must be >= 4");

  if (const json* k = rd.find(doc, "kernel")) {
    cfg.kernel = *k;
    if (cfg.dimension >= 1) kernel_from_json(*k, cfg.dimension, "kernel", issues);
  } else {
    issues.push_back("kernel: missing");
  }

  const json* src = rd.find(doc, "source");
  if (!src || !src->is_array()) {
    issues.push_back("source: expected an array of {composition, rate}");
  } else {
    for (std::size_t k = 0; k < src->size(); ++k) {
      const std::string path = "source[" + std::to_string(k) + "]";
      const json& e = (*src)[k];
      if (!e.is_object()) {
        issues.push_back(path + ": expected an object");
        continue;
      }
      check_keys(e, path, {"composition", "rate"}, issues);
      const double rate = rd.number(e, "rate", path + ".rate", 0.0);
      if (!(rate > 0.0)) issues.push_back(path + ".rate: must be > 0");
      const json* c = rd.find(e, "composition");
      if (!c || !c->is_array() || static_cast<int>(c->size()) != cfg.dimension) {
        issues.push_back(path + ".composition: expected " + std::to_string(cfg.dimension) + " non-negative integers");
        continue;
      }
      Eigen::VectorXi counts(cfg.dimension);
      bool ok = true;
      for (int j = 0; j < cfg.dimension; ++j) {
        const json& v = (*c)[static_cast<std::size_t>(j)];
        if (!v.is_number_integer() || v.get<int>() < 0) {
          issues.push_back(path + ".composition[" + std::to_string(j) + "]: must be a non-negative integer");
          ok = false;
        } else {
          counts[j] = v.get<int>();
        }
      }
      if (!ok) continue;
      if (counts.sum() < 1) {
        issues.push_back(path + ".composition: the origin is not a composition");
        continue;
      }
      if (cfg.n_max >= 4 && 4 * counts.sum() > cfg.n_max)
        issues.push_back(path + ".composition: size " + std::to_string(counts.sum()) + " exceeds n_max / 4");
      if (rate > 0.0) cfg.source.add(Composition(counts), rate);
    }
  }

  const json empty = json::object();
  const json* solver = rd.find(doc, "solver");
  const json& sv = solver ? *solver : empty;
  if (solver && !solver->is_object()) issues.push_back("solver: expected an object");
  check_keys(sv, "solver",
             {"tol", "max_time", "max_steps", "method", "reproducible", "threads", "divergence_factor", "initial",
              "alternate_initial"},
             issues);
  cfg.solver.tol = rd.number(sv, "tol", "solver.tol", cfg.solver.tol);
  cfg.solver.max_time = rd.number(sv, "max_time", "solver.max_time", cfg.solver.max_time);
  cfg.solver.max_steps = rd.integer(sv, "max_steps", "solver.max_steps", cfg.solver.max_steps);
  cfg.solver.divergence_factor = rd.number(sv, "divergence_factor", "solver.divergence_factor", cfg.solver.divergence_factor);
  cfg.solver.exec.reproducible = rd.boolean(sv, "reproducible", "solver.reproducible", false);
  cfg.solver.exec.threads = static_cast<int>(rd.integer(sv, "threads", "solver.threads", 1));
  const std::string method = rd.string(sv, "method", "solver.method", "shell_sweep");
  try {
    cfg.solver.method = solver_method_from_string(method);
  } catch (const Error&) {
    issues.push_back("solver.method: unknown method '" + method + "' (shell_sweep, runge_kutta)");
  }
  if (!(cfg.solver.tol > 0.0)) issues.push_back("solver.tol: must be > 0");
  if (!(cfg.solver.max_time > 0.0)) issues.push_back("solver.max_time: must be > 0");
  if (cfg.solver.max_steps < 1) issues.push_back("solver.max_steps: must be >= 1");
  if (!(cfg.solver.divergence_factor > 0.0)) issues.push_back("solver.divergence_factor: must be > 0");
  if (cfg.solver.exec.threads < 1) issues.push_back("solver.threads: must be >= 1");
  if (const json* v = rd.find(sv, "initial")) cfg.initial = read_initial(*v, "solver.initial", issues);
  if (const json* v = rd.find(sv, "alternate_initial")) cfg.alternate_initial = read_initial(*v, "solver.alternate_initial", issues);

  const json* analysis = rd.find(doc, "analysis");
  const json& an = analysis ? *analysis : empty;
  check_keys(an, "analysis",
             {"flux_radii", "localization_radii", "b", "localization_b", "epsilon", "fit_range", "lemma_trials", "seed"},
             issues);
  const int support = cfg.source.support_bound();
  const int n_max = std::max(cfg.n_max, 4);
  cfg.analysis.flux_radii = rd.numbers(an, "flux_radii", "analysis.flux_radii", default_flux_radii(support, n_max));
  cfg.analysis.localization_radii =
      rd.numbers(an, "localization_radii", "analysis.localization_radii", default_localization_radii(n_max));
  cfg.analysis.b = rd.number(an, "b", "analysis.b", cfg.analysis.b);
  cfg.analysis.localization_b = rd.number(an, "localization_b", "analysis.localization_b", cfg.analysis.localization_b);
  cfg.analysis.epsilon = rd.numbers(an, "epsilon", "analysis.epsilon", cfg.analysis.epsilon);
  const std::vector<double> fit =
      rd.numbers(an, "fit_range", "analysis.fit_range", {std::max(8.0, 2.0 * support), n_max / 2.0});
  if (fit.size() != 2) {
    issues.push_back("analysis.fit_range: expected [lo, hi]");
  } else {
    cfg.analysis.fit_lo = fit[0];
    cfg.analysis.fit_hi = fit[1];
    if (!(fit[0] > 0.0 && fit[1] > fit[0])) issues.push_back("analysis.fit_range: need 0 < lo < hi");
    if (fit[1] > n_max) issues.push_back("analysis.fit_range: hi exceeds n_max");
  }
  cfg.analysis.lemma_trials = rd.integer(an, "lemma_trials", "analysis.lemma_trials", cfg.analysis.lemma_trials);
  cfg.analysis.seed = static_cast<std::uint64_t>(rd.integer(an, "seed", "analysis.seed", 42));
  auto sorted = [&](const std::vector<double>& v, const std::string& path) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!(v[k] > 0.0)) issues.push_back(path + "[" + std::to_string(k) + "]: must be > 0");
      if (k > 0 && !(v[k] > v[k - 1])) issues.push_back(path + ": must be strictly increasing");
    }
  };
  sorted(cfg.analysis.flux_radii, "analysis.flux_radii");
  sorted(cfg.analysis.localization_radii, "analysis.localization_radii");
  for (double r : cfg.analysis.flux_radii)
    if (r > n_max) issues.push_back("analysis.flux_radii: radius " + std::to_string(r) + " exceeds n_max");
  if (!(cfg.analysis.b > 0.0 && cfg.analysis.b < 1.0)) issues.push_back("analysis.b: must be in (0, 1)");
  if (!(cfg.analysis.localization_b > 0.0 && cfg.analysis.localization_b < 1.0))
    issues.push_back("analysis.localization_b: must be in (0, 1)");
  for (std::size_t k = 0; k < cfg.analysis.epsilon.size(); ++k)
    if (!(cfg.analysis.epsilon[k] > 0.0)) issues.push_back("analysis.epsilon[" + std::to_string(k) + "]: must be > 0");
  if (cfg.analysis.lemma_trials < 0) issues.push_back("analysis.lemma_trials: must be >= 0");

  const json* output = rd.find(doc, "output");
  const json& out = output ? *output : empty;
  check_keys(out, "output", {"directory", "name", "formats"}, issues);
  cfg.output.directory = rd.string(out, "directory", "output.directory", cfg.output.directory);
  cfg.output.name = rd.string(out, "name", "output.name", cfg.output.name);
  if (cfg.output.name.empty() || cfg.output.name.find('/') != std::string::npos)
    issues.push_back("output.name: must be a non-empty file stem");
  if (const json* f = rd.find(out, "formats")) {
    cfg.output.csv = cfg.output.svg = false;
    if (!f->is_array()) {
      issues.push_back("output.formats: expected an array");
    } else {
      for (std::size_t k = 0; k < f->size(); ++k) {
        const json& v = (*f)[k];
        if (v == "csv") cfg.output.csv = true;
        else if (v == "svg") cfg.output.svg = true;
        else issues.push_back("output.formats[" + std::to_string(k) + "]: unknown format (csv, svg)");
      }
    }
  }

  if (!issues.empty()) throw ConfigError(issues);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"(file): cannot open " + path.string()});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError({"(file): " + path.string() + " is not valid JSON: " + e.what()});
  }
  return parse_config(doc);
}

json RunConfig::resolved() const {
  json src = json::array();
  for (const auto& e : source.entries()) {
    std::vector<int> c(e.composition.counts().data(), e.composition.counts().data() + e.composition.dimension());
    src.push_back({{"composition", c}, {"rate", e.rate}});
  }
  const KernelSpec spec = kernel_spec();
  json k = kernel;
  k["c1"] = spec.c1();
  k["c2"] = spec.c2();
  if (k.value("form", "") == "brownian" && !k.contains("volumes")) k["volumes"] = std::vector<double>(dimension, 1.0);
  json doc = {
      {"dimension", dimension},
      {"n_max", n_max},
      {"kernel", k},
      {"source", src},
      {"solver",
       {{"tol", solver.tol},
        {"max_time", solver.max_time},
        {"max_steps", solver.max_steps},
        {"method", to_string(solver.method)},
        {"reproducible", solver.exec.reproducible},
        {"threads", solver.exec.threads},
        {"divergence_factor", solver.divergence_factor},
        {"initial", initial_json(initial)},
        {"alternate_initial", alternate_initial ? initial_json(*alternate_initial) : json(nullptr)}}},
      {"analysis",
       {{"flux_radii", analysis.flux_radii},
        {"localization_radii", analysis.localization_radii},
        {"b", analysis.b},
        {"localization_b", analysis.localization_b},
        {"epsilon", analysis.epsilon},
        {"fit_range", {analysis.fit_lo, analysis.fit_hi}},
        {"lemma_trials", analysis.lemma_trials},
        {"seed", analysis.seed}}},
      {"output", {{"directory", output.directory}, {"name", output.name}, {"formats", json::array()}}},
  };
  if (output.csv) doc["output"]["formats"].push_back("csv");
  if (output.svg) doc["output"]["formats"].push_back("svg");
  return doc;
}

PopulationState make_initial_state(const RunConfig& config, const InitialConfig& initial) {
  auto lattice = enumerate(config.dimension, config.n_max);
  PopulationState state(lattice);
  if (initial.kind == "source") state.concentrations() = config.source.on_lattice(*lattice);
  else if (initial.kind == "uniform") state.concentrations().setConstant(initial.level);
  return state;
}

}  // namespace coag::cli
