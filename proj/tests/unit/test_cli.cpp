#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coag/checkpoint.hpp"
#include "coag/cli/commands.hpp"

using namespace coag;
using namespace coag::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(COAG_SOURCE_DIR) / "configs";

json small_config(const fs::path& out) {
  return {{"dimension", 2},
          {"n_max", 24},
          {"kernel", {{"form", "constant"}}},
          {"source", {{{"composition", {1, 0}}, {"rate", 2.0}}, {{"composition", {0, 1}}, {"rate", 1.0}}}},
          {"solver", {{"tol", 1e-8}, {"reproducible", true}}},
          {"analysis", {{"fit_range", {4, 12}}, {"flux_radii", {1, 2, 4, 6}}, {"localization_radii", {2, 6}}}},
          {"output", {{"directory", out.string()}, {"name", "small"}}}};
}

fs::path write_json(const fs::path& path, const json& doc) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << doc.dump(2);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const fs::path kScratch = fs::temp_directory_path() / "coag_unit_cli";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("bundled configs parse") {
    for (const char* name : {"constant_d2", "brownian_d2", "additive_nonexistence", "powerlaw_1p2", "sweep_template"}) {
      const RunConfig cfg = load_config(kConfigs / (std::string(name) + ".json"));
      CHECK(cfg.dimension == 2);
      CHECK(parse_config(cfg.resolved()).resolved() == cfg.resolved());
    }
  }

  TEST_CASE("validation lists every violated field") {
    try {
      load_config(kConfigs / "malformed.json");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("source[0].rate") != std::string::npos);
      CHECK(what.find("solver.tol") != std::string::npos);
      CHECK(e.issues().size() == 2);
    }
    json doc = small_config(kScratch);
    doc["source"][0]["composition"] = {7, 0};
    doc["analysis"]["flux_radii"] = {4, 2};
    doc["kernel"] = {{"form", "sticky"}};
    try {
      parse_config(doc);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("exceeds n_max / 4") != std::string::npos);
      CHECK(what.find("analysis.flux_radii: must be strictly increasing") != std::string::npos);
      CHECK(what.find("kernel.form") != std::string::npos);
    }
  }

  TEST_CASE("output directory precedence") {
    const RunConfig cfg = parse_config(small_config("from-config"));
    GlobalOptions g;
    ::unsetenv("COAGSIM_OUTPUT_DIR");
    CHECK(resolve_output_dir(g, cfg) == "from-config");
    ::setenv("COAGSIM_OUTPUT_DIR", "from-env", 1);
    CHECK(resolve_output_dir(g, cfg) == "from-env");
    g.output_dir = "from-flag";
    CHECK(resolve_output_dir(g, cfg) == "from-flag");
    ::unsetenv("COAGSIM_OUTPUT_DIR");
  }

  TEST_CASE("simulate and analyze on a small run") {
    const fs::path dir = kScratch / "run";
    const fs::path cfg = write_json(kScratch / "small.json", small_config(dir));
    std::ostringstream out, err;
    REQUIRE(simulate(cfg, {}, out, err) == kOk);
    const json report = json::parse(out.str());
    CHECK(report.at("status") == "converged");
    CHECK(report.at("outflux")[0].get<double>() == doctest::Approx(2.0).epsilon(1e-6));
    const fs::path ckpt = dir / "small.ckpt";
    const std::string first = slurp(ckpt), first_csv = slurp(dir / "small_state.csv");
    out.str("");
    REQUIRE(simulate(cfg, {}, out, err) == kOk);
    CHECK(slurp(ckpt) == first);
    CHECK(slurp(dir / "small_state.csv") == first_csv);
    CHECK(read_checkpoint(ckpt).config() == load_config(cfg).resolved());

    AnalyzeOptions a;
    a.checkpoint = ckpt;
    for (const char* sub : {"flux", "scaling", "localize"}) {
      out.str("");
      CHECK_MESSAGE(analyze(sub, a, {}, out, err) == kOk, sub, err.str());
    }
    for (const char* file : {"small_flux.csv", "small_flux.svg", "small_scaling.csv", "small_bounds.csv",
                             "small_scaling.svg", "small_localize.csv", "small_fraction.svg", "small_dispersion.svg"}) {
      CHECK_MESSAGE(fs::exists(dir / file), file);
      const std::string text = slurp(dir / file);
      CHECK((text.find("\"n_max\":24") != std::string::npos || text.find("&quot;n_max&quot;:24") != std::string::npos));
    }
    std::ifstream flux_csv(dir / "small_flux.csv");
    std::string line;
    std::getline(flux_csv, line);
    std::getline(flux_csv, line);
    CHECK(line == "R,A_1,A_2,sum");
    CHECK(analyze("bogus", a, {}, out, err) == kInvalidInput);
    a.checkpoint = kScratch / "absent.ckpt";
    CHECK(analyze("flux", a, {}, out, err) == kInvalidInput);
  }

  TEST_CASE("exit codes for invalid, diverged and exhausted runs") {
    std::ostringstream out, err;
    CHECK(simulate(kConfigs / "malformed.json", {}, out, err) == kInvalidInput);
    CHECK(err.str().find("source[0].rate") != std::string::npos);
    json doc = small_config(kScratch / "codes");
    doc["kernel"] = {{"form", "additive"}};
    CHECK(simulate(write_json(kScratch / "additive.json", doc), {}, out, err) == kDiverged);
    doc["kernel"] = {{"form", "constant"}};
    doc["solver"]["max_steps"] = 2;
    CHECK(simulate(write_json(kScratch / "budget.json", doc), {}, out, err) == kBudgetExhausted);
  }

  TEST_CASE("alternate initial state is reported") {
    json doc = small_config(kScratch / "alt");
    doc["solver"]["alternate_initial"] = {{"kind", "uniform"}, {"level", 0.5}};
    std::ostringstream out, err;
    REQUIRE(simulate(write_json(kScratch / "alt.json", doc), {}, out, err) == kOk);
    const json report = json::parse(out.str());
    CHECK(report.at("alternate").at("max_difference_relative").get<double>() < 1e-5);
  }

  TEST_CASE("sweep: empty grid, diverged cells and per-cell failures") {
    const fs::path templ = write_json(kScratch / "templ.json", small_config(kScratch / "sweep"));
    std::ostringstream out, err;
    CHECK(sweep(templ, write_json(kScratch / "empty.json", json{{"gamma", json::array()}}), {}, out, err) == kOk);
    CHECK(json::parse(out.str()).at("cells") == 0);
    out.str("");
    GlobalOptions g;
    g.threads = 2;
    const json grid = {{"gamma", {0.0, 1.0}}, {"asymmetry", {1.0}}};
    REQUIRE(sweep(templ, write_json(kScratch / "grid.json", grid), g, out, err) == kOk);
    const json rows = json::parse(out.str()).at("rows");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("status") == "converged");
    CHECK(rows[1].at("status") == "diverged");
    CHECK(std::abs(std::stod(rows[0].at("theta0_err_l1").get<std::string>())) < 1e-10);
    out.str("");
    const json bad = {{"p", {0.0}}, {"asymmetry", {-1.0}}};
    REQUIRE(sweep(templ, write_json(kScratch / "bad.json", bad), {}, out, err) == kOk);
    CHECK(json::parse(out.str()).at("rows")[0].at("status") == "invalid");
    CHECK(sweep(templ, write_json(kScratch / "typo.json", json{{"gama", {0.0}}}), {}, out, err) == kInvalidInput);
  }

  TEST_CASE("lemma runs without a checkpoint") {
    AnalyzeOptions a;
    a.trials = 200;
    GlobalOptions g;
    g.output_dir = (kScratch / "lemma").string();
    std::ostringstream out, err;
    CHECK(analyze("lemma", a, g, out, err) == kOk);
    CHECK(json::parse(out.str()).at("violations") == 0);
    CHECK(fs::exists(kScratch / "lemma" / "run_dichotomy.csv"));
  }
}
