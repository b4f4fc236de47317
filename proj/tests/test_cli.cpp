#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "enkfmc/config.hpp"

using namespace enkfmc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("enkfmc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ENKFMC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("empty text gives the documented defaults") {
    const ExperimentConfig cfg = parse_config_text("");
    CHECK(render_config(cfg) == render_config(default_config()));
    CHECK(cfg.model.nstate == 40);
    CHECK(cfg.filter.sigma_r == 0.1);
    CHECK(cfg.filter.inflation == 1.0);
    CHECK(cfg.seeds.reference == 1);
  }
  SUBCASE("letkf preset default inflation") {
    const ExperimentConfig cfg = parse_config_text("[filter]\nmethod = letkf\n");
    CHECK(cfg.filter.inflation == 1.04);
    CHECK(!cfg.filter.inflation_explicit);
    const ExperimentConfig pinned =
        parse_config_text("[filter]\nmethod = letkf\ninflation = 1.1\n");
    CHECK(pinned.filter.inflation == 1.1);
    CHECK(pinned.filter.inflation_explicit);
  }
  SUBCASE("values land where they should") {
    const std::string text =
        "# comment line\n"
        "[model]\n"
        "nstate = 24\n"
        "dt = 0.025\n"
        "\n"
        "[network]\n"
        "fraction = 0.5\n"
        "pattern = random\n"
        "\n"
        "[filter]\n"
        "method = enkf-schur\n"
        "zeta = 3\n"
        "\n"
        "[seeds]\n"
        "observation = 99\n";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.model.nstate == 24);
    CHECK(cfg.model.dt == 0.025);
    CHECK(cfg.obs_fraction == 0.5);
    CHECK(cfg.pattern == NetworkPattern::Kind::RandomSeeded);
    CHECK(cfg.filter.method == FilterSpec::Method::EnkfSchur);
    CHECK(cfg.filter.zeta == 3);
    CHECK(cfg.seeds.observation == 99);
  }
  SUBCASE("range error names the key") {
    CHECK_THROWS_WITH_AS(parse_config_text("[filter]\nzeta = -1\n"),
                         doctest::Contains("zeta"), ConfigError);
  }
  SUBCASE("errors carry the line number") {
    CHECK_THROWS_WITH_AS(parse_config_text("[model]\nnstate = 40\nforcing = oops\n"),
                         doctest::Contains("line 3"), ConfigError);
  }
  SUBCASE("unknown keys and sections are rejected") {
    CHECK_THROWS_AS(parse_config_text("[model]\nnstat = 40\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[mdl]\nnstate = 40\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("nstate = 40\n"), ConfigError);  // key before any section
  }
  SUBCASE("echo round-trips byte for byte") {
    const std::string text =
        "[filter]\nmethod = letkf\nzeta = 4\nregression = tikhonov\nlambda = 0.2\n"
        "[estimate]\nnens_sweep = 50 200\n"
        "[sweep]\nthresholds = 0.1 0.2\n"
        "[run]\nworkers = 3\n";
    const std::string echo = render_config(parse_config_text(text));
    CHECK(render_config(parse_config_text(echo)) == echo);
  }
  SUBCASE("missing file is a config error") {
    CHECK_THROWS_AS(parse_config_file("/nonexistent/enkfmc.cfg"), ConfigError);
  }
}

TEST_CASE("run command") {
  SUBCASE("writes the full artifact set") {
    const fs::path dir = fresh_dir("run");
    const fs::path cfgf = dir / "exp.cfg";
    std::ofstream(cfgf) << "[ensemble]\ncycles = 5\nnens = 20\n";
    REQUIRE(run_cli("run --config " + cfgf.string() + " --out " + (dir / "out").string()) == 0);
    const std::string csv = slurp(dir / "out/run.csv");
    CHECK(count_lines(csv) == 6);  // header + one row per cycle
    CHECK(csv.rfind("cycle,rmse_bg,rmse_an,wall_ms", 0) == 0);
    CHECK(fs::exists(dir / "out/ranks.csv"));
    CHECK(fs::exists(dir / "out/summary.json"));
    CHECK(fs::exists(dir / "out/analysis_ensemble.csv"));
    // the members dump is one row per member, one column per component
    CHECK(count_lines(slurp(dir / "out/analysis_ensemble.csv")) == 20);
  }
  SUBCASE("flag overrides reach the config echo") {
    const fs::path dir = fresh_dir("override");
    REQUIRE(run_cli("run --out " + (dir / "o").string() + " --zeta 3 --nens 12 --filter letkf") == 0);
    const std::string summary = slurp(dir / "o/summary.json");
    CHECK(summary.find("zeta = 3") != std::string::npos);
    CHECK(summary.find("nens = 12") != std::string::npos);
    CHECK(summary.find("method = letkf") != std::string::npos);
    CHECK(summary.find("inflation = 1.04") != std::string::npos);  // preset follows the filter
  }
  SUBCASE("identical invocations give identical artifacts apart from wall time") {
    const fs::path dir = fresh_dir("repeat");
    REQUIRE(run_cli("run --out " + (dir / "a").string() + " --nens 15") == 0);
    REQUIRE(run_cli("run --out " + (dir / "b").string() + " --nens 15") == 0);
    CHECK(slurp(dir / "a/ranks.csv") == slurp(dir / "b/ranks.csv"));
    CHECK(slurp(dir / "a/analysis_ensemble.csv") == slurp(dir / "b/analysis_ensemble.csv"));
  }
  SUBCASE("unwritable output directory fails without partial artifacts") {
    const fs::path dir = fresh_dir("unwritable");
    std::ofstream(dir / "blocker") << "";
    const std::string out = (dir / "blocker" / "sub").string();  // a file is not a directory
    CHECK(run_cli("run --out " + out) != 0);
    CHECK(!fs::exists(dir / "blocker" / "sub"));
  }
  SUBCASE("bad flag values are rejected") {
    CHECK(run_cli("run --nens 1") != 0);
    CHECK(run_cli("run --filter nonsense") != 0);
    CHECK(run_cli("run --config /nonexistent.cfg") != 0);
  }
}

TEST_CASE("estimate command") {
  SUBCASE("same config, same dump bytes") {
    const fs::path dir = fresh_dir("estdet");
    REQUIRE(run_cli("estimate --out " + (dir / "a").string() + " --nens 40 --zeta 2") == 0);
    REQUIRE(run_cli("estimate --out " + (dir / "b").string() + " --nens 40 --zeta 2") == 0);
    CHECK(slurp(dir / "a/factors.txt") == slurp(dir / "b/factors.txt"));
  }
  SUBCASE("zero radius dumps a diagonal-only factorization") {
    const fs::path dir = fresh_dir("estdiag");
    REQUIRE(run_cli("estimate --out " + (dir / "o").string() + " --nens 40 --zeta 0") == 0);
    std::istringstream is(slurp(dir / "o/factors.txt"));
    std::string header;
    std::getline(is, header);
    CHECK(header.rfind("mcfactors", 0) == 0);
    std::string line;
    while (std::getline(is, line)) {
      // each row must be "index variance" with no coupling pairs
      std::istringstream row(line);
      std::string tok;
      int count = 0;
      while (row >> tok) ++count;
      CHECK(count == 2);
    }
  }
  SUBCASE("ensemble-size sweep converges monotonically") {
    const fs::path dir = fresh_dir("estconv");
    const fs::path cfgf = dir / "conv.cfg";
    std::ofstream(cfgf) << "[filter]\nzeta = 2\nregression = normal\n"
                           "[estimate]\nnens_sweep = 50 200 1000 5000\ntrials = 10\n";
    REQUIRE(run_cli("estimate --config " + cfgf.string() + " --out " + (dir / "o").string()) == 0);
    std::istringstream is(slurp(dir / "o/estimate.csv"));
    std::string header;
    std::getline(is, header);
    CHECK(header == "nens,median_error_norm");
    double prev = 1e300;
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) {
      const auto comma = line.find(',');
      REQUIRE(comma != std::string::npos);
      const double err = std::stod(line.substr(comma + 1));
      CHECK(err < prev);
      prev = err;
      ++rows;
    }
    CHECK(rows == 4);
  }
  SUBCASE("factor dump of a prior run round-trips through the csv source") {
    const fs::path dir = fresh_dir("estcsv");
    REQUIRE(run_cli("run --out " + (dir / "r").string() + " --nens 25") == 0);
    const fs::path cfgf = dir / "fromcsv.cfg";
    std::ofstream(cfgf) << "[estimate]\nsource = csv\ncsv_path = "
                        << (dir / "r/analysis_ensemble.csv").string()
                        << "\nreport_error_norm = false\n";
    REQUIRE(run_cli("estimate --config " + cfgf.string() + " --out " + (dir / "e").string() +
                    " --dump-factors from_run.txt") == 0);
    const std::string dump = slurp(dir / "e/from_run.txt");
    CHECK(dump.rfind("mcfactors 40", 0) == 0);
  }
}

TEST_CASE("sweep and compare commands") {
  SUBCASE("sweep writes per-threshold artifacts") {
    const fs::path dir = fresh_dir("sweep");
    const fs::path cfgf = dir / "s.cfg";
    std::ofstream(cfgf) << "[ensemble]\ncycles = 4\nnens = 15\n"
                           "[sweep]\nthresholds = 0.1 0.3\n";
    REQUIRE(run_cli("sweep --config " + cfgf.string() + " --out " + (dir / "o").string()) == 0);
    CHECK(count_lines(slurp(dir / "o/sweep.csv")) == 3);
    const std::string alpha = slurp(dir / "o/alpha.csv");
    CHECK(alpha.rfind("sigma_r,cycle,direction,alpha", 0) == 0);
    CHECK(fs::exists(dir / "o/run_sigma_0.1.csv"));
    CHECK(fs::exists(dir / "o/run_sigma_0.3.csv"));
  }
  SUBCASE("compare runs every filter with shared seeds") {
    const fs::path dir = fresh_dir("compare");
    REQUIRE(run_cli("compare --out " + (dir / "o").string() + " --nens 15") == 0);
    CHECK(fs::exists(dir / "o/run_enkf-mc.csv"));
    CHECK(fs::exists(dir / "o/run_letkf.csv"));
    CHECK(fs::exists(dir / "o/run_enkf-schur.csv"));
    const std::string joined = slurp(dir / "o/compare.csv");
    CHECK(joined.rfind("cycle,rmse_bg_enkf-mc,", 0) == 0);
    CHECK(count_lines(joined) == 31);
  }
}
