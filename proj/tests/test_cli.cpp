#include "apgauge/commands.hpp"
#include "apgauge/config.hpp"
#include "apgauge/errors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <sys/wait.h>

using namespace apgauge;
namespace fs = std::filesystem;

namespace {

const char* kMathieu = R"({
  "dimension": 1,
  "coefficients": [{"frequency": [1], "kind": "constant", "value": 1.0}],
  "eps": 0.1,
  "h": [0.2, 0.1],
  "tau": 1.0,
  "K": [1, 2]
})";

const char* kFree = R"({
  "dimension": 1,
  "coefficients": [{"frequency": [1], "kind": "constant", "value": 1.0}],
  "eps": 0.0,
  "h": 0.1,
  "tau": 1.0,
  "K": 2,
  "oracle": {"k_points": 50}
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apgauge_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("serialize then parse is a fixed point") {
  const RunConfig a = parse_config(kMathieu);
  const std::string s1 = serialize_config(a);
  const RunConfig b = parse_config(s1);
  CHECK(serialize_config(b) == s1);
  CHECK(b.h == std::vector<double>{0.2, 0.1});
  CHECK(b.K == std::vector<int>{1, 2});
  CHECK(b.eps == std::vector<double>{0.1});

  // random scalar fields survive the trip exactly
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int t = 0; t < 20; ++t) {
    const double h = u(rng), eps = u(rng) * 0.1, tau = 0.5 + u(rng);
    const RunConfig c = parse_config(kMathieu, {"h=" + format_number(h), "eps=" + format_number(eps),
                                                "tau=" + format_number(tau)});
    const RunConfig d = parse_config(serialize_config(c));
    CHECK(d.h == c.h);
    CHECK(d.eps == c.eps);
    CHECK(d.tau == c.tau);
  }
}

TEST_CASE("unknown fields are rejected with their path") {
  CHECK(contains(config_error(R"({"dimension": 1, "bogus": 3})"), "bogus: unknown field"));
  CHECK(contains(config_error(R"({"dimension": 1, "gauge": {"MM": 3}})"), "gauge.MM: unknown field"));
  CHECK(contains(config_error(R"({"coefficients": [{"frequency": [1], "valu": 1}]})"),
                 "coefficients[0].valu: unknown field"));
}

TEST_CASE("syntax errors carry line and column") {
  const std::string text = "{\n  \"dimension\": 1,\n  \"h\": [0.1,, 0.2]\n}";
  const std::string msg = config_error(text);
  CHECK(contains(msg, "syntax error at line 3"));
  CHECK(contains(msg, "column 13"));
}

TEST_CASE("type and range errors name the field") {
  CHECK(contains(config_error(R"({"eps": "big"})"), "eps: expected a number"));
  CHECK(contains(config_error(R"({"K": 1.5})"), "K: expected an integer"));
  CHECK(contains(config_error(R"({"h": 1.5})"), "h: must lie in (0, 1)"));
  CHECK(contains(config_error(R"({"dimension": 3})"), "dimension: must be 1 or 2"));
  CHECK(contains(config_error(R"({"base": {"kind": "cubic"}})"), "base.kind: unknown kind 'cubic'"));
  CHECK(contains(config_error(R"({"coefficients": [{"frequency": [1, 2]}]})"),
                 "coefficients[0].frequency: needs 1 integer coordinates"));
  CHECK(contains(config_error(R"({"gauge": {"guard": 0}})"), "gauge.guard"));
  CHECK(contains(config_error(R"({"threads": -2})"), "threads: must be >= 0"));
  CHECK_THROWS_AS(load_config("/nonexistent/apgauge.json"), ConfigError);
}

TEST_CASE("overrides use dotted keys and JSON values") {
  const RunConfig c = parse_config(kMathieu, {"h=[0.05,0.025]", "gauge.M=2", "out=results/x", "oracle.k_points=17",
                                              "coefficients.0.value=[0.5,0.25]"});
  CHECK(c.h == std::vector<double>{0.05, 0.025});
  CHECK(c.gauge.M == 2);
  CHECK(c.out == "results/x");
  CHECK(c.oracle.k_points == 17);
  CHECK(c.coefficients[0].value == cplx(0.5, 0.25));
  CHECK(contains(config_error(kMathieu, {"nokey"}), "expected key=value"));
  CHECK(contains(config_error(kMathieu, {"coefficients.3.value=1"}), "out of range"));
  CHECK(contains(config_error(kMathieu, {"coefficients.x.value=1"}), "not an array index"));
  CHECK(contains(config_error(kMathieu, {"gauge.bogus=1"}), "gauge.bogus: unknown field"));
  CHECK(contains(config_error(kMathieu, {"h=2"}), "h: must lie in (0, 1)"));
}

TEST_CASE("free ids equals the exact Weyl count") {
  const fs::path dir = scratch("free");
  const RunConfig cfg = parse_config(kFree);
  const CommandResult r = run_command("ids", cfg, dir.string());
  CHECK(std::find(r.files.begin(), r.files.end(), "manifest.json") != r.files.end());
  std::stringstream csv(slurp(dir / "ids.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  const auto hs = split(header), vs = split(row);
  REQUIRE(hs.size() == vs.size());
  const auto col = [&](const std::string& name) {
    const auto it = std::find(hs.begin(), hs.end(), name);
    REQUIRE(it != hs.end());
    return vs[static_cast<std::size_t>(it - hs.begin())];
  };
  // |{xi^2 <= 1}| / (2 pi h) = 2 / (0.2 pi)
  CHECK(std::stod(col("n_pipeline")) == doctest::Approx(10.0 / std::numbers::pi).epsilon(1e-10));
  CHECK(col("n_oracle").empty());
  CHECK(col("flag").empty());

  const fs::path odir = scratch("free_oracle");
  run_command("oracle", cfg, odir.string());
  std::stringstream ocsv(slurp(odir / "oracle.csv"));
  std::getline(ocsv, header);
  std::getline(ocsv, row);
  CHECK(contains(header, "n_oracle"));
  fs::remove_all(dir);
  fs::remove_all(odir);
}

TEST_CASE("runs are deterministic and write a manifest") {
  const RunConfig cfg = parse_config(kMathieu);
  const fs::path d1 = scratch("det1"), d2 = scratch("det2");
  run_command("ids", cfg, d1.string());
  run_command("ids", cfg, d2.string());
  CHECK(slurp(d1 / "ids.csv") == slurp(d2 / "ids.csv"));
  CHECK(slurp(d1 / "ids_runs.jsonl") == slurp(d2 / "ids_runs.jsonl"));

  const auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  CHECK(m.at("command") == "ids");
  CHECK(m.at("files").size() == 2);
  // the embedded config reproduces the run
  const RunConfig back = parse_config(m.at("config").dump());
  CHECK(serialize_config(back) == serialize_config(cfg));

  std::stringstream csv(slurp(d1 / "ids.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("command dispatch") {
  CHECK(command_names().size() == 7);
  const RunConfig cfg = parse_config(kMathieu);
  CHECK_THROWS_AS(run_command("nonsense", cfg, scratch("bad").string()), ConfigError);
  // oracle needs a periodic module
  const RunConfig golden = parse_config(R"({
    "dimension": 1,
    "module": {"generators": [[1, 1.6180339887498949]]},
    "coefficients": [{"frequency": [1, 0]}, {"frequency": [0, 1]}],
    "eps": 0.05, "h": 0.1, "K": 1
  })");
  CHECK_THROWS_AS(run_command("oracle", golden, scratch("golden").string()), UnsupportedError);
  const CommandResult c = run_command("conditions", golden, scratch("golden").string());
  CHECK(contains(c.summary, "all conditions pass"));
  fs::remove_all(scratch("golden"));
}

#ifdef APGAUGE_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(APGAUGE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("apgauge_test_cli_" + name + ".json");
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("binary exit codes follow the error category") {
  const fs::path ok = write_config("ok", kFree);
  const fs::path out = scratch("bin");
  CHECK(run_cli("ids --quiet --config " + ok.string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(run_cli("ids --config " + ok.string() + " --override h=3 --out " + out.string()) ==
        static_cast<int>(ErrorCategory::Config));
  CHECK(run_cli("ids --config " + write_config("typo", R"({"dimensoin": 1})").string()) ==
        static_cast<int>(ErrorCategory::Config));
  CHECK(run_cli("ids") == static_cast<int>(ErrorCategory::Config));
  const fs::path lattice = write_config("lattice", R"({
    "dimension": 2,
    "coefficients": [{"frequency": [1, 0]}, {"frequency": [0, 1]}],
    "eps": 0.04, "h": 0.2, "tau": 1.0, "K": 0
  })");
  CHECK(run_cli("gauge --config " + lattice.string() + " --out " + out.string()) ==
        static_cast<int>(ErrorCategory::Unsupported));
  fs::remove_all(out);
}
#endif
