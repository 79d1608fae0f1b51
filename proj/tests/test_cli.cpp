#include "isoman/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "isoman_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  const char* exe = std::getenv("ISOMAN_CLI_PATH");
  REQUIRE(exe != nullptr);
  fs::path o = work_dir() / "stdout.txt", e = work_dir() / "stderr.txt";
  std::string cmd = std::string("\"") + exe + "\" " + args + " >\"" + o.string() + "\" 2>\"" + e.string() + "\"";
  int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

nlohmann::json error_payload(const Result& r) { return nlohmann::json::parse(r.err); }

}  // namespace

TEST_CASE("spectrum writes its report and a manifest") {
  fs::path out = work_dir() / "spectrum";
  Result r = run("spectrum --model goodwin --out " + out.string());
  CHECK(r.code == 0);
  auto spec = isoman::read_json(out / "spectrum.json");
  CHECK(spec.at("beta") == 2);
  auto manifest = isoman::read_json(out / "manifest.json");
  CHECK(manifest.at("command") == "spectrum");
  CHECK(manifest.at("config").at("model") == "goodwin");
}

TEST_CASE("validation errors exit with code 2 and a JSON payload") {
  Result r = run("spectrum --model lorenz --out " + (work_dir() / "bad").string());
  CHECK(r.code == 2);
  auto j = error_payload(r);
  CHECK(j.at("error") == "UnknownModel");
  CHECK(j.contains("message"));
  CHECK(j.contains("details"));

  Result p = run("spectrum --model planar --param speed=2 --out " + (work_dir() / "bad").string());
  CHECK(p.code == 2);
  CHECK(error_payload(p).at("error") == "UnknownParameter");

  Result b = run("spectrum --model goodwin --beta 1 --out " + (work_dir() / "bad").string());
  CHECK(b.code == 2);
  CHECK(error_payload(b).at("error") == "PairSplit");

  Result u = run("spectrum --no-such-flag");
  CHECK(u.code == 2);
}

TEST_CASE("numerical failures exit with code 3") {
  fs::path cfg = work_dir() / "unstable.json";
  std::ofstream(cfg) << R"({"model": "linear", "matrix": [[0.1, 0.0], [0.0, -1.0]]})";
  Result r = run("spectrum --config " + cfg.string() + " --out " + (work_dir() / "unstable").string());
  CHECK(r.code == 3);
  CHECK(error_payload(r).at("error") == "UnstableFixedPoint");
}

TEST_CASE("trace, plot and compare produce their artifacts") {
  fs::path out = work_dir() / "trace";
  Result r = run("trace --model planar --method asym --order 4 --T 60 --record-interval 0.5 --out " + out.string());
  CHECK(r.code == 0);
  auto table = isoman::read_csv(out / "ray.csv");
  CHECK(table.rows.size() == 121);
  auto x1 = table.column("x_1");
  auto x2 = table.column("x_2");
  for (std::size_t i = 0; i < x1.size(); ++i) {
    double q = 1.25 * x1[i] * x1[i] * x1[i] * x1[i] - 20.0 / 9.0 * x1[i] * x1[i];
    CHECK(std::abs(x2[i] - q) <= 1e-9);
  }
  CHECK(fs::exists(out / "expansion.json"));

  fs::path svg = work_dir() / "ray.svg";
  Result p = run("plot --series " + (out / "ray.csv").string() + ",x_1,x_2,asym --out " + svg.string());
  CHECK(p.code == 0);
  CHECK(slurp(svg).find("<svg") != std::string::npos);
  Result missing = run("plot --series " + (out / "ray.csv").string() + ",x_1,nope --out " + svg.string());
  CHECK(missing.code == 2);
  CHECK(error_payload(missing).at("error") == "MissingColumn");

  fs::path cmp = work_dir() / "compare";
  Result c = run("compare --model planar --method asym --T 20 --dt 0.5 --out " + cmp.string());
  CHECK(c.code == 0);
  auto report = isoman::read_json(cmp / "compare.json");
  CHECK(report.contains("exit_time"));
}

TEST_CASE("manifold, reduced model and sweep chain") {
  fs::path m = work_dir() / "manifold";
  Result r = run("manifold --model planar --method asym --T 40 --record-interval 0.25 --levels 0.05,0.07 --out " +
                 m.string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(m / "manifold.csv"));
  CHECK(fs::exists(m / "level_sets.csv"));

  fs::path rb = work_dir() / "rom";
  Result b = run("rom-build --model planar --method asym --T 40 --record-interval 0.25 --channel 1,0 --out " +
                 rb.string());
  REQUIRE(b.code == 0);
  auto rom = isoman::read_json(rb / "rom.json");
  CHECK(rom.at("beta") == 1);

  fs::path rs = work_dir() / "romsim";
  Result s = run("rom-sim --model planar --rom " + (rb / "rom.json").string() +
                 " --signal sine --a 0.001 --period 10 --duration 20 --out " + rs.string());
  CHECK(s.code == 0);
  CHECK(isoman::read_csv(rs / "rom_sim.csv").rows.size() > 100);

  Result far = run("rom-sim --model planar --rom " + (rb / "rom.json").string() +
                   " --signal constant --a 1 --duration 200 --out " + rs.string());
  CHECK(far.code == 3);
  CHECK(error_payload(far).at("error") == "DomainExit");

  fs::path sw = work_dir() / "sweep";
  Result w = run("sweep-pd --model goodwin --system linear --a-min 0.01 --a-max 0.012 --a-step 0.001 --out " +
                 sw.string());
  CHECK(w.code == 0);
  auto table = isoman::read_csv(sw / "sweep_linear.csv");
  CHECK(table.header == std::vector<std::string>{"a", "max1", "max2"});
  CHECK(table.rows.size() == 3);
}
