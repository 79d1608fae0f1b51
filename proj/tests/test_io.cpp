#include "isoman/error.hpp"
#include "isoman/io.hpp"
#include "isoman/plot.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace isoman;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("isoman_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("doubles survive a text round trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("CSV tables round trip and report missing columns") {
  fs::path dir = scratch_dir("csv");
  std::vector<std::vector<double>> rows = {{0.1, 1.0 / 7.0}, {-3.0, std::numeric_limits<double>::infinity()}};
  write_csv(dir / "t.csv", {"a", "b"}, rows);
  CsvTable t = read_csv(dir / "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows == rows);
  CHECK(t.column("b")[0] == 1.0 / 7.0);
  try {
    t.column("c");
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
  std::ofstream(dir / "empty.csv").close();
  CHECK(read_csv(dir / "empty.csv").header.empty());
  CHECK_THROWS_AS(read_csv(dir / "absent.csv"), Error);
}

TEST_CASE("ray tables carry one column per state and gradient entry") {
  auto h = ray_header(3);
  CHECK(h.front() == "t_back");
  CHECK(h.size() == 1 + 3 + 2 + 6 + 2);
  ManifoldTrajectory tr;
  TraceSample s;
  s.t_back = 0.5;
  s.x = Vector::Ones(3);
  s.psi = CVector::Constant(1, Complex(0.1, 0.2));
  s.I = {CVector::Constant(3, Complex(1.0, -1.0))};
  s.cond = 2.0;
  tr.samples.push_back(s);
  auto rows = ray_rows(tr);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].size() == h.size());
  CHECK(rows[0][4] == 0.1);
  CHECK(rows[0][5] == 0.2);
}

TEST_CASE("run configuration precedence and validation") {
  RunConfig base;
  base.model = "goodwin";
  base.T = 50.0;
  nlohmann::json file = {{"T", 80.0}, {"method", "asym"}, {"parameters", {{"alpha", 0.03}}}};
  RunConfig c = run_config_from_json(file, base);
  CHECK(c.model == "goodwin");
  CHECK(c.T == 80.0);
  CHECK(c.method == "asym");
  CHECK(c.parameters.at("alpha") == 0.03);
  RunConfig again = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(again) == to_json(c));
  try {
    run_config_from_json({{"bogus", 1}});
    FAIL("expected UnknownParameter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownParameter);
  }
  RunConfig bad;
  bad.dt = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  RunConfig unknown;
  unknown.model = "lorenz";
  try {
    unknown.make_model();
    FAIL("expected UnknownModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownModel);
  }
  nlohmann::json m = make_manifest("trace", c, {{"note", 1}}, {"ray.csv"});
  CHECK(m.at("command") == "trace");
  CHECK(m.at("outputs")[0] == "ray.csv");
}

TEST_CASE("integrator settings from JSON") {
  IntegratorConfig cfg = integrator_from_json({{"method", "rk4"}, {"step", 0.5}});
  CHECK(cfg.method == IntegratorMethod::RK4);
  CHECK(cfg.step == 0.5);
  CHECK_THROWS_AS(integrator_from_json({{"stepsize", 0.5}}), Error);
}

TEST_CASE("spectrum JSON lists eigen-data") {
  nlohmann::json j = to_json(analyze(*builtin("planar")));
  CHECK(j.at("beta") == 1);
  CHECK(j.at("eigen").size() == 2);
  CHECK(j.at("eigen")[0].at("re").get<double>() == doctest::Approx(-0.05));
}

TEST_CASE("SVG rendering is deterministic") {
  PlotSpec spec;
  spec.title = "a < b & c";
  PlotSeries s1{"first", {0.0, 1.0, 2.0}, {0.0, 1.0, 4.0}};
  PlotSeries s2{"second", {0.0, 2.0}, {1.0, -1.0}, true};
  std::string a = render_svg(spec, {s1, s2});
  std::string b = render_svg(spec, {s1, s2});
  CHECK(a == b);
  CHECK(a.find("<svg") != std::string::npos);
  CHECK(a.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(a.find("stroke-dasharray") != std::string::npos);
  CHECK(a.find("first") != std::string::npos);
}

TEST_CASE("CSV series requests") {
  fs::path dir = scratch_dir("plot");
  write_csv(dir / "d.csv", {"t", "y", "ray"}, {{0, 1, 0}, {1, 2, 0}, {0, 3, 1}, {1, 4, 1}});
  auto one = series_from_csv({{dir / "d.csv", "t", "y", "all", std::nullopt}});
  REQUIRE(one.size() == 1);
  CHECK(one[0].ys.size() == 4);
  auto grouped = series_from_csv({{dir / "d.csv", "t", "y", "ray", std::string("ray")}});
  CHECK(grouped.size() == 2);
  CHECK_THROWS_AS(series_from_csv({{dir / "d.csv", "t", "z", "", std::nullopt}}), Error);
  std::ofstream(dir / "empty.csv").close();
  try {
    series_from_csv({{dir / "empty.csv", "t", "y", "", std::nullopt}});
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
  CHECK_THROWS_AS(series_from_csv({}), Error);
}
