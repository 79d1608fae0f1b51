#pragma once

#include "isoman/integrate.hpp"
#include "isoman/manifold.hpp"
#include "isoman/models.hpp"
#include "isoman/rom.hpp"
#include "isoman/spectrum.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace isoman {

// Round-trip formatting (17 significant digits).
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // throws MissingColumn
  int index_of(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Column names of a ray table for an N-dimensional model.
std::vector<std::string> ray_header(int n);
std::vector<std::vector<double>> ray_rows(const ManifoldTrajectory& ray);
void write_ray_csv(const std::filesystem::path& path, const ManifoldTrajectory& ray);

nlohmann::json to_json(const Spectrum& s);
nlohmann::json to_json(const IntegratorConfig& cfg);
IntegratorConfig integrator_from_json(const nlohmann::json& j, IntegratorConfig base = {});

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);

// Effective settings of one CLI run. Precedence: defaults < config file < command-line flags.
struct RunConfig {
  std::string model = "planar";
  ParameterSet parameters;                      // overrides only
  std::optional<std::vector<std::vector<double>>> matrix;  // linear model
  std::string method = "pc";
  int order = 4;
  std::optional<int> beta;
  double seed_radius = 0.01;
  double psi_phase = 0.0;                       // single-ray seed phase
  double T = 100.0;
  double dt = 0.25;
  double step = 0.01;
  double record_interval = 0.0;
  double psi_cap = std::numeric_limits<double>::infinity();
  int rays = 200;
  int threads = 0;
  IntegratorConfig integrator{};
  std::string out_dir = "out";

  void validate() const;
  ModelPtr make_model() const;
  TraceConfig trace_config() const;
  ManifoldConfig manifold_config() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Unknown keys raise UnknownParameter.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

// Manifest of a CLI run: command, effective configuration, resolved model parameters, outputs.
nlohmann::json make_manifest(const std::string& command, const RunConfig& cfg, const nlohmann::json& extra,
                             const std::vector<std::string>& outputs);

}  // namespace isoman
