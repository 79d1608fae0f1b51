#include "isoman/io.hpp"

#include "isoman/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace isoman {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int CsvTable::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found", {{"column", name}, {"available", header}});
}

std::vector<double> CsvTable::column(const std::string& name) const {
  int idx = index_of(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(idx));
  return out;
}

namespace {

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

double json_double(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::InvalidArgument, "expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << '\n';
  }
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::InvalidArgument, "ragged CSV row", {{"file", path.string()}, {"line", lineno}});
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str()) {
        throw Error(ErrorCode::InvalidArgument, "non-numeric CSV cell '" + c + "'",
                    {{"file", path.string()}, {"line", lineno}});
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> ray_header(int n) {
  std::vector<std::string> h{"t_back"};
  for (int i = 1; i <= n; ++i) h.push_back("x_" + std::to_string(i));
  h.push_back("psi1_re");
  h.push_back("psi1_im");
  for (int i = 1; i <= n; ++i) h.push_back("I1_re_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) h.push_back("I1_im_" + std::to_string(i));
  h.push_back("cond");
  h.push_back("corr_norm");
  return h;
}

std::vector<std::vector<double>> ray_rows(const ManifoldTrajectory& ray) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : ray.samples) {
    std::vector<double> r{s.t_back};
    for (Eigen::Index i = 0; i < s.x.size(); ++i) r.push_back(s.x(i));
    r.push_back(s.psi(0).real());
    r.push_back(s.psi(0).imag());
    for (Eigen::Index i = 0; i < s.x.size(); ++i) r.push_back(s.I.empty() ? 0.0 : s.I[0](i).real());
    for (Eigen::Index i = 0; i < s.x.size(); ++i) r.push_back(s.I.empty() ? 0.0 : s.I[0](i).imag());
    r.push_back(s.cond);
    r.push_back(s.corr_norm);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_ray_csv(const fs::path& path, const ManifoldTrajectory& ray) {
  int n = ray.samples.empty() ? 0 : static_cast<int>(ray.samples.front().x.size());
  write_csv(path, ray_header(n), ray_rows(ray));
}

nlohmann::json to_json(const Spectrum& s) {
  nlohmann::json ev = nlohmann::json::array();
  for (Eigen::Index k = 0; k < s.lambda.size(); ++k) {
    std::vector<double> vr, vi, wr, wi;
    for (Eigen::Index i = 0; i < s.x0.size(); ++i) {
      vr.push_back(s.v(i, k).real());
      vi.push_back(s.v(i, k).imag());
      wr.push_back(s.w(i, k).real());
      wi.push_back(s.w(i, k).imag());
    }
    ev.push_back({{"re", s.lambda(k).real()},
                  {"im", s.lambda(k).imag()},
                  {"partner", s.partner[k]},
                  {"v_re", vr},
                  {"v_im", vi},
                  {"w_re", wr},
                  {"w_im", wi}});
  }
  return {{"fixed_point", std::vector<double>(s.x0.data(), s.x0.data() + s.x0.size())},
          {"eigen", ev},
          {"beta", s.beta},
          {"gap_ratio", s.gap_ratio},
          {"warnings", s.warnings}};
}

nlohmann::json to_json(const IntegratorConfig& cfg) {
  return {{"method", cfg.method == IntegratorMethod::RK4 ? "rk4" : "dopri5"},
          {"step", cfg.step},
          {"abs_tol", cfg.abs_tol},
          {"rel_tol", cfg.rel_tol},
          {"max_steps", cfg.max_steps},
          {"max_step", json_number(cfg.max_step)},
          {"blowup_norm", cfg.blowup_norm}};
}

IntegratorConfig integrator_from_json(const nlohmann::json& j, IntegratorConfig cfg) {
  for (const auto& [key, val] : j.items()) {
    if (key == "method") {
      std::string m = val.get<std::string>();
      if (m == "rk4") cfg.method = IntegratorMethod::RK4;
      else if (m == "dopri5") cfg.method = IntegratorMethod::DOPRI5;
      else throw Error(ErrorCode::InvalidArgument, "unknown integrator '" + m + "'");
    } else if (key == "step") {
      cfg.step = json_double(val);
    } else if (key == "abs_tol") {
      cfg.abs_tol = json_double(val);
    } else if (key == "rel_tol") {
      cfg.rel_tol = json_double(val);
    } else if (key == "max_steps") {
      cfg.max_steps = val.get<long>();
    } else if (key == "max_step") {
      cfg.max_step = json_double(val);
    } else if (key == "blowup_norm") {
      cfg.blowup_norm = json_double(val);
    } else {
      throw Error(ErrorCode::UnknownParameter, "unknown integrator key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

void write_sweep_csv(const fs::path& path, const SweepResult& sweep) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : sweep.points) rows.push_back({p.a, p.max1, p.max2});
  write_csv(path, {"a", "max1", "max2"}, rows);
}

void RunConfig::validate() const {
  if (method != "asym" && method != "pc" && method != "naive") parse_method(method);
  if (order < 1) throw Error(ErrorCode::OutOfRange, "expansion order must be at least 1", {{"order", order}});
  if (!(seed_radius > 0.0)) throw Error(ErrorCode::OutOfRange, "seed radius must be positive");
  if (!(T > 0.0) || !(dt > 0.0) || !(step > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "T, dt and step must be positive", {{"T", T}, {"dt", dt}, {"step", step}});
  }
  if (record_interval < 0.0) throw Error(ErrorCode::OutOfRange, "record interval must be non-negative");
  if (rays < 1) throw Error(ErrorCode::OutOfRange, "ray count must be positive");
  if (threads < 0) throw Error(ErrorCode::OutOfRange, "thread count must be non-negative");
  integrator.validate();
}

ModelPtr RunConfig::make_model() const {
  std::optional<Matrix> a;
  if (matrix) {
    const auto& rows = *matrix;
    const auto n = static_cast<Eigen::Index>(rows.size());
    a = Matrix(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "linear matrix must be square");
      }
      for (Eigen::Index j = 0; j < n; ++j) (*a)(i, j) = rows[i][j];
    }
  }
  return builtin(model, parameters, a);
}

TraceConfig RunConfig::trace_config() const {
  TraceConfig t;
  t.T = T;
  t.dt = dt;
  t.step = step;
  t.record_interval = record_interval;
  t.psi_cap = psi_cap;
  t.forward = integrator;
  return t;
}

ManifoldConfig RunConfig::manifold_config() const {
  ManifoldConfig m;
  m.rays = rays;
  m.seed_radius = seed_radius;
  m.trace = trace_config();
  m.threads = threads;
  return m;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"model", c.model},
                   {"parameters", c.parameters},
                   {"method", c.method},
                   {"order", c.order},
                   {"seed_radius", c.seed_radius},
                   {"psi_phase", c.psi_phase},
                   {"T", c.T},
                   {"dt", c.dt},
                   {"step", c.step},
                   {"record_interval", c.record_interval},
                   {"psi_cap", json_number(c.psi_cap)},
                   {"rays", c.rays},
                   {"threads", c.threads},
                   {"integrator", to_json(c.integrator)},
                   {"out_dir", c.out_dir}};
  j["beta"] = c.beta ? nlohmann::json(*c.beta) : nlohmann::json("auto");
  if (c.matrix) j["matrix"] = *c.matrix;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "configuration must be a JSON object");
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "model") c.model = val.get<std::string>();
      else if (key == "parameters") {
        for (const auto& [p, v] : val.items()) c.parameters[p] = v.get<double>();
      } else if (key == "matrix") c.matrix = val.get<std::vector<std::vector<double>>>();
      else if (key == "method") c.method = val.get<std::string>();
      else if (key == "order") c.order = val.get<int>();
      else if (key == "beta") {
        if (val.is_string() && val.get<std::string>() == "auto") c.beta.reset();
        else c.beta = val.get<int>();
      } else if (key == "seed_radius") c.seed_radius = json_double(val);
      else if (key == "psi_phase") c.psi_phase = json_double(val);
      else if (key == "T") c.T = json_double(val);
      else if (key == "dt") c.dt = json_double(val);
      else if (key == "step") c.step = json_double(val);
      else if (key == "record_interval") c.record_interval = json_double(val);
      else if (key == "psi_cap") c.psi_cap = json_double(val);
      else if (key == "rays") c.rays = val.get<int>();
      else if (key == "threads") c.threads = val.get<int>();
      else if (key == "integrator") c.integrator = integrator_from_json(val, c.integrator);
      else if (key == "out_dir") c.out_dir = val.get<std::string>();
      else throw Error(ErrorCode::UnknownParameter, "unknown configuration key '" + key + "'", {{"key", key}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("configuration has a value of the wrong type: ") + e.what());
  }
  return c;
}

nlohmann::json make_manifest(const std::string& command, const RunConfig& cfg, const nlohmann::json& extra,
                             const std::vector<std::string>& outputs) {
  nlohmann::json resolved;
  try {
    resolved = cfg.make_model()->parameters();
  } catch (const Error&) {
    resolved = nullptr;
  }
  return {{"tool", "isoman"},
          {"command", command},
          {"config", to_json(cfg)},
          {"model_parameters", resolved},
          {"settings", extra},
          {"outputs", outputs}};
}

}  // namespace isoman
