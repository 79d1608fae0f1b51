#include "isoman/error.hpp"
#include "isoman/expansion.hpp"
#include "isoman/io.hpp"
#include "isoman/manifold.hpp"
#include "isoman/models.hpp"
#include "isoman/plot.hpp"
#include "isoman/rom.hpp"
#include "isoman/spectrum.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>

using namespace isoman;
namespace fs = std::filesystem;

namespace {

// Raw flag storage shared by all subcommands; only the parsed one sets counts.
struct Flags {
  std::string config_file;
  std::string model, method, out_dir, integrator;
  std::vector<std::string> params;
  int order = 0, beta = 0, rays = 0, threads = 0, steps = 0;
  double seed_radius = 0, psi_phase = 0, T = 0, dt = 0, step = 0, record_interval = 0, psi_cap = 0, tol = 0;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;
  std::vector<CLI::Option*> steps_opts;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "JSON configuration file (flags override its values)");
  auto set = [&](CLI::Option* o, std::function<void(RunConfig&)> fn) { f.setters.emplace_back(o, std::move(fn)); };
  set(cmd->add_option("--model", f.model, "planar|goodwin|pendulum|coupled|linear"),
      [&f](RunConfig& c) { c.model = f.model; });
  set(cmd->add_option("--param", f.params, "parameter override name=value (repeatable)"), [&f](RunConfig& c) {
    for (const auto& p : f.params) {
      auto eq = p.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "expected name=value, got '" + p + "'");
      char* end = nullptr;
      std::string val = p.substr(eq + 1);
      double v = std::strtod(val.c_str(), &end);
      if (end == val.c_str() || *end != '\0') throw Error(ErrorCode::InvalidArgument, "bad parameter value '" + p + "'");
      c.parameters[p.substr(0, eq)] = v;
    }
  });
  set(cmd->add_option("--method", f.method, "asym|pc|naive"), [&f](RunConfig& c) { c.method = f.method; });
  set(cmd->add_option("--order", f.order, "expansion order"), [&f](RunConfig& c) { c.order = f.order; });
  set(cmd->add_option("--beta", f.beta, "slow manifold dimension"), [&f](RunConfig& c) { c.beta = f.beta; });
  set(cmd->add_option("--seed-radius", f.seed_radius, "seed |psi_1|"),
      [&f](RunConfig& c) { c.seed_radius = f.seed_radius; });
  set(cmd->add_option("--psi-phase", f.psi_phase, "seed phase of a single ray (radians)"),
      [&f](RunConfig& c) { c.psi_phase = f.psi_phase; });
  set(cmd->add_option("--T", f.T, "backward time span"), [&f](RunConfig& c) { c.T = f.T; });
  set(cmd->add_option("--dt", f.dt, "correction interval"), [&f](RunConfig& c) { c.dt = f.dt; });
  set(cmd->add_option("--step", f.step, "RK4 step of the backward flow"), [&f](RunConfig& c) { c.step = f.step; });
  set(cmd->add_option("--record-interval", f.record_interval, "sample spacing of written rays"),
      [&f](RunConfig& c) { c.record_interval = f.record_interval; });
  set(cmd->add_option("--psi-cap", f.psi_cap, "stop when |psi_1| exceeds this"),
      [&f](RunConfig& c) { c.psi_cap = f.psi_cap; });
  set(cmd->add_option("--rays", f.rays, "ray count of a manifold family"), [&f](RunConfig& c) { c.rays = f.rays; });
  set(cmd->add_option("--threads", f.threads, "worker threads (0: all cores)"),
      [&f](RunConfig& c) { c.threads = f.threads; });
  set(cmd->add_option("--integrator", f.integrator, "rk4|dopri5"), [&f](RunConfig& c) {
    c.integrator = integrator_from_json(nlohmann::json{{"method", f.integrator}}, c.integrator);
  });
  set(cmd->add_option("--out", f.out_dir, "output directory"), [&f](RunConfig& c) { c.out_dir = f.out_dir; });
  f.steps_opts.push_back(cmd->add_option("--steps", f.steps, "number of correction intervals (sets T = steps * dt)"));
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (const char* env = std::getenv("ISOMAN_OUT_DIR")) c.out_dir = env;
  if (!f.config_file.empty()) c = run_config_from_json(read_json(f.config_file), c);
  for (const auto& [opt, fn] : f.setters) {
    if (opt->count() > 0) fn(c);
  }
  for (auto* o : f.steps_opts) {
    if (o->count() > 0) {
      if (f.steps < 1) throw Error(ErrorCode::OutOfRange, "--steps must be positive");
      c.T = f.steps * c.dt;
    }
  }
  c.validate();
  return c;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str()) throw Error(ErrorCode::InvalidArgument, "bad number '" + item + "' in list");
    out.push_back(v);
  }
  return out;
}

Vector channel_for(const Model& model, const std::string& spec) {
  if (spec.empty()) return model.default_channel();
  auto vals = parse_list(spec);
  if (static_cast<int>(vals.size()) != model.dimension()) {
    throw Error(ErrorCode::InvalidArgument, "channel length does not match the model dimension",
                {{"given", vals.size()}, {"dimension", model.dimension()}});
  }
  return Eigen::Map<Vector>(vals.data(), vals.size());
}

CVector seed_psi(const Spectrum& s, const RunConfig& c) {
  CVector psi = CVector::Zero(s.beta);
  psi(0) = s.partner[0] == 0 ? Complex(c.seed_radius * std::cos(c.psi_phase) >= 0 ? c.seed_radius : -c.seed_radius, 0)
                             : std::polar(c.seed_radius, c.psi_phase);
  return psi;
}

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;
  fs::path add(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
};

void finish(Outputs& out, const std::string& command, const RunConfig& c, const nlohmann::json& extra) {
  out.files.push_back("manifest.json");
  write_json(out.dir / "manifest.json", make_manifest(command, c, extra, out.files));
}

ManifoldTrajectory run_trace(const Model& model, const Spectrum& s, TraceMethod m, const RunConfig& c,
                             const CVector& psi, std::optional<ExpansionTensors>& exp) {
  TraceConfig tc = c.trace_config();
  switch (m) {
    case TraceMethod::Asym:
      if (!exp) exp = solve_expansion(model, s, c.order);
      return trace_asym(model, s, *exp, psi, tc);
    case TraceMethod::PC: return trace_pc(model, s, psi, tc);
    case TraceMethod::Naive: return trace_naive(model, s, psi, tc);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow manifolds and isostable reduced-order models"};
  app.require_subcommand(1);
  Flags f;

  auto* spectrum_cmd = app.add_subcommand("spectrum", "fixed point, eigenvalues and slow/fast split");
  auto* trace_cmd = app.add_subcommand("trace", "one backward trajectory along the slow manifold");
  auto* manifold_cmd = app.add_subcommand("manifold", "family of rays covering the slow manifold");
  auto* rom_build_cmd = app.add_subcommand("rom-build", "reduced-order model from a traced manifold");
  auto* rom_sim_cmd = app.add_subcommand("rom-sim", "simulate a reduced-order model under forcing");
  auto* sweep_cmd = app.add_subcommand("sweep-pd", "period-doubling sweep over forcing amplitude");
  auto* compare_cmd = app.add_subcommand("compare", "tube-exit comparison of a method against pc");
  auto* plot_cmd = app.add_subcommand("plot", "SVG from CSV columns");
  for (auto* cmd : {spectrum_cmd, trace_cmd, manifold_cmd, rom_build_cmd, rom_sim_cmd, sweep_cmd, compare_cmd}) {
    add_common(cmd, f);
  }

  std::string levels = "";
  manifold_cmd->add_option("--levels", levels, "comma-separated |psi_1| values for level sets");

  std::string channel;
  double rom_step = 0.25;
  for (auto* cmd : {rom_build_cmd, rom_sim_cmd, sweep_cmd}) cmd->add_option("--channel", channel, "input row, e.g. 1,0,0");
  rom_build_cmd->add_option("--rom-step", rom_step, "table spacing in backward time");

  std::string rom_file, signal_kind = "sine", system_kind = "full";
  double amp = 0.01, period = 24.0, c0 = 27.0, c1 = 0.15, psi0_re = 0.0, psi0_im = 0.0, sample_dt = 0.05, duration = 0.0;
  bool with_compare = false;
  int output_index = 0;
  for (auto* cmd : {rom_sim_cmd, sweep_cmd}) cmd->add_option("--rom", rom_file, "reduced model JSON");
  rom_sim_cmd->add_option("--signal", signal_kind, "zero|constant|sine|chirp");
  rom_sim_cmd->add_option("--a", amp, "forcing amplitude");
  for (auto* cmd : {rom_sim_cmd, sweep_cmd}) cmd->add_option("--period", period, "sine period");
  rom_sim_cmd->add_option("--c0", c0, "chirp: omega = 2 pi / (c0 - c1 t)");
  rom_sim_cmd->add_option("--c1", c1, "chirp slope");
  rom_sim_cmd->add_option("--psi0-re", psi0_re, "initial psi_1 (real part)");
  rom_sim_cmd->add_option("--psi0-im", psi0_im, "initial psi_1 (imaginary part)");
  rom_sim_cmd->add_option("--sample-dt", sample_dt, "output spacing");
  rom_sim_cmd->add_option("--duration", duration, "simulation length (default: T)");
  rom_sim_cmd->add_flag("--compare", with_compare, "also run the full and linearized models");
  for (auto* cmd : {rom_sim_cmd, sweep_cmd}) cmd->add_option("--output-index", output_index, "observed state component");

  double a_min = 0.01, a_max = 0.03, a_step = 0.001, gap = 1e-2;
  int settle = 20;
  sweep_cmd->add_option("--system", system_kind, "full|rom|linear");
  sweep_cmd->add_option("--a-min", a_min, "smallest forcing amplitude");
  sweep_cmd->add_option("--a-max", a_max, "largest forcing amplitude");
  sweep_cmd->add_option("--a-step", a_step, "amplitude spacing");
  sweep_cmd->add_option("--settle", settle, "settle periods");
  sweep_cmd->add_option("--gap", gap, "relative split of the two maxima counted as period doubling");

  double tube_tol = 1e-3;
  compare_cmd->add_option("--tol", tube_tol, "relative tube width");

  std::vector<std::string> series_specs;
  std::string group, svg_out = "plot.svg", title, xlabel, ylabel;
  plot_cmd->add_option("--series", series_specs, "FILE,XCOL,YCOL[,LABEL] (repeatable)");
  plot_cmd->add_option("--group", group, "split each series into polylines by this column");
  plot_cmd->add_option("--out", svg_out, "SVG output path");
  plot_cmd->add_option("--title", title);
  plot_cmd->add_option("--xlabel", xlabel);
  plot_cmd->add_option("--ylabel", ylabel);

  auto fail = [](ErrorCode code, const std::string& msg, const nlohmann::json& details) {
    nlohmann::json j{{"error", std::string(to_string(code))}, {"message", msg}, {"details", details}};
    std::cerr << j.dump() << '\n';
    return is_validation_error(code) ? 2 : 3;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCode::InvalidArgument, e.what(), nlohmann::json::object());
  }

  try {
    if (plot_cmd->parsed()) {
      std::vector<CsvSeriesRequest> reqs;
      for (const auto& spec : series_specs) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        std::string p;
        while (std::getline(ss, p, ',')) parts.push_back(p);
        if (parts.size() < 3) throw Error(ErrorCode::InvalidArgument, "series must be FILE,XCOL,YCOL[,LABEL]");
        CsvSeriesRequest r{parts[0], parts[1], parts[2], parts.size() > 3 ? parts[3] : "", std::nullopt};
        if (!group.empty()) r.group = group;
        reqs.push_back(r);
      }
      auto series = series_from_csv(reqs);
      PlotSpec ps;
      ps.title = title;
      ps.xlabel = xlabel.empty() ? reqs.front().x : xlabel;
      ps.ylabel = ylabel.empty() ? reqs.front().y : ylabel;
      write_svg(svg_out, render_svg(ps, series));
      std::cout << nlohmann::json{{"svg", svg_out}, {"series", series.size()}}.dump() << '\n';
      return 0;
    }

    RunConfig cfg = resolve(f);
    Outputs out{cfg.out_dir, {}};
    fs::create_directories(out.dir);

    if (rom_sim_cmd->parsed()) {
      if (rom_file.empty()) throw Error(ErrorCode::InvalidArgument, "--rom is required");
      auto rom = std::make_shared<ReducedModel>(rom_from_json(read_json(rom_file)));
      InputSignal sig;
      if (signal_kind == "zero") sig = InputSignal::zero();
      else if (signal_kind == "constant") sig = InputSignal::constant(amp);
      else if (signal_kind == "sine") sig = InputSignal::sine(amp, period);
      else if (signal_kind == "chirp") sig = InputSignal::chirp(amp, c0, c1);
      else throw Error(ErrorCode::InvalidArgument, "unknown signal '" + signal_kind + "'");
      double span = duration > 0.0 ? duration : cfg.T;
      nlohmann::json extra{{"rom", rom_file},  {"signal", signal_kind}, {"a", amp},         {"period", period},
                           {"c0", c0},         {"c1", c1},            {"duration", span},  {"sample_dt", sample_dt},
                           {"psi0", {psi0_re, psi0_im}}};
      if (!with_compare) {
        RomSimConfig rc;
        rc.sample_dt = sample_dt;
        RomRun run = simulate_rom(*rom, sig, Complex(psi0_re, psi0_im), span, rc);
        std::vector<std::string> header{"t", "psi1_re", "psi1_im"};
        for (Eigen::Index i = 0; i < rom->x0.size(); ++i) header.push_back("x_" + std::to_string(i + 1));
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < run.times.size(); ++i) {
          std::vector<double> r{run.times[i], run.psi[i].real(), run.psi[i].imag()};
          for (Eigen::Index k = 0; k < run.outputs[i].size(); ++k) r.push_back(run.outputs[i](k));
          rows.push_back(r);
        }
        write_csv(out.add("rom_sim.csv"), header, rows);
        finish(out, "rom-sim", cfg, extra);
        return 0;
      }
      ModelPtr model = cfg.make_model();
      Spectrum s = analyze(*model, std::nullopt, cfg.beta);
      Vector b = rom->channel;
      FullSystem full(model, s.x0, b, cfg.integrator);
      LinearSystem lin(s, b, cfg.integrator);
      RomSystem rs(rom, cfg.integrator);
      ChirpComparison cmp = compare_forced(full, rs, lin, sig, span, sample_dt, output_index);
      std::vector<std::string> header{"t", "omega"};
      const int n = static_cast<int>(s.x0.size());
      for (const char* tag : {"full", "rom", "linear"}) {
        for (int i = 1; i <= n; ++i) header.push_back(std::string(tag) + "_x_" + std::to_string(i));
      }
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < cmp.times.size(); ++i) {
        std::vector<double> r{cmp.times[i], cmp.omega[i]};
        for (const auto* xs : {&cmp.full, &cmp.rom, &cmp.linear}) {
          for (int k = 0; k < n; ++k) r.push_back((*xs)[i](k));
        }
        rows.push_back(r);
      }
      write_csv(out.add("forced_compare.csv"), header, rows);
      nlohmann::json report{{"rom_error", cmp.rom_error},
                            {"linear_error", cmp.linear_error},
                            {"full_peak_omega", cmp.full_peak_omega},
                            {"rom_peak_omega", cmp.rom_peak_omega},
                            {"linear_peak_omega", cmp.linear_peak_omega},
                            {"full_peak_amplitude", cmp.full_peak_amplitude},
                            {"rom_peak_amplitude", cmp.rom_peak_amplitude},
                            {"linear_peak_amplitude", cmp.linear_peak_amplitude}};
      write_json(out.add("forced_compare.json"), report);
      std::cout << report.dump(2) << '\n';
      finish(out, "rom-sim", cfg, extra);
      return 0;
    }

    ModelPtr model = cfg.make_model();
    Spectrum s = analyze(*model, std::nullopt, cfg.beta);

    if (spectrum_cmd->parsed()) {
      nlohmann::json j = to_json(s);
      write_json(out.add("spectrum.json"), j);
      std::cout << j.dump(2) << '\n';
      finish(out, "spectrum", cfg, nlohmann::json::object());
      return 0;
    }

    std::optional<ExpansionTensors> exp;
    if (trace_cmd->parsed()) {
      TraceMethod m = parse_method(cfg.method);
      ManifoldTrajectory ray = run_trace(*model, s, m, cfg, seed_psi(s, cfg), exp);
      write_ray_csv(out.add("ray.csv"), ray);
      nlohmann::json summary = trace_summary(ray);
      write_json(out.add("summary.json"), summary);
      if (exp) write_json(out.add("expansion.json"), to_json(*exp));
      std::cout << summary.dump(2) << '\n';
      finish(out, "trace", cfg, {{"beta", s.beta}});
      ray.require_ok();
      return 0;
    }

    if (manifold_cmd->parsed() || rom_build_cmd->parsed()) {
      TraceMethod m = parse_method(cfg.method);
      if (m == TraceMethod::Asym) exp = solve_expansion(*model, s, cfg.order);
      SlowManifold man = build_manifold(*model, s, m, cfg.manifold_config(), exp ? &*exp : nullptr);
      nlohmann::json rays = nlohmann::json::array();
      for (const auto& r : man.rays) rays.push_back(trace_summary(r));
      nlohmann::json summary{{"beta", man.beta}, {"rays", rays}, {"failed", man.failed}, {"truncated", man.truncated}};
      if (manifold_cmd->parsed()) {
        std::vector<std::string> header{"ray"};
        auto rh = ray_header(s.dimension());
        header.insert(header.end(), rh.begin(), rh.end());
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < man.rays.size(); ++k) {
          for (auto& r : ray_rows(man.rays[k])) {
            r.insert(r.begin(), static_cast<double>(k));
            rows.push_back(std::move(r));
          }
        }
        write_csv(out.add("manifold.csv"), header, rows);
        std::vector<double> radii = levels.empty() ? std::vector<double>{} : parse_list(levels);
        if (levels.empty()) {
          for (double r = 2.0 * cfg.seed_radius; r < 1e6; r *= 2.0) {
            if (man.level_set(s, r).empty()) break;
            radii.push_back(r);
          }
        }
        std::vector<std::string> lh{"level", "radius"};
        for (int i = 1; i <= s.dimension(); ++i) lh.push_back("x_" + std::to_string(i));
        std::vector<std::vector<double>> lrows;
        for (std::size_t li = 0; li < radii.size(); ++li) {
          auto pts = man.level_set(s, radii[li]);
          if (!pts.empty()) pts.push_back(pts.front());
          for (const auto& p : pts) {
            std::vector<double> r{static_cast<double>(li), radii[li]};
            for (Eigen::Index i = 0; i < p.size(); ++i) r.push_back(p(i));
            lrows.push_back(r);
          }
        }
        write_csv(out.add("level_sets.csv"), lh, lrows);
        write_json(out.add("summary.json"), summary);
        finish(out, "manifold", cfg, {{"beta", s.beta}, {"levels", radii}});
      } else {
        RomOptions ro;
        ro.t_step = rom_step;
        ReducedModel rom = build_rom(man, s, channel_for(*model, channel), ro);
        write_json(out.add("rom.json"), to_json(rom));
        write_json(out.add("summary.json"), summary);
        finish(out, "rom-build", cfg,
               {{"beta", s.beta}, {"rom_step", rom_step}, {"coverage", ro.coverage},
                {"domain_radius", rom.domain_radius}});
        std::cout << nlohmann::json{{"domain_radius", rom.domain_radius}, {"failed_rays", man.failed.size()}}.dump()
                  << '\n';
      }
      return 0;
    }

    if (sweep_cmd->parsed()) {
      Vector b = channel_for(*model, channel);
      std::unique_ptr<ForcedSystem> sys;
      if (system_kind == "full") {
        sys = std::make_unique<FullSystem>(model, s.x0, b, cfg.integrator);
      } else if (system_kind == "linear") {
        sys = std::make_unique<LinearSystem>(s, b, cfg.integrator);
      } else if (system_kind == "rom") {
        if (rom_file.empty()) throw Error(ErrorCode::InvalidArgument, "--rom is required for --system rom");
        sys = std::make_unique<RomSystem>(std::make_shared<ReducedModel>(rom_from_json(read_json(rom_file))),
                                          cfg.integrator);
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown system '" + system_kind + "'");
      }
      if (!(a_step > 0.0) || a_max < a_min) throw Error(ErrorCode::OutOfRange, "bad amplitude grid");
      std::vector<double> grid;
      int count = static_cast<int>(std::floor((a_max - a_min) / a_step + 1e-9));
      for (int i = 0; i <= count; ++i) grid.push_back(a_min + i * a_step);
      SweepOptions so;
      so.period = period;
      so.gap_threshold = gap;
      so.maxima.settle_periods = settle;
      so.maxima.output = output_index;
      so.threads = cfg.threads;
      SweepResult res = sweep_period_doubling(*sys, grid, so);
      write_sweep_csv(out.add("sweep_" + system_kind + ".csv"), res);
      nlohmann::json report{{"system", system_kind}, {"found", res.found},
                            {"a_crit", res.found ? nlohmann::json(res.a_crit) : nlohmann::json(nullptr)},
                            {"gap_threshold", gap}};
      write_json(out.add("sweep_" + system_kind + ".json"), report);
      std::cout << report.dump(2) << '\n';
      finish(out, "sweep-pd", cfg,
             {{"system", system_kind}, {"period", period}, {"settle_periods", settle}, {"gap_threshold", gap},
              {"settle_tol", so.maxima.settle_tol}, {"samples_per_period", so.maxima.samples_per_period},
              {"a_grid", grid}, {"output_index", output_index}});
      return 0;
    }

    if (compare_cmd->parsed()) {
      TraceMethod m = parse_method(cfg.method);
      CVector psi = seed_psi(s, cfg);
      ManifoldTrajectory tested = run_trace(*model, s, m, cfg, psi, exp);
      ManifoldTrajectory reference = trace_pc(*model, s, psi, cfg.trace_config());
      write_ray_csv(out.add("tested.csv"), tested);
      write_ray_csv(out.add("reference.csv"), reference);
      double exit_time = tube_exit_time(s, tested, reference, tube_tol);
      double fast_time = 1.0 / std::abs(s.lambda(s.beta).real());
      nlohmann::json report{{"method", to_string(m)},
                            {"reference", "pc"},
                            {"tube_tolerance", tube_tol},
                            {"exit_time", std::isfinite(exit_time) ? nlohmann::json(exit_time) : nlohmann::json(nullptr)},
                            {"fast_time_constant", fast_time},
                            {"exit_in_fast_time_constants",
                             std::isfinite(exit_time) ? nlohmann::json(exit_time / fast_time) : nlohmann::json(nullptr)},
                            {"tested", trace_summary(tested)},
                            {"reference_summary", trace_summary(reference)}};
      write_json(out.add("compare.json"), report);
      std::cout << report.dump(2) << '\n';
      finish(out, "compare", cfg, {{"tube_tolerance", tube_tol}});
      return 0;
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what(), e.details());
  } catch (const std::exception& e) {
    return fail(ErrorCode::NonFinite, e.what(), nlohmann::json::object());
  }
  return 0;
}
