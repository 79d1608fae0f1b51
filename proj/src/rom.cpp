#include "isoman/rom.hpp"

#include "isoman/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace isoman {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::array<double, 4> catmull_rom(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t),
          0.5 * (t3 - t2)};
}

template <class T, class Get>
T cubic_along(const Get& get, int n, double tau) {
  int i = std::clamp(static_cast<int>(std::floor(tau)), 0, std::max(n - 2, 0));
  double frac = std::clamp(tau - i, 0.0, 1.0);
  auto w = catmull_rom(frac);
  T acc = w[0] * get(std::clamp(i - 1, 0, n - 1));
  for (int m = 1; m < 4; ++m) acc = acc + w[m] * get(std::clamp(i - 1 + m, 0, n - 1));
  return acc;
}

struct Locate {
  bool linear = false;
  double tau = 0.0;   // fractional column
  double u = 0.0;     // fractional ray index (beta = 2)
  int ray = 0;        // beta = 1
};

Locate locate(const ReducedModel& rom, Complex psi) {
  Locate loc;
  double r = std::abs(psi);
  if (r <= rom.seed_radius) {
    loc.linear = true;
    return loc;
  }
  if (r > rom.domain_radius * (1.0 + 1e-12)) {
    throw Error(ErrorCode::DomainExit, "isostable coordinate left the tabulated domain",
                {{"abs_psi", r}, {"domain_radius", rom.domain_radius}});
  }
  const double rate = -rom.lambda.real();
  const double t_back = std::log(r / rom.seed_radius) / rate;
  loc.tau = t_back / rom.t_step;
  if (rom.beta == 1) {
    loc.ray = psi.real() >= 0.0 ? 0 : 1;
  } else {
    double theta = std::arg(psi) + rom.lambda.imag() * t_back - rom.seed_phase.front();
    double u = theta * rom.rays / kTwoPi;
    u = std::fmod(u, static_cast<double>(rom.rays));
    if (u < 0.0) u += rom.rays;
    loc.u = u;
  }
  return loc;
}

template <class T, class Table>
T interpolate(const ReducedModel& rom, const Table& table, const Locate& loc) {
  const int n = rom.columns();
  if (rom.beta == 1) {
    return cubic_along<T>([&](int c) { return table[loc.ray][c]; }, n, loc.tau);
  }
  const int k = rom.rays;
  int i = static_cast<int>(std::floor(loc.u));
  double frac = loc.u - i;
  auto w = catmull_rom(frac);
  T acc{};
  for (int m = 0; m < 4; ++m) {
    int ray = ((i - 1 + m) % k + k) % k;
    T val = cubic_along<T>([&](int c) { return table[ray][c]; }, n, loc.tau);
    acc = (m == 0) ? T(w[0] * val) : T(acc + w[m] * val);
  }
  return acc;
}

}  // namespace

Complex ReducedModel::gain_at(Complex psi) const {
  Locate loc = locate(*this, psi);
  if (loc.linear) return gain0;
  Complex g = interpolate<Complex>(*this, gain, loc);
  return beta == 1 ? Complex(g.real(), 0.0) : g;
}

Vector ReducedModel::output_at(Complex psi) const {
  Locate loc = locate(*this, psi);
  if (loc.linear) {
    if (beta == 1) return x0 + psi.real() * v1.real();
    return x0 + 2.0 * (psi * v1).real();
  }
  return interpolate<Vector>(*this, output, loc);
}

ReducedModel build_rom(const SlowManifold& manifold, const Spectrum& s, const Vector& channel, const RomOptions& opt) {
  if (manifold.beta != 1 && manifold.beta != 2) {
    throw Error(ErrorCode::OutOfRange, "reduced models need a one- or two-dimensional manifold");
  }
  if (channel.size() != s.dimension()) {
    throw Error(ErrorCode::InvalidArgument, "input channel length does not match the model dimension",
                {{"channel", channel.size()}, {"dimension", s.dimension()}});
  }
  if (!(opt.t_step > 0.0)) throw Error(ErrorCode::OutOfRange, "table spacing must be positive");
  const int k = static_cast<int>(manifold.rays.size());
  if (k < (manifold.beta == 1 ? 2 : 4)) throw Error(ErrorCode::InsufficientCoverage, "too few rays for a table");

  ReducedModel rom;
  rom.beta = manifold.beta;
  rom.lambda = s.lambda(0);
  rom.x0 = s.x0;
  rom.channel = channel;
  rom.v1 = s.v.col(0);
  rom.gain0 = (channel.transpose().cast<Complex>() * s.w.col(0))(0);
  rom.seed_radius = manifold.seed_radius;
  rom.t_step = opt.t_step;
  rom.rays = k;
  rom.seed_phase = manifold.seed_phase;

  std::vector<double> durations;
  for (const auto& ray : manifold.rays) {
    bool usable = ray.usable() && !ray.samples.empty() && !ray.samples.front().I.empty();
    durations.push_back(usable ? ray.duration() : -1.0);
  }
  std::vector<double> sorted = durations;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const int need = std::max(1, static_cast<int>(std::ceil(opt.coverage * k - 1e-9)));
  const double t_dom = sorted[need - 1];
  const int nt = t_dom > 0.0 ? static_cast<int>(std::floor(t_dom / opt.t_step + 1e-9)) + 1 : 0;
  if (nt < 4) {
    throw Error(ErrorCode::InsufficientCoverage, "rays do not cover enough of the manifold for a table",
                {{"covered_time", t_dom}, {"coverage", opt.coverage}});
  }
  rom.domain_radius = rom.seed_radius * std::exp(-rom.lambda.real() * (nt - 1) * opt.t_step);

  rom.gain.assign(k, std::vector<Complex>(nt));
  rom.output.assign(k, std::vector<Vector>(nt));
  std::vector<std::vector<char>> have(k, std::vector<char>(nt, 0));
  for (int r = 0; r < k; ++r) {
    if (durations[r] < 0.0) continue;
    const auto& smp = manifold.rays[r].samples;
    std::size_t pos = 0;
    for (int c = 0; c < nt; ++c) {
      double t = c * opt.t_step;
      if (t > durations[r] + 1e-9) break;
      while (pos + 1 < smp.size() && smp[pos + 1].t_back < t) ++pos;
      const TraceSample& lo = smp[pos];
      const TraceSample& hi = smp[std::min(pos + 1, smp.size() - 1)];
      double span = hi.t_back - lo.t_back;
      double w = span > 0.0 ? std::clamp((t - lo.t_back) / span, 0.0, 1.0) : 0.0;
      Vector x = (1.0 - w) * lo.x + w * hi.x;
      CVector i1 = (1.0 - w) * lo.I[0] + w * hi.I[0];
      rom.output[r][c] = x;
      rom.gain[r][c] = (channel.transpose().cast<Complex>() * i1)(0);
      have[r][c] = 1;
    }
  }
  // fill missing rays from periodic neighbours along the phase direction
  for (int c = 0; c < nt; ++c) {
    std::vector<int> avail;
    for (int r = 0; r < k; ++r) {
      if (have[r][c]) avail.push_back(r);
    }
    if (avail.size() == static_cast<std::size_t>(k)) continue;
    if (rom.beta == 1 || avail.empty()) {
      throw Error(ErrorCode::InsufficientCoverage, "table column lacks data", {{"t_back", c * opt.t_step}});
    }
    for (int r = 0; r < k; ++r) {
      if (have[r][c]) continue;
      auto nxt = std::upper_bound(avail.begin(), avail.end(), r);
      int b = nxt == avail.end() ? avail.front() + k : *nxt;
      int a = nxt == avail.begin() ? avail.back() - k : *(nxt - 1);
      double w = static_cast<double>(r - a) / (b - a);
      int ia = (a % k + k) % k, ib = b % k;
      rom.output[r][c] = (1.0 - w) * rom.output[ia][c] + w * rom.output[ib][c];
      rom.gain[r][c] = (1.0 - w) * rom.gain[ia][c] + w * rom.gain[ib][c];
    }
  }
  return rom;
}

nlohmann::json to_json(const ReducedModel& rom) {
  nlohmann::json j;
  j["beta"] = rom.beta;
  j["lambda"] = {rom.lambda.real(), rom.lambda.imag()};
  j["x0"] = std::vector<double>(rom.x0.data(), rom.x0.data() + rom.x0.size());
  j["channel"] = std::vector<double>(rom.channel.data(), rom.channel.data() + rom.channel.size());
  std::vector<double> vr, vi;
  for (Eigen::Index i = 0; i < rom.v1.size(); ++i) {
    vr.push_back(rom.v1(i).real());
    vi.push_back(rom.v1(i).imag());
  }
  j["v1_re"] = vr;
  j["v1_im"] = vi;
  j["gain0"] = {rom.gain0.real(), rom.gain0.imag()};
  j["seed_radius"] = rom.seed_radius;
  j["domain_radius"] = rom.domain_radius;
  j["t_step"] = rom.t_step;
  j["rays"] = rom.rays;
  j["seed_phase"] = rom.seed_phase;
  nlohmann::json gain = nlohmann::json::array(), out = nlohmann::json::array();
  for (int r = 0; r < rom.rays; ++r) {
    std::vector<double> re, im;
    nlohmann::json rows = nlohmann::json::array();
    for (int c = 0; c < rom.columns(); ++c) {
      re.push_back(rom.gain[r][c].real());
      im.push_back(rom.gain[r][c].imag());
      const Vector& x = rom.output[r][c];
      rows.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    }
    gain.push_back({{"re", re}, {"im", im}});
    out.push_back(rows);
  }
  j["gain"] = gain;
  j["output"] = out;
  return j;
}

ReducedModel rom_from_json(const nlohmann::json& j) {
  try {
    ReducedModel rom;
    rom.beta = j.at("beta").get<int>();
    rom.lambda = Complex(j.at("lambda")[0].get<double>(), j.at("lambda")[1].get<double>());
    auto to_vec = [](const std::vector<double>& v) { return Vector(Eigen::Map<const Vector>(v.data(), v.size())); };
    rom.x0 = to_vec(j.at("x0").get<std::vector<double>>());
    rom.channel = to_vec(j.at("channel").get<std::vector<double>>());
    Vector vr = to_vec(j.at("v1_re").get<std::vector<double>>());
    Vector vi = to_vec(j.at("v1_im").get<std::vector<double>>());
    rom.v1 = vr.cast<Complex>() + Complex(0.0, 1.0) * vi.cast<Complex>();
    rom.gain0 = Complex(j.at("gain0")[0].get<double>(), j.at("gain0")[1].get<double>());
    rom.seed_radius = j.at("seed_radius").get<double>();
    rom.domain_radius = j.at("domain_radius").get<double>();
    rom.t_step = j.at("t_step").get<double>();
    rom.rays = j.at("rays").get<int>();
    rom.seed_phase = j.at("seed_phase").get<std::vector<double>>();
    const auto& gain = j.at("gain");
    const auto& out = j.at("output");
    if (static_cast<int>(gain.size()) != rom.rays || static_cast<int>(out.size()) != rom.rays) {
      throw Error(ErrorCode::InvalidArgument, "table size does not match the ray count");
    }
    for (int r = 0; r < rom.rays; ++r) {
      auto re = gain[r].at("re").get<std::vector<double>>();
      auto im = gain[r].at("im").get<std::vector<double>>();
      std::vector<Complex> g;
      for (std::size_t c = 0; c < re.size(); ++c) g.emplace_back(re[c], im.at(c));
      rom.gain.push_back(g);
      std::vector<Vector> xs;
      for (const auto& row : out[r]) xs.push_back(to_vec(row.get<std::vector<double>>()));
      if (xs.size() != g.size()) throw Error(ErrorCode::InvalidArgument, "gain and output tables differ in length");
      rom.output.push_back(xs);
    }
    return rom;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed reduced model: ") + e.what());
  }
}

RomRun simulate_rom(const ReducedModel& rom, const InputSignal& signal, Complex psi0, double T,
                    const RomSimConfig& cfg) {
  signal.validate(0.0, T);
  if (!(T > 0.0)) throw Error(ErrorCode::OutOfRange, "simulation span must be positive");
  if (rom.beta == 1) psi0 = Complex(psi0.real(), 0.0);
  auto f = [&](double t, const Vector& y) -> Vector {
    Complex psi(y(0), y(1));
    Complex d = rom.lambda * psi;
    double u = signal(t);
    if (u != 0.0) d += rom.gain_at(psi) * u;
    Vector out(2);
    out << d.real(), d.imag();
    return out;
  };
  Vector y0(2);
  y0 << psi0.real(), psi0.imag();
  std::vector<double> grid = uniform_grid(0.0, T, cfg.sample_dt);
  Sampled<Vector> run = integrate(f, y0, grid, cfg.integrator);
  RomRun out;
  out.times = run.times;
  for (const auto& y : run.states) {
    Complex psi(y(0), y(1));
    out.psi.push_back(psi);
    out.outputs.push_back(rom.output_at(psi));
  }
  return out;
}

FullSystem::FullSystem(ModelPtr model, Vector x0, Vector channel, IntegratorConfig cfg)
    : model_(std::move(model)), x0_(std::move(x0)), channel_(std::move(channel)), cfg_(cfg) {
  if (channel_.size() != model_->dimension()) {
    throw Error(ErrorCode::InvalidArgument, "input channel length does not match the model dimension");
  }
}

Sampled<Vector> FullSystem::respond(const InputSignal& signal, const std::vector<double>& grid) const {
  signal.validate(grid.front(), grid.back());
  ForcedModel fm(model_, channel_, signal);
  return integrate([&](double t, const Vector& x) { return fm.rhs(t, x); }, x0_, grid, cfg_);
}

LinearSystem::LinearSystem(const Spectrum& s, Vector channel, IntegratorConfig cfg)
    : j_(s.jacobian), x0_(s.x0), channel_(std::move(channel)), cfg_(cfg) {
  if (channel_.size() != x0_.size()) {
    throw Error(ErrorCode::InvalidArgument, "input channel length does not match the model dimension");
  }
}

Sampled<Vector> LinearSystem::respond(const InputSignal& signal, const std::vector<double>& grid) const {
  signal.validate(grid.front(), grid.back());
  auto f = [&](double t, const Vector& x) -> Vector {
    Vector d = j_ * (x - x0_);
    double u = signal(t);
    if (u != 0.0) d += u * channel_;
    return d;
  };
  return integrate(f, x0_, grid, cfg_);
}

RomSystem::RomSystem(std::shared_ptr<const ReducedModel> rom, IntegratorConfig cfg) : rom_(std::move(rom)), cfg_(cfg) {}

Sampled<Vector> RomSystem::respond(const InputSignal& signal, const std::vector<double>& grid) const {
  signal.validate(grid.front(), grid.back());
  auto f = [&](double t, const Vector& y) -> Vector {
    Complex psi(y(0), y(1));
    Complex d = rom_->lambda * psi;
    double u = signal(t);
    if (u != 0.0) d += rom_->gain_at(psi) * u;
    Vector out(2);
    out << d.real(), d.imag();
    return out;
  };
  Sampled<Vector> run = integrate(f, Vector(Vector::Zero(2)), grid, cfg_);
  Sampled<Vector> out;
  out.times = run.times;
  for (const auto& y : run.states) out.states.push_back(rom_->output_at(Complex(y(0), y(1))));
  return out;
}

double SteadyMaxima::relative_gap() const {
  double scale = 0.5 * (std::abs(max1) + std::abs(max2));
  return scale > 0.0 ? std::abs(max1 - max2) / scale : 0.0;
}

SteadyMaxima steady_state_maxima(const ForcedSystem& system, const InputSignal& signal, const MaximaOptions& opt) {
  if (signal.kind != InputSignal::Kind::Sine && signal.kind != InputSignal::Kind::Zero) {
    throw Error(ErrorCode::InvalidArgument, "steady-state maxima need periodic forcing");
  }
  if (opt.output < 0 || opt.output >= system.dimension()) {
    throw Error(ErrorCode::OutOfRange, "output component out of range", {{"output", opt.output}});
  }
  if (opt.settle_periods < 0 || opt.samples_per_period < 8) {
    throw Error(ErrorCode::OutOfRange, "settle periods must be non-negative and sampling at least 8 per period");
  }
  const double period = signal.period;
  const int n = opt.samples_per_period;
  const int cycles = 4;
  const int total = (opt.settle_periods + cycles) * n;
  std::vector<double> grid(total + 1);
  for (int i = 0; i <= total; ++i) grid[i] = period * static_cast<double>(i) / n;
  Sampled<Vector> run = system.respond(signal, grid);

  SteadyMaxima res;
  for (int c = 0; c < cycles; ++c) {
    int lo = (opt.settle_periods + c) * n;
    int hi = lo + n;
    int best = lo;
    for (int i = lo; i <= hi; ++i) {
      if (run.states[i](opt.output) > run.states[best](opt.output)) best = i;
    }
    double m = run.states[best](opt.output);
    if (best > 0 && best < total) {
      double ym = run.states[best - 1](opt.output), yp = run.states[best + 1](opt.output);
      double den = ym - 2.0 * m + yp;
      if (den < 0.0) m -= 0.125 * (yp - ym) * (yp - ym) / den;
    }
    res.cycle_maxima.push_back(m);
  }
  const auto& m = res.cycle_maxima;
  double scale = 0.0;
  for (double v : m) scale += std::abs(v) / cycles;
  scale = std::max(scale, 1e-300);
  auto rel = [&](double a, double b) { return std::abs(a - b) / scale; };
  res.max1 = m[0];
  res.max2 = m[1];
  double p1 = std::max({rel(m[0], m[1]), rel(m[1], m[2]), rel(m[2], m[3])});
  double p2 = std::max(rel(m[0], m[2]), rel(m[1], m[3]));
  if (p1 <= opt.settle_tol) {
    res.period = 1;
  } else if (p2 <= opt.settle_tol) {
    res.period = 2;
  } else {
    throw Error(ErrorCode::NotSettled, "response is neither period-1 nor period-2 after settling",
                {{"cycle_maxima", m}, {"settle_periods", opt.settle_periods}, {"tolerance", opt.settle_tol}});
  }
  return res;
}

SweepResult sweep_period_doubling(const ForcedSystem& system, const std::vector<double>& a_grid,
                                  const SweepOptions& opt) {
  if (a_grid.empty()) throw Error(ErrorCode::InvalidArgument, "amplitude grid is empty");
  if (!std::is_sorted(a_grid.begin(), a_grid.end())) {
    throw Error(ErrorCode::InvalidArgument, "amplitude grid must be sorted");
  }
  SweepResult out;
  out.gap_threshold = opt.gap_threshold;
  out.points.resize(a_grid.size());
  std::vector<std::string> errors(a_grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < a_grid.size(); i = next++) {
      SweepPoint& p = out.points[i];
      p.a = a_grid[i];
      try {
        SteadyMaxima m = steady_state_maxima(system, InputSignal::sine(a_grid[i], opt.period), opt.maxima);
        p.max1 = m.max1;
        p.max2 = m.max2;
        p.split = m.relative_gap() > opt.gap_threshold;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::DomainExit) {
          p.valid = false;
          p.settled = false;
          p.max1 = p.max2 = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        if (e.code() != ErrorCode::NotSettled) {
          errors[i] = e.what();
          continue;
        }
        auto cm = e.details().at("cycle_maxima").get<std::vector<double>>();
        p.max1 = cm[0];
        p.max2 = cm[1];
        p.settled = false;
        p.split = true;
      }
    }
  };
  int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(a_grid.size()));
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error(ErrorCode::NonFinite, "sweep simulation failed: " + errors[i], {{"a", a_grid[i]}});
    }
  }
  for (const auto& p : out.points) {
    if (p.split) {
      out.found = true;
      out.a_crit = p.a;
      break;
    }
  }
  return out;
}

double find_period_doubling(const ForcedSystem& system, const std::vector<double>& a_grid, const SweepOptions& opt) {
  SweepResult r = sweep_period_doubling(system, a_grid, opt);
  if (!r.found) {
    throw Error(ErrorCode::NoBifurcationInRange, "no period doubling on the amplitude grid",
                {{"a_min", a_grid.front()}, {"a_max", a_grid.back()}, {"gap_threshold", opt.gap_threshold}});
  }
  return r.a_crit;
}

ChirpComparison compare_forced(const ForcedSystem& full, const ForcedSystem& rom, const ForcedSystem& linear,
                               const InputSignal& signal, double T, double dt, int output) {
  if (output < 0 || output >= full.dimension()) throw Error(ErrorCode::OutOfRange, "output component out of range");
  std::vector<double> grid = uniform_grid(0.0, T, dt);
  ChirpComparison c;
  c.times = grid;
  for (double t : grid) c.omega.push_back(signal.omega(t));
  c.full = full.respond(signal, grid).states;
  c.rom = rom.respond(signal, grid).states;
  c.linear = linear.respond(signal, grid).states;
  const double x_ref = full.rest_state()(output);
  double se_rom = 0.0, se_lin = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.5 * T) continue;
    se_rom += (c.rom[i] - c.full[i]).squaredNorm();
    se_lin += (c.linear[i] - c.full[i]).squaredNorm();
    ++count;
  }
  c.rom_error = std::sqrt(se_rom / std::max(count, 1));
  c.linear_error = std::sqrt(se_lin / std::max(count, 1));
  auto peak = [&](const std::vector<Vector>& xs, double& omega, double& amp) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (std::abs(xs[i](output) - x_ref) > std::abs(xs[best](output) - x_ref)) best = i;
    }
    omega = c.omega[best];
    amp = std::abs(xs[best](output) - x_ref);
  };
  peak(c.full, c.full_peak_omega, c.full_peak_amplitude);
  peak(c.rom, c.rom_peak_omega, c.rom_peak_amplitude);
  peak(c.linear, c.linear_peak_omega, c.linear_peak_amplitude);
  return c;
}

}  // namespace isoman
