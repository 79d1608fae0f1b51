#include "isoman/plot.hpp"

#include "isoman/error.hpp"
#include "isoman/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace isoman {

namespace {

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0") s = s.substr(1);
  return s;
}

std::string tick_label(double v, double step) {
  int digits = std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9)));
  return fmt(v, std::min(digits, 8));
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  double raw = span / std::max(target, 1);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double f = raw / mag;
  double nice = f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0;
  return nice * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      double d = std::max(std::abs(hi) * 0.05, 1e-6);
      lo -= d;
      hi += d;
    } else {
      double d = 0.05 * (hi - lo);
      lo -= d;
      hi += d;
    }
  }
};

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  Range rx, ry;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) throw Error(ErrorCode::InvalidArgument, "series x and y lengths differ");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (std::isfinite(s.xs[i]) && std::isfinite(s.ys[i])) {
        rx.add(s.xs[i]);
        ry.add(s.ys[i]);
      }
    }
  }
  if (!(rx.lo <= rx.hi)) throw Error(ErrorCode::InvalidArgument, "nothing to plot: no finite points");
  rx.pad();
  ry.pad();

  const double left = 70, right = 20, top = spec.title.empty() ? 20 : 40, bottom = 55;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto sx = [&](double x) { return left + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto sy = [&](double y) { return top + (ry.hi - y) / (ry.hi - ry.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height << "\" fill=\"white\"/>\n";
  if (!spec.title.empty()) {
    o << "<text x=\"" << fmt(spec.width / 2.0) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(spec.title) << "</text>\n";
  }
  o << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  double xstep = nice_step(rx.hi - rx.lo, 6), ystep = nice_step(ry.hi - ry.lo, 6);
  for (double v = std::ceil(rx.lo / xstep) * xstep; v <= rx.hi + 1e-12 * xstep; v += xstep) {
    double px = sx(v);
    o << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(px) << "\" y2=\""
      << fmt(top + ph + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(v, xstep) << "</text>\n";
  }
  for (double v = std::ceil(ry.lo / ystep) * ystep; v <= ry.hi + 1e-12 * ystep; v += ystep) {
    double py = sy(v);
    o << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(py)
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
      << tick_label(v, ystep) << "</text>\n";
  }
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(spec.height - 12.0)
    << "\" text-anchor=\"middle\">" << escape(spec.xlabel) << "</text>\n";
  o << "<text transform=\"translate(16," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.ylabel) << "</text>\n";

  o << "<clipPath id=\"plot\"><rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw)
    << "\" height=\"" << fmt(ph) << "\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[(s.color >= 0 ? s.color : static_cast<int>(k)) % kPalette.size()];
    std::ostringstream pts;
    bool open = false;
    auto flush = [&]() {
      if (!open) return;
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\""
        << (s.dashed ? " stroke-dasharray=\"6 3\"" : "") << " points=\"" << pts.str() << "\"/>\n";
      pts.str("");
      open = false;
    };
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) {
        flush();
        continue;
      }
      pts << (open ? " " : "") << fmt(sx(s.xs[i])) << ',' << fmt(sy(s.ys[i]));
      open = true;
    }
    flush();
  }
  o << "</g>\n";

  std::vector<std::size_t> labelled;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (!series[k].label.empty()) labelled.push_back(k);
  }
  if (!labelled.empty() && static_cast<int>(labelled.size()) <= spec.legend_limit) {
    double y = top + 14;
    for (std::size_t k : labelled) {
      const auto& s = series[k];
      const char* color = kPalette[(s.color >= 0 ? s.color : static_cast<int>(k)) % kPalette.size()];
      o << "<line x1=\"" << fmt(left + pw - 150) << "\" y1=\"" << fmt(y - 4) << "\" x2=\"" << fmt(left + pw - 125)
        << "\" y2=\"" << fmt(y - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6 3\"" : "") << "/>";
      o << "<text x=\"" << fmt(left + pw - 120) << "\" y=\"" << fmt(y) << "\">" << escape(s.label) << "</text>\n";
      y += 16;
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<PlotSeries> series_from_csv(const std::vector<CsvSeriesRequest>& requests) {
  if (requests.empty()) throw Error(ErrorCode::MissingColumn, "no input series given");
  std::vector<PlotSeries> out;
  int color = 0;
  for (const auto& req : requests) {
    CsvTable t = read_csv(req.file);
    std::vector<double> xs = t.column(req.x), ys = t.column(req.y);
    if (xs.empty()) {
      throw Error(ErrorCode::MissingColumn, "column '" + req.y + "' has no data", {{"file", req.file.string()}});
    }
    if (!req.group) {
      PlotSeries s;
      s.label = req.label.empty() ? req.y : req.label;
      s.xs = xs;
      s.ys = ys;
      s.color = color++;
      out.push_back(std::move(s));
      continue;
    }
    std::vector<double> g = t.column(*req.group);
    std::map<double, PlotSeries> groups;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto& s = groups[g[i]];
      s.xs.push_back(xs[i]);
      s.ys.push_back(ys[i]);
    }
    int gi = 0;
    for (auto& [key, s] : groups) {
      s.color = color + gi++;
      if (groups.size() == 1) s.label = req.label;
      out.push_back(std::move(s));
    }
    color += gi;
  }
  return out;
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << svg;
}

}  // namespace isoman
