#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace isoman {

struct PlotSeries {
  std::string label;
  std::vector<double> xs, ys;
  bool dashed = false;
  int color = -1;  // palette index; -1 picks by position
};

struct PlotSpec {
  std::string title;
  std::string xlabel = "x";
  std::string ylabel = "y";
  int width = 640;
  int height = 480;
  int legend_limit = 12;  // legends with more entries are suppressed
};

// Deterministic SVG with polylines, axes, ticks and a legend.
std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);

struct CsvSeriesRequest {
  std::filesystem::path file;
  std::string x, y;
  std::string label;
  std::optional<std::string> group;  // split into one polyline per distinct value of this column
};

// Reads the referenced columns (MissingColumn when absent) and builds the series.
std::vector<PlotSeries> series_from_csv(const std::vector<CsvSeriesRequest>& requests);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace isoman
