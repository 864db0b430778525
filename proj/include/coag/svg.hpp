#pragma once

#include <string>
#include <utility>
#include <vector>

namespace coag {

struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = true;
  bool dashed = false;
};

/// Minimal self-contained line/scatter plot. Non-positive values are dropped on log axes.
struct SvgPlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<SvgSeries> series;
  std::vector<std::pair<double, std::string>> hlines;

  /// `metadata` (typically the resolved config as JSON) is embedded verbatim in <metadata>,
  /// followed by the plotted data.
  std::string render(const std::string& metadata) const;
};

}  // namespace coag
