#include "coag/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace coag {

namespace {

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

std::string tick_label(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

std::string SvgPlot::render(const std::string& metadata) const {
  constexpr double W = 640, H = 420, L = 80, R = 160, T = 40, B = 60;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!logx || x > 0) && (!logy || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
      if (usable(s.x[k], s.y[k])) {
        x0 = std::min(x0, tx(s.x[k]));
        x1 = std::max(x1, tx(s.x[k]));
        y0 = std::min(y0, ty(s.y[k]));
        y1 = std::max(y1, ty(s.y[k]));
      }
  for (const auto& [y, label] : hlines)
    if (!logy || y > 0) {
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  nlohmann::json data = nlohmann::json::array();
  for (const auto& s : series) data.push_back({{"name", s.name}, {"x", s.x}, {"y", s.y}});

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<metadata>" << escape(metadata) << "</metadata>\n";
  os << "<desc>" << escape(data.dump()) << "</desc>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double vx = logx ? std::pow(10.0, fx) : fx, vy = logy ? std::pow(10.0, fy) : fy;
    const double sx = L + (W - L - R) * k / 4.0, sy = H - B - (H - T - B) * k / 4.0;
    os << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << tick_label(vx) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << tick_label(vy)
       << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\" font-size=\"13\">"
     << escape(xlabel) << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
     << (T + H - B) / 2 << ")\">" << escape(ylabel) << "</text>\n";
  for (const auto& [y, label] : hlines) {
    if (logy && y <= 0) continue;
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(y) << "\" y2=\"" << py(y)
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    os << "<text x=\"" << W - R + 4 << "\" y=\"" << py(y) + 4 << "\" font-size=\"11\" fill=\"gray\">" << escape(label)
       << "</text>\n";
  }
  int legend = 0;
  for (const auto& s : series) {
    std::ostringstream pts;
    pts << std::setprecision(6);
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
      if (usable(s.x[k], s.y[k])) pts << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << pts.str() << "\"/>\n";
    if (s.markers)
      for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
        if (usable(s.x[k], s.y[k]))
          os << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"2.5\" fill=\"" << s.color
             << "\"/>\n";
    const double ly = T + 14 + 18 * legend++;
    os << "<line x1=\"" << W - R + 8 << "\" x2=\"" << W - R + 28 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 32 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace coag
