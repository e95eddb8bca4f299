#include <algorithm>
#include <cstdio>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/harness.hpp"

namespace spur::harness {

namespace {

constexpr double kWidth = 800, kHeight = 500;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

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

}  // namespace

std::string trajectory_svg(std::span<const TrajectoryPoint> rows, const std::string& title) {
  struct Series {
    const char* label;
    const char* color;
    double TrajectoryPoint::*field;
  };
  // Weights in blue (X1), green (X2) and purple (zone); accuracy in orange on
  // its own [0, 1] axis.
  const Series series[] = {{"avg |w| X1", "#1f4fd8", &TrajectoryPoint::avg_w_x1},
                           {"avg |w| X2", "#1a7f2e", &TrajectoryPoint::avg_w_x2},
                           {"avg |w| zone", "#7b2fa8", &TrajectoryPoint::avg_w_zone},
                           {"accuracy", "#f08c00", &TrajectoryPoint::accuracy}};

  double max_iter = 1.0, max_w = 1e-12;
  for (const auto& r : rows) {
    max_iter = std::max(max_iter, static_cast<double>(r.iteration));
    max_w = std::max({max_w, r.avg_w_x1, r.avg_w_x2, r.avg_w_zone});
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double it) { return kLeft + pw * it / max_iter; };
  auto py = [&](double v, double top) { return kTop + ph * (1.0 - v / top); };

  std::ostringstream svg;
  char buf[256];
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n"
      << "<text x=\"" << kLeft << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n", kLeft,
                kTop, pw, ph);
  svg << buf;
  for (int t = 0; t <= 4; ++t) {
    const double f = t / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"middle\">%.0f</text>\n",
                  px(f * max_iter), kHeight - kBottom + 16, f * max_iter);
    svg << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" "
                  "text-anchor=\"end\">%.3g</text>\n",
                  kLeft - 6, py(f * max_w, max_w) + 4, f * max_w);
    svg << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\" "
                "text-anchor=\"middle\">iteration</text>\n",
                kLeft + pw / 2, kHeight - 12);
  svg << buf;

  for (std::size_t s = 0; s < 4; ++s) {
    const double top = s == 3 ? 1.0 : max_w;
    svg << "<polyline fill=\"none\" stroke=\"" << series[s].color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(static_cast<double>(rows[i].iteration)),
                    py(rows[i].*(series[s].field), top));
      svg << buf;
    }
    svg << "\"/>\n";
    const double ly = kTop + 14 + 22.0 * static_cast<double>(s);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"3\"/>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"12\">%s</text>\n",
                  kWidth - kRight + 12, ly, kWidth - kRight + 36, ly, series[s].color, kWidth - kRight + 42, ly + 4,
                  escape(series[s].label).c_str());
    svg << buf;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<TrajectoryPoint> parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter,acc,avg_w_x1,avg_w_x2,avg_w_zone", 0) != 0)
    throw ConfigError("trajectory CSV must start with header iter,acc,avg_w_x1,avg_w_x2,avg_w_zone");
  std::vector<TrajectoryPoint> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TrajectoryPoint p;
    unsigned long long it = 0;
    int used = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%lf%n", &it, &p.accuracy, &p.avg_w_x1, &p.avg_w_x2,
                    &p.avg_w_zone, &used) != 5 ||
        static_cast<std::size_t>(used) != line.size())
      throw ConfigError("malformed trajectory CSV line " + std::to_string(lineno));
    p.iteration = static_cast<std::size_t>(it);
    rows.push_back(p);
  }
  return rows;
}

}  // namespace spur::harness
