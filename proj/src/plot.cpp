#include "ppmas/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace ppmas::plot {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
                          "#7f7f7f", "#bcbd22"};
constexpr int kPaletteSize = 10;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label,
                       const std::string& y_label,
                       const std::vector<Series>& series) {
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  for (const Series& s : series) {
    for (double v : s.x) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
    for (double v : s.y) {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (!(x_min <= x_max)) {
    x_min = 0.0;
    x_max = 1.0;
  }
  if (!(y_min <= y_max)) {
    y_min = 0.0;
    y_max = 1.0;
  }
  if (x_max - x_min < 1e-12) x_max = x_min + 1.0;
  const double pad = std::max(0.05 * (y_max - y_min), 1e-9);
  y_min -= pad;
  y_max += pad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto sx = [&](double v) {
    return kMarginLeft + (v - x_min) / (x_max - x_min) * plot_w;
  };
  const auto sy = [&](double v) {
    return kMarginTop + (y_max - v) / (y_max - y_min) * plot_h;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
     << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

  // Axes box with 5 gridlines per direction.
  os << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
     << plot_w << "\" height=\"" << plot_h
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int g = 0; g <= 5; ++g) {
    const double xv = x_min + (x_max - x_min) * g / 5.0;
    const double yv = y_min + (y_max - y_min) * g / 5.0;
    os << "<line x1=\"" << sx(xv) << "\" y1=\"" << kMarginTop << "\" x2=\""
       << sx(xv) << "\" y2=\"" << kMarginTop + plot_h
       << "\" stroke=\"#ddd\"/>\n";
    os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << sy(yv) << "\" x2=\""
       << kMarginLeft + plot_w << "\" y2=\"" << sy(yv)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << sx(xv) << "\" y=\"" << kHeight - kMarginBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"11\">" << fmt(xv) << "</text>\n";
    os << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << sy(yv) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"11\">" << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\">" << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << kHeight / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\" transform=\"rotate(-90 16 " << kHeight / 2 << ")\">"
     << y_label << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kPalette[i % kPaletteSize];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.3\"";
    if (s.dashed) os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    // Thin dense traces so the files stay small.
    const std::size_t stride = std::max<std::size_t>(1, n / 800);
    for (std::size_t p = 0; p < n; p += stride) {
      os << fmt(sx(s.x[p])) << ',' << fmt(sy(s.y[p])) << ' ';
    }
    if (n > 0 && (n - 1) % stride != 0) {
      os << fmt(sx(s.x[n - 1])) << ',' << fmt(sy(s.y[n - 1]));
    }
    os << "\"/>\n";
    os << "<text x=\"" << kMarginLeft + 10 << "\" y=\""
       << kMarginTop + 16 + 15 * static_cast<int>(i)
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color
       << "\">" << s.label << (s.dashed ? " (dashed)" : "") << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

std::vector<std::string> columns_with_prefix(const sim::Trace& trace,
                                             const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& c : trace.columns) {
    if (c.rfind(prefix, 0) == 0) out.push_back(c);
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  out << content;
}

}  // namespace

PlotOutput emit_plots(const sim::Trace& trace, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  PlotOutput result;
  const std::vector<double> t = trace.column_values("t");

  // Panel (a): planar trajectories when every agent is 2-D, otherwise all
  // state components over time.
  {
    std::vector<Series> series;
    std::map<int, std::vector<std::string>> by_agent;
    for (const auto& c : columns_with_prefix(trace, "x_")) {
      const int agent = std::stoi(c.substr(2));
      by_agent[agent].push_back(c);
    }
    bool planar = !by_agent.empty();
    for (const auto& [agent, cols] : by_agent) {
      if (cols.size() != 2) planar = false;
    }
    if (planar) {
      for (const auto& [agent, cols] : by_agent) {
        Series s;
        s.label = "agent " + std::to_string(agent);
        s.x = trace.column_values(cols[0]);
        s.y = trace.column_values(cols[1]);
        series.push_back(std::move(s));
      }
      result.files.push_back(out_dir + "/trajectories.svg");
      write_file(result.files.back(),
                 render_svg("State trajectories", "x1", "x2", series));
    } else {
      for (const auto& [agent, cols] : by_agent) {
        for (const auto& c : cols) {
          series.push_back({c, t, trace.column_values(c), false});
        }
      }
      result.files.push_back(out_dir + "/trajectories.svg");
      write_file(result.files.back(),
                 render_svg("State components", "t", "x", series));
    }
  }

  // Panels (b) and (c) need observer columns.
  const auto err_cols = columns_with_prefix(trace, "err_");
  const auto rhohat_cols = columns_with_prefix(trace, "rhohat_");
  if (err_cols.empty()) {
    result.note = "no observer pairs in the trace; estimation panels omitted";
  } else {
    std::vector<Series> series;
    for (const auto& c : err_cols) {
      series.push_back({c, t, trace.column_values(c), false});
    }
    for (const auto& c : columns_with_prefix(trace, "delta_")) {
      series.push_back({c, t, trace.column_values(c), true});
    }
    result.files.push_back(out_dir + "/estimation_errors.svg");
    write_file(result.files.back(),
               render_svg("Estimation errors against their funnels", "t",
                          "error norm", series));
  }
  if (!err_cols.empty() && !rhohat_cols.empty()) {
    std::vector<Series> series;
    for (const auto& c : rhohat_cols) {
      series.push_back({c, t, trace.column_values(c), false});
    }
    result.files.push_back(out_dir + "/estimated_robustness.svg");
    write_file(result.files.back(),
               render_svg("Estimated task robustness", "t", "rho", series));
  }

  // Panel (d): true robustness per task.
  {
    std::vector<Series> series;
    for (const auto& c : trace.columns) {
      if (c.rfind("rho_", 0) == 0) {
        series.push_back({c, t, trace.column_values(c), false});
      }
    }
    result.files.push_back(out_dir + "/true_robustness.svg");
    write_file(result.files.back(),
               render_svg("True task robustness", "t", "rho", series));
  }
  return result;
}

}  // namespace ppmas::plot
