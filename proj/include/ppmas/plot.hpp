#pragma once

#include <string>
#include <vector>

#include "ppmas/trace.hpp"

namespace ppmas::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

// Minimal static line chart; axes are padded to the data extent.
std::string render_svg(const std::string& title, const std::string& x_label,
                       const std::string& y_label,
                       const std::vector<Series>& series);

struct PlotOutput {
  std::vector<std::string> files;
  std::string note;  // set when panels are omitted (e.g. no observers)
};

// Four panels from the trace columns: state trajectories, estimation-error
// norms against their funnels, estimated task robustness, true task
// robustness. Observer panels are skipped with a note when the trace has no
// estimate columns.
PlotOutput emit_plots(const sim::Trace& trace, const std::string& out_dir);

}  // namespace ppmas::plot
