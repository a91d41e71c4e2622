#pragma once

#include <string>
#include <vector>

namespace hwopt {

struct PlotSeries {
  std::string label;                   // usually the method name
  std::vector<std::string> csv_paths;  // one per seed, shared schema
};

// Mean curve with a min/max band per series (return vs env steps), written as
// an SVG plus an aggregated CSV (label, env_steps, mean, lo, hi).
void emit_plots(const std::vector<PlotSeries>& series, const std::string& svg_path,
                const std::string& agg_csv_path, const std::string& title = "");

}  // namespace hwopt
