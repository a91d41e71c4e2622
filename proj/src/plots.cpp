#include "hwopt/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hwopt {

namespace {

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("emit_plots: cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("emit_plots: empty csv " + path);
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

int column_index(const CsvTable& t, const std::string& name, const std::string& path) {
  for (size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == name) return static_cast<int>(i);
  throw std::runtime_error("emit_plots: column '" + name + "' missing in " + path);
}

struct Curve {
  std::string label;
  std::vector<double> x, mean, lo, hi;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void emit_plots(const std::vector<PlotSeries>& series, const std::string& svg_path,
                const std::string& agg_csv_path, const std::string& title) {
  std::vector<Curve> curves;
  for (const PlotSeries& s : series) {
    if (s.csv_paths.empty()) continue;
    std::vector<CsvTable> tables;
    for (const auto& p : s.csv_paths) tables.push_back(read_csv(p));
    // All CSVs of one series must share the schema.
    for (size_t i = 1; i < tables.size(); ++i) {
      if (tables[i].columns != tables[0].columns) {
        std::string offending;
        const size_t n = std::max(tables[i].columns.size(), tables[0].columns.size());
        for (size_t c = 0; c < n; ++c) {
          const std::string a = c < tables[0].columns.size() ? tables[0].columns[c] : "<none>";
          const std::string b = c < tables[i].columns.size() ? tables[i].columns[c] : "<none>";
          if (a != b) offending += (offending.empty() ? "" : ", ") + a + " vs " + b;
        }
        throw std::runtime_error("emit_plots: schema mismatch between " + s.csv_paths[0] +
                                 " and " + s.csv_paths[i] + ": " + offending);
      }
    }
    const int xi = column_index(tables[0], "env_steps", s.csv_paths[0]);
    const int yi = column_index(tables[0], "mean_return", s.csv_paths[0]);
    size_t n_rows = std::numeric_limits<size_t>::max();
    for (const auto& t : tables) n_rows = std::min(n_rows, t.rows.size());
    if (n_rows == 0 || n_rows == std::numeric_limits<size_t>::max()) continue;

    Curve c;
    c.label = s.label;
    for (size_t r = 0; r < n_rows; ++r) {
      c.x.push_back(tables[0].rows[r][static_cast<size_t>(xi)]);
      double mean = 0.0, lo = 1e300, hi = -1e300;
      for (const auto& t : tables) {
        const double y = t.rows[r][static_cast<size_t>(yi)];
        mean += y;
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
      c.mean.push_back(mean / static_cast<double>(tables.size()));
      c.lo.push_back(lo);
      c.hi.push_back(hi);
    }
    curves.push_back(std::move(c));
  }

  // Aggregated CSV.
  {
    std::ofstream out(agg_csv_path);
    if (!out) throw std::runtime_error("emit_plots: cannot open " + agg_csv_path);
    out << "label,env_steps,mean_return,min_return,max_return\n";
    for (const Curve& c : curves)
      for (size_t r = 0; r < c.x.size(); ++r)
        out << c.label << ',' << fmt(c.x[r]) << ',' << fmt(c.mean[r]) << ',' << fmt(c.lo[r])
            << ',' << fmt(c.hi[r]) << '\n';
  }

  // Plot bounds.
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool first = true;
  for (const Curve& c : curves)
    for (size_t r = 0; r < c.x.size(); ++r) {
      if (first) {
        x_lo = x_hi = c.x[r];
        y_lo = c.lo[r];
        y_hi = c.hi[r];
        first = false;
      }
      x_lo = std::min(x_lo, c.x[r]);
      x_hi = std::max(x_hi, c.x[r]);
      y_lo = std::min(y_lo, c.lo[r]);
      y_hi = std::max(y_hi, c.hi[r]);
    }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  const double pad_y = 0.05 * (y_hi - y_lo);
  y_lo -= pad_y;
  y_hi += pad_y;

  const double width = 800, height = 500;
  const double ml = 80, mr = 20, mt = 40, mb = 60;
  auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr); };
  auto sy = [&](double y) { return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb); };

  std::ofstream svg(svg_path);
  if (!svg) throw std::runtime_error("emit_plots: cannot open " + svg_path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";

  // Axes and ticks.
  svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 5.0;
    const double yv = y_lo + (y_hi - y_lo) * i / 5.0;
    svg << "<text x=\"" << sx(xv) << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << sy(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
  }
  svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 16
      << "\" text-anchor=\"middle\" font-size=\"13\">environment steps</text>\n";
  svg << "<text x=\"20\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 "
      << (mt + height - mb) / 2 << ")\">mean return</text>\n";

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const Curve& c = curves[ci];
    const char* color = kPalette[ci % 6];
    const bool band = [&] {
      for (size_t r = 0; r < c.x.size(); ++r)
        if (c.hi[r] != c.lo[r]) return true;
      return false;
    }();
    if (band) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (size_t r = 0; r < c.x.size(); ++r) svg << sx(c.x[r]) << ',' << sy(c.hi[r]) << ' ';
      for (size_t r = c.x.size(); r-- > 0;) svg << sx(c.x[r]) << ',' << sy(c.lo[r]) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t r = 0; r < c.x.size(); ++r) svg << sx(c.x[r]) << ',' << sy(c.mean[r]) << ' ';
    svg << "\"/>\n";
    const double lx = width - mr - 170, ly = mt + 18 * (static_cast<double>(ci) + 1);
    svg << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << c.label
        << "</text>\n";
  }
  svg << "</svg>\n";
}

}  // namespace hwopt
