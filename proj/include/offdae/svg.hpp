#ifndef OFFDAE_SVG_HPP
#define OFFDAE_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "offdae/errors.hpp"

namespace offdae {

/// Header plus rows of a comma-separated file.  No quoting support; none of
/// the files written here need it.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("csv: no column named '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
};

inline std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header.size()) throw ConfigError("csv: row has wrong number of fields: " + line);
    table.rows.push_back(std::move(fields));
  }
  if (first) throw ConfigError("csv: empty input");
  return table;
}

struct ChartSeries {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> band;  // half-width per point; empty for no band
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::optional<double> reference;  // horizontal dashed line
  std::vector<ChartSeries> series;
};

/// Which columns of a long-format CSV make up a chart.  `group` columns are
/// joined with spaces into the series label; `filter` keeps rows whose
/// column equals the given text.
struct ChartColumns {
  std::string x;
  std::string y;
  std::string band;
  std::vector<std::string> group;
  std::map<std::string, std::string> filter;
};

inline ChartSpec chart_from_csv(const CsvTable& table, const ChartColumns& cols) {
  const int xc = table.column(cols.x), yc = table.column(cols.y);
  const int bc = cols.band.empty() ? -1 : table.column(cols.band);
  std::vector<int> gc;
  for (const auto& g : cols.group) gc.push_back(table.column(g));
  std::vector<std::pair<int, std::string>> fc;
  for (const auto& [k, v] : cols.filter) fc.emplace_back(table.column(k), v);

  ChartSpec spec;
  spec.x_label = cols.x;
  spec.y_label = cols.y;
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    if (std::any_of(fc.begin(), fc.end(), [&](const auto& f) { return row[static_cast<std::size_t>(f.first)] != f.second; }))
      continue;
    const std::string& ytext = row[static_cast<std::size_t>(yc)];
    if (ytext.empty()) continue;  // absent value
    std::string label;
    for (int g : gc) label += (label.empty() ? "" : " ") + row[static_cast<std::size_t>(g)];
    auto [it, inserted] = index.emplace(label, spec.series.size());
    if (inserted) spec.series.push_back({label, {}, {}, {}});
    auto& s = spec.series[it->second];
    s.x.push_back(std::stod(row[static_cast<std::size_t>(xc)]));
    s.y.push_back(std::stod(ytext));
    if (bc >= 0) {
      const std::string& btext = row[static_cast<std::size_t>(bc)];
      s.band.push_back(btext.empty() ? 0.0 : std::stod(btext));
    }
  }
  return spec;
}

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
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

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[i % 8];
}

}  // namespace detail

/// Renders a line chart with optional shaded bands, a dashed reference line
/// and a legend.  Output depends only on `spec`.
inline std::string render_line_chart(const ChartSpec& spec) {
  constexpr double width = 640, height = 420, left = 70, right = 170, top = 40, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  auto fx = [&](double x) { return spec.log_x ? std::log10(x) : x; };
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log_x && !(s.x[i] > 0.0)) throw ConfigError("chart: log x axis needs positive x values");
      const double b = s.band.empty() ? 0.0 : s.band[i];
      x_lo = std::min(x_lo, fx(s.x[i]));
      x_hi = std::max(x_hi, fx(s.x[i]));
      y_lo = std::min(y_lo, s.y[i] - b);
      y_hi = std::max(y_hi, s.y[i] + b);
    }
  }
  if (spec.reference) {
    y_lo = std::min(y_lo, *spec.reference);
    y_hi = std::max(y_hi, *spec.reference);
  }
  if (!std::isfinite(x_lo)) x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  auto px = [&](double x) { return left + (fx(x) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * plot_h; };
  using detail::svg_num;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(width) + "\" height=\"" + svg_num(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + svg_num(left + plot_w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::escape_xml(spec.title) + "</text>\n";

  // Axes and ticks.
  out += "<rect x=\"" + svg_num(left) + "\" y=\"" + svg_num(top) + "\" width=\"" + svg_num(plot_w) + "\" height=\"" +
         svg_num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  std::vector<double> xticks;
  if (spec.log_x) {
    for (double e = std::floor(x_lo); e <= std::ceil(x_hi); e += 1.0)
      if (e >= x_lo - 1e-9 && e <= x_hi + 1e-9) xticks.push_back(std::pow(10.0, e));
  } else {
    for (int i = 0; i <= 5; ++i) xticks.push_back(x_lo + (x_hi - x_lo) * i / 5.0);
  }
  for (double t : xticks) {
    out += "<line x1=\"" + svg_num(px(t)) + "\" y1=\"" + svg_num(top + plot_h) + "\" x2=\"" + svg_num(px(t)) +
           "\" y2=\"" + svg_num(top + plot_h + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + svg_num(px(t)) + "\" y=\"" + svg_num(top + plot_h + 18) + "\" text-anchor=\"middle\">" +
           detail::tick_label(t) + "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double t = y_lo + (y_hi - y_lo) * i / 5.0;
    out += "<line x1=\"" + svg_num(left - 5) + "\" y1=\"" + svg_num(py(t)) + "\" x2=\"" + svg_num(left) + "\" y2=\"" +
           svg_num(py(t)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + svg_num(left - 8) + "\" y=\"" + svg_num(py(t) + 4) + "\" text-anchor=\"end\">" +
           detail::tick_label(t) + "</text>\n";
  }
  out += "<text x=\"" + svg_num(left + plot_w / 2) + "\" y=\"" + svg_num(height - 10) + "\" text-anchor=\"middle\">" +
         detail::escape_xml(spec.x_label) + (spec.log_x ? " (log)" : "") + "</text>\n";
  out += "<text x=\"16\" y=\"" + svg_num(top + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         svg_num(top + plot_h / 2) + ")\">" + detail::escape_xml(spec.y_label) + "</text>\n";

  if (spec.reference) {
    out += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(py(*spec.reference)) + "\" x2=\"" +
           svg_num(left + plot_w) + "\" y2=\"" + svg_num(py(*spec.reference)) +
           "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const char* color = detail::palette(k);
    if (!s.band.empty() && !s.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) pts += svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i] + s.band[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;) pts += svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i] - s.band[i])) + " ";
      pts.pop_back();
      out += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts += (i ? " " : "") + svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i]));
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + svg_num(left + plot_w + 10) + "\" y1=\"" + svg_num(ly) + "\" x2=\"" +
           svg_num(left + plot_w + 30) + "\" y2=\"" + svg_num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + svg_num(left + plot_w + 35) + "\" y=\"" + svg_num(ly + 4) + "\">" + detail::escape_xml(s.label) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace offdae

#endif  // OFFDAE_SVG_HPP
