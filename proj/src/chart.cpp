#include "fairlab/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fairlab/error.hpp"
#include "fairlab/format.hpp"

namespace fairlab {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 200.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
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

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_double(const std::string& text, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(row, "not a number: '" + text + "'");
  }
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidArgument("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty file");
  t.header = split_line(strip_cr(line));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ParseError(row, "expected " + std::to_string(t.header.size()) + " fields, got " +
                                std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

}  // namespace

void ChartSpec::validate() const {
  if (series.empty()) throw InvalidArgument("chart: at least one series is required");
  if (x.empty()) throw InvalidArgument("chart: x values are empty");
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("chart: non-finite x value");
    if (x_axis == XAxis::width && v <= 0.0) {
      throw InvalidArgument("chart: log-scale x values must be positive");
    }
  }
  for (const auto& s : series) {
    if (s.y.size() != x.size()) {
      throw DimensionMismatch("chart: series '" + s.label + "' length differs from x");
    }
    if (!s.ci.empty() && s.ci.size() != x.size()) {
      throw DimensionMismatch("chart: band of series '" + s.label + "' length differs from x");
    }
    for (double v : s.y) {
      if (!std::isfinite(v)) throw InvalidArgument("chart: non-finite value in '" + s.label + "'");
    }
    for (double v : s.ci) {
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidArgument("chart: invalid band value in '" + s.label + "'");
      }
    }
  }
}

std::string render_chart(const ChartSpec& spec) {
  spec.validate();
  const bool log_x = spec.x_axis == XAxis::width;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };

  Range xr{tx(spec.x.front()), tx(spec.x.front())};
  for (double v : spec.x) {
    xr.lo = std::min(xr.lo, tx(v));
    xr.hi = std::max(xr.hi, tx(v));
  }
  if (xr.hi == xr.lo) {
    xr.lo -= 0.5;
    xr.hi += 0.5;
  }
  Range yr{spec.series.front().y.front(), spec.series.front().y.front()};
  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      const double band = s.ci.empty() ? 0.0 : s.ci[i];
      yr.lo = std::min(yr.lo, s.y[i] - band);
      yr.hi = std::max(yr.hi, s.y[i] + band);
    }
  }
  if (yr.hi == yr.lo) {
    yr.lo -= 0.5;
    yr.hi += 0.5;
  }
  const double pad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= pad;
  yr.hi += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double v) { return kTop + (yr.hi - v) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0)
      << "\" height=\"" << fixed(kHeight, 0) << "\" viewBox=\"0 0 " << fixed(kWidth, 0) << ' '
      << fixed(kHeight, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << fixed(kWidth, 0) << "\" height=\""
      << fixed(kHeight, 0) << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << escape(spec.title) << "</text>\n";

  // Axes and ticks.
  svg << "<g stroke=\"#333\" fill=\"none\">\n";
  svg << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + plot_h) << "\" x2=\""
      << fixed(kLeft + plot_w) << "\" y2=\"" << fixed(kTop + plot_h) << "\"/>\n";
  svg << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft)
      << "\" y2=\"" << fixed(kTop + plot_h) << "\"/>\n";
  svg << "</g>\n";

  std::vector<double> x_ticks;
  if (log_x || spec.x.size() <= 12) {
    x_ticks = spec.x;
    std::sort(x_ticks.begin(), x_ticks.end());
    x_ticks.erase(std::unique(x_ticks.begin(), x_ticks.end()), x_ticks.end());
  } else {
    for (int i = 0; i <= 5; ++i) x_ticks.push_back(xr.lo + (xr.hi - xr.lo) * i / 5.0);
  }
  svg << "<g class=\"x-ticks\" text-anchor=\"middle\">\n";
  for (double v : x_ticks) {
    const double x = px(v);
    svg << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(kTop + plot_h) << "\" x2=\""
        << fixed(x) << "\" y2=\"" << fixed(kTop + plot_h + 5) << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << fixed(x) << "\" y=\"" << fixed(kTop + plot_h + 18) << "\">"
        << tick_text(v) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<g class=\"y-ticks\" text-anchor=\"end\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    const double y = py(v);
    svg << "<line x1=\"" << fixed(kLeft - 5) << "\" y1=\"" << fixed(y) << "\" x2=\""
        << fixed(kLeft + plot_w) << "\" y2=\"" << fixed(y) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(y + 4) << "\">" << tick_text(v)
        << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 12)
      << "\" text-anchor=\"middle\">" << escape(spec.x_label) << (log_x ? " (log scale)" : "")
      << "</text>\n";
  svg << "<text x=\"18\" y=\"" << fixed(kTop + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 18 " << fixed(kTop + plot_h / 2) << ")\">"
      << escape(spec.y_label) << "</text>\n";

  // Points are drawn in ascending x so that lines do not zig-zag.
  std::vector<std::size_t> order(spec.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return spec.x[a] < spec.x[b]; });

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n";
    if (!s.ci.empty()) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (std::size_t i : order) svg << fixed(px(spec.x[i])) << ',' << fixed(py(s.y[i] + s.ci[i])) << ' ';
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        svg << fixed(px(spec.x[*it])) << ',' << fixed(py(s.y[*it] - s.ci[*it])) << ' ';
      }
      svg << "\"/>\n";
    }
    if (order.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
      for (std::size_t i : order) svg << fixed(px(spec.x[i])) << ',' << fixed(py(s.y[i])) << ' ';
      svg << "\"/>\n";
    }
    for (std::size_t i : order) {
      svg << "<circle cx=\"" << fixed(px(spec.x[i])) << "\" cy=\"" << fixed(py(s.y[i]))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    svg << "</g>\n";
  }

  svg << "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(k);
    const double x = kWidth - kRight + 15;
    svg << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y - 6) << "\" width=\"16\" height=\"4\" "
        << "fill=\"" << kPalette[k % std::size(kPalette)] << "\"/>\n";
    svg << "<text x=\"" << fixed(x + 22) << "\" y=\"" << fixed(y) << "\">"
        << escape(spec.series[k].label) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void save_chart(const ChartSpec& spec) {
  if (spec.output.empty()) throw InvalidArgument("chart: no output path");
  const std::string doc = render_chart(spec);
  std::ofstream out(spec.output, std::ios::binary);
  if (!out) throw Error("cannot write " + spec.output.string());
  out << doc;
}

CsvKind classify_csv_header(const std::string& header) {
  const std::string h = strip_cr(header);
  if (h == "width,lambda,regularizer,metric,mean,ci95,n_runs") return CsvKind::results;
  if (h == "thr,tau_a0,tau_a1,val_err,val_gap,test_err,test_gap,feasible") return CsvKind::pareto;
  if (h.rfind("step,lr,train_lp,", 0) == 0) return CsvKind::trace;
  return CsvKind::unknown;
}

ChartSpec results_chart(std::istream& results_csv, const std::string& metric) {
  const Table t = read_table(results_csv);
  const std::size_t c_width = t.column("width"), c_lambda = t.column("lambda"),
                    c_reg = t.column("regularizer"), c_metric = t.column("metric"),
                    c_mean = t.column("mean"), c_ci = t.column("ci95");

  std::vector<double> widths;
  std::vector<std::string> labels;
  std::map<std::pair<std::string, double>, std::pair<double, double>> cells;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[c_metric] != metric) continue;
    const double w = parse_double(row[c_width], r + 1);
    const std::string label = "lambda=" + row[c_lambda] + ", " + row[c_reg];
    if (std::find(widths.begin(), widths.end(), w) == widths.end()) widths.push_back(w);
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    cells[{label, w}] = {parse_double(row[c_mean], r + 1), parse_double(row[c_ci], r + 1)};
  }
  if (widths.empty()) throw NotFound("results: no rows for metric '" + metric + "'");
  std::sort(widths.begin(), widths.end());

  ChartSpec spec;
  spec.x_axis = XAxis::width;
  spec.title = metric + " vs width";
  spec.x_label = "width";
  spec.y_label = metric;
  spec.x = widths;
  for (const auto& label : labels) {
    Series s;
    s.label = label;
    for (double w : widths) {
      const auto it = cells.find({label, w});
      if (it == cells.end()) {
        throw InvalidArgument("results: series '" + label + "' has no value at width " +
                              format_number(w));
      }
      s.y.push_back(it->second.first);
      s.ci.push_back(it->second.second);
    }
    spec.series.push_back(std::move(s));
  }
  return spec;
}

ChartSpec trace_chart(std::istream& trace_csv, const std::vector<std::string>& columns) {
  const Table t = read_table(trace_csv);
  if (t.rows.empty()) throw InvalidArgument("trace: no rows");
  const std::size_t c_step = t.column("step");
  ChartSpec spec;
  spec.x_axis = XAxis::step;
  spec.title = "training trace";
  spec.x_label = "step";
  spec.y_label = "value";
  for (std::size_t r = 0; r < t.rows.size(); ++r) spec.x.push_back(parse_double(t.rows[r][c_step], r + 1));
  for (const auto& name : columns) {
    const std::size_t c = t.column(name);
    Series s;
    s.label = name;
    for (std::size_t r = 0; r < t.rows.size(); ++r) s.y.push_back(parse_double(t.rows[r][c], r + 1));
    spec.series.push_back(std::move(s));
  }
  return spec;
}

ChartSpec pareto_chart(std::istream& pareto_csv) {
  const Table t = read_table(pareto_csv);
  if (t.rows.empty()) throw InvalidArgument("pareto: no rows");
  ChartSpec spec;
  spec.x_axis = XAxis::thr;
  spec.title = "fairness-constrained error";
  spec.x_label = "FNR gap bound";
  spec.y_label = "error / gap";
  const std::size_t c_thr = t.column("thr");
  for (std::size_t r = 0; r < t.rows.size(); ++r) spec.x.push_back(parse_double(t.rows[r][c_thr], r + 1));
  for (const char* name : {"val_err", "test_err", "val_gap", "test_gap"}) {
    const std::size_t c = t.column(name);
    Series s;
    s.label = name;
    for (std::size_t r = 0; r < t.rows.size(); ++r) s.y.push_back(parse_double(t.rows[r][c], r + 1));
    spec.series.push_back(std::move(s));
  }
  return spec;
}

}  // namespace fairlab
