#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace fairlab {

/// width is drawn on a log scale with a tick at every data x; step and thr are linear.
enum class XAxis { width, step, thr };

struct Series {
  std::string label;
  std::vector<double> y;
  /// Half-widths of a band around y; empty for no band.
  std::vector<double> ci;
};

struct ChartSpec {
  XAxis x_axis = XAxis::width;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
  std::filesystem::path output;

  /// At least one series, lengths equal to x, finite values, positive x on a log axis.
  void validate() const;
};

/// Standalone SVG document; identical specs give identical bytes.
std::string render_chart(const ChartSpec& spec);
void save_chart(const ChartSpec& spec);

/// Builders from the CSV files written by the other subcommands.
/// Results: one series per (lambda, regularizer) of `metric` against width.
ChartSpec results_chart(std::istream& results_csv, const std::string& metric);
/// Trace: one series per requested column against step.
ChartSpec trace_chart(std::istream& trace_csv, const std::vector<std::string>& columns);
/// Pareto: validation and test error (and gaps) against thr.
ChartSpec pareto_chart(std::istream& pareto_csv);

enum class CsvKind { results, trace, pareto, unknown };
/// Classifies a CSV by its header line.
CsvKind classify_csv_header(const std::string& header);

}  // namespace fairlab
