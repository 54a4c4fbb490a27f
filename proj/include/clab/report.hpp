#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace clab {

// Minimal CSV reader for the project's own outputs: comma-separated, one
// header row, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws on a miss
};

CsvTable read_csv(const std::filesystem::path& file);

double median(std::vector<double> values);  // throws on empty input

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

void write_line_chart(const std::filesystem::path& file,
                      const std::string& title,
                      const std::vector<ChartSeries>& series);

// Aggregates a staged-experiment run laid out as
// <run>/<arm>/seed<k>/stages.csv into plot-ready CSVs plus a per-arm summary
// (median time to failure, final retention, final drift). Never recomputes;
// only reads existing CSVs. Returns the files written, relative to run_dir.
std::vector<std::string> write_lm_report(const std::filesystem::path& run_dir,
                                         bool emit_svg, double tau = 0.75);

// Aggregates a mixture run laid out as <run>/<arm>/gmm_metrics.csv.
std::vector<std::string> write_gmm_report(const std::filesystem::path& run_dir,
                                          bool emit_svg);

}  // namespace clab
