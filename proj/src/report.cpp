#include "clab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

#include "clab/csvio.hpp"
#include "clab/metrics.hpp"

namespace clab {
namespace {

double to_double(const std::string& cell) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    throw std::runtime_error("bad numeric cell '" + cell + "'");
  }
  return v;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) comma = line.size();
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

// seed directories ordered by their numeric suffix
std::vector<std::pair<std::size_t, std::filesystem::path>> seed_dirs(
    const std::filesystem::path& arm_dir) {
  std::vector<std::pair<std::size_t, std::filesystem::path>> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(arm_dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed", 0) != 0) continue;
    const std::string digits = name.substr(4);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos) {
      continue;
    }
    dirs.emplace_back(std::stoul(digits), entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<std::string> sorted_subdirs(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::runtime_error("CSV is missing column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty CSV: " + file.string());
  }
  table.header = split_commas(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_commas(line);
    if (cells.size() != table.header.size()) {
      throw std::runtime_error("ragged CSV row in " + file.string());
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_line_chart(const std::filesystem::path& file,
                      const std::string& title,
                      const std::vector<ChartSeries>& series) {
  const double width = 640, height = 400;
  const double left = 60, right = 20, top = 40, bottom = 40;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double max_x = 1e-12, max_y = 1e-12;
  for (const ChartSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  max_y *= 1.05;

  auto px = [&](double x) { return left + plot_w * (x / max_x); };
  auto py = [&](double y) { return top + plot_h * (1.0 - y / max_y); };
  char buf[160];

  std::ofstream out = open_out(file);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"400\" viewBox=\"0 0 640 400\">\n";
  out << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"22\" font-size=\"15\" "
                "font-family=\"sans-serif\">",
                left);
  out << buf << title << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                left, top, left, top + plot_h);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                left, top + plot_h, left + plot_w, top + plot_h);
  out << buf;
  for (int tick = 0; tick <= 4; ++tick) {
    const double fx = max_x * tick / 4.0;
    const double fy = max_y * tick / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                  "font-family=\"sans-serif\" text-anchor=\"middle\">%g</text>\n",
                  px(fx), top + plot_h + 16.0, fx);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" "
                  "font-family=\"sans-serif\" text-anchor=\"end\">%.3g</text>\n",
                  left - 6.0, py(fy) + 4.0, fy);
    out << buf;
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[s].points) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x), py(y));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "font-family=\"sans-serif\" fill=\"%s\">",
                  left + plot_w - 120.0, top + 16.0 + 16.0 * s, color);
    out << buf << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

std::vector<std::string> write_lm_report(const std::filesystem::path& run_dir,
                                         bool emit_svg, double tau) {
  struct ArmData {
    std::string name;
    std::vector<std::size_t> seeds;
    std::vector<CsvTable> tables;  // aligned with seeds
  };
  std::vector<ArmData> arms;
  for (const std::string& name : sorted_subdirs(run_dir)) {
    ArmData arm;
    arm.name = name;
    for (const auto& [seed, dir] : seed_dirs(run_dir / name)) {
      const std::filesystem::path stages = dir / "stages.csv";
      if (!std::filesystem::exists(stages)) continue;
      arm.seeds.push_back(seed);
      arm.tables.push_back(read_csv(stages));
    }
    if (!arm.seeds.empty()) arms.push_back(std::move(arm));
  }
  if (arms.empty()) return {};

  std::vector<std::string> written;
  const auto track = [&written](const char* name) {
    written.push_back(name);
    return name;
  };

  {
    std::ofstream out = open_out(run_dir / track("report_retention.csv"));
    out << "arm,seed,stage,kr_split0,kr_total\n";
    for (const ArmData& arm : arms) {
      for (std::size_t s = 0; s < arm.seeds.size(); ++s) {
        const CsvTable& t = arm.tables[s];
        const std::size_t c_stage = t.column("stage");
        const std::size_t c_kr0 = t.column("kr_split0");
        const std::size_t c_krt = t.column("kr_total");
        for (const auto& row : t.rows) {
          out << arm.name << ',' << arm.seeds[s] << ',' << row[c_stage] << ','
              << row[c_kr0] << ',' << row[c_krt] << '\n';
        }
      }
    }
  }
  {
    std::ofstream out = open_out(run_dir / track("report_kl.csv"));
    out << "arm,seed,stage,kl_unigram,kl_bigram\n";
    for (const ArmData& arm : arms) {
      for (std::size_t s = 0; s < arm.seeds.size(); ++s) {
        const CsvTable& t = arm.tables[s];
        const std::size_t c_stage = t.column("stage");
        const std::size_t c_uni = t.column("kl_unigram");
        const std::size_t c_bi = t.column("kl_bigram");
        for (const auto& row : t.rows) {
          out << arm.name << ',' << arm.seeds[s] << ',' << row[c_stage] << ','
              << row[c_uni] << ',' << row[c_bi] << '\n';
        }
      }
    }
  }
  {
    std::ofstream out = open_out(run_dir / track("report_confidence.csv"));
    out << "arm,seed,stage,conf_self,conf_heldout,masked_fraction\n";
    for (const ArmData& arm : arms) {
      for (std::size_t s = 0; s < arm.seeds.size(); ++s) {
        const CsvTable& t = arm.tables[s];
        const std::size_t c_stage = t.column("stage");
        const std::size_t c_self = t.column("conf_self");
        const std::size_t c_held = t.column("conf_heldout");
        const std::size_t c_mask = t.column("masked_fraction");
        for (const auto& row : t.rows) {
          out << arm.name << ',' << arm.seeds[s] << ',' << row[c_stage] << ','
              << row[c_self] << ',' << row[c_held] << ',' << row[c_mask]
              << '\n';
        }
      }
    }
  }

  std::vector<ChartSeries> retention_series, kl_series;
  {
    std::ofstream out = open_out(run_dir / track("report_summary.csv"));
    out << "arm,seeds,median_ttf,median_final_kr_split0,median_final_kl_unigram\n";
    for (const ArmData& arm : arms) {
      std::vector<double> ttfs, final_kr, final_kl;
      std::map<std::size_t, std::vector<double>> kr_by_stage, kl_by_stage;
      for (const CsvTable& t : arm.tables) {
        const std::size_t c_kr0 = t.column("kr_split0");
        const std::size_t c_uni = t.column("kl_unigram");
        const std::size_t c_stage = t.column("stage");
        std::vector<double> series;
        for (const auto& row : t.rows) {
          const double kr = to_double(row[c_kr0]);
          const double kl = to_double(row[c_uni]);
          const auto stage = static_cast<std::size_t>(to_double(row[c_stage]));
          series.push_back(kr);
          kr_by_stage[stage].push_back(kr);
          kl_by_stage[stage].push_back(kl);
        }
        // a run that never fails is censored one stage past the end
        const auto ttf = time_to_failure(series, tau);
        ttfs.push_back(static_cast<double>(ttf.value_or(series.size())));
        final_kr.push_back(series.back());
        final_kl.push_back(to_double(t.rows.back()[c_uni]));
      }
      out << arm.name << ',' << arm.seeds.size() << ',' << fmt12(median(ttfs))
          << ',' << fmt12(median(final_kr)) << ',' << fmt12(median(final_kl))
          << '\n';

      ChartSeries kr_line{arm.name, {}};
      ChartSeries kl_line{arm.name, {}};
      for (const auto& [stage, values] : kr_by_stage) {
        kr_line.points.emplace_back(static_cast<double>(stage), median(values));
      }
      for (const auto& [stage, values] : kl_by_stage) {
        kl_line.points.emplace_back(static_cast<double>(stage), median(values));
      }
      retention_series.push_back(std::move(kr_line));
      kl_series.push_back(std::move(kl_line));
    }
  }

  if (emit_svg) {
    write_line_chart(run_dir / track("report_retention.svg"),
                     "median split-0 retention by stage", retention_series);
    write_line_chart(run_dir / track("report_kl.svg"),
                     "median unigram drift by stage", kl_series);
  }
  return written;
}

std::vector<std::string> write_gmm_report(const std::filesystem::path& run_dir,
                                          bool emit_svg) {
  struct ArmData {
    std::string name;
    CsvTable table;
  };
  std::vector<ArmData> arms;
  for (const std::string& name : sorted_subdirs(run_dir)) {
    const std::filesystem::path metrics = run_dir / name / "gmm_metrics.csv";
    if (!std::filesystem::exists(metrics)) continue;
    arms.push_back({name, read_csv(metrics)});
  }
  if (arms.empty()) return {};

  std::vector<std::string> written;
  std::vector<ChartSeries> trace_series;
  {
    std::ofstream out = open_out(run_dir / "report_gmm.csv");
    written.push_back("report_gmm.csv");
    out << "arm,generation,trace,mean_displacement,sym_kl,points_kept\n";
    for (const ArmData& arm : arms) {
      const CsvTable& t = arm.table;
      const std::size_t c_gen = t.column("generation");
      const std::size_t c_trace = t.column("trace");
      const std::size_t c_disp = t.column("mean_displacement");
      const std::size_t c_kl = t.column("sym_kl");
      const std::size_t c_kept = t.column("points_kept");
      ChartSeries line{arm.name, {}};
      for (const auto& row : t.rows) {
        out << arm.name << ',' << row[c_gen] << ',' << row[c_trace] << ','
            << row[c_disp] << ',' << row[c_kl] << ',' << row[c_kept] << '\n';
        line.points.emplace_back(to_double(row[c_gen]), to_double(row[c_trace]));
      }
      trace_series.push_back(std::move(line));
    }
  }
  {
    std::ofstream out = open_out(run_dir / "report_gmm_summary.csv");
    written.push_back("report_gmm_summary.csv");
    out << "arm,final_trace,trace_retained_fraction,final_sym_kl\n";
    for (const ArmData& arm : arms) {
      const CsvTable& t = arm.table;
      const double first = to_double(t.rows.front()[t.column("trace")]);
      const double last = to_double(t.rows.back()[t.column("trace")]);
      const double kl = to_double(t.rows.back()[t.column("sym_kl")]);
      out << arm.name << ',' << fmt12(last) << ',' << fmt12(last / first)
          << ',' << fmt12(kl) << '\n';
    }
  }
  if (emit_svg) {
    write_line_chart(run_dir / "report_gmm_trace.svg",
                     "within-component covariance trace by generation",
                     trace_series);
    written.push_back("report_gmm_trace.svg");
  }
  return written;
}

}  // namespace clab
