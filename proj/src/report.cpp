#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aggterm/error.hpp"
#include "aggterm/harness.hpp"

namespace aggterm {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_report_csv(std::ostream& out, const SweepReport& report) {
  out << "size,sample";
  for (int i = 0; i < report.dim; ++i) out << ",out_" << i;
  out << '\n';
  for (const auto& r : report.rows) {
    out << r.size << ',' << r.sample;
    for (double v : r.output) out << ',' << format_real(v);
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const SweepReport& report) {
  out << "size,dim,mean,std,dist_to_limit\n";
  for (const auto& s : report.summary)
    for (Eigen::Index i = 0; i < s.mean.size(); ++i) {
      out << s.size << ',' << i << ',' << format_real(s.mean[i]) << ',' << format_real(s.std[i]) << ',';
      if (s.dist_to_limit) out << format_real(*s.dist_to_limit);
      out << '\n';
    }
}

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

template <class Writer>
void to_file(const std::string& path, Writer&& write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write(out);
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string coord(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

void write_plot_svg(std::ostream& out, const SweepReport& report) {
  const double width = 640, height = 400, left = 60, right = 20, top = 20, bottom = 50;
  const auto& summary = report.summary;
  if (summary.empty()) throw ConfigError("nothing to plot");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : summary) {
    lo = std::min(lo, (s.mean - s.std).minCoeff());
    hi = std::max(hi, (s.mean + s.std).maxCoeff());
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double xmin = std::log10(summary.front().size), xmax = std::log10(summary.back().size);
  auto px = [&](int n) {
    const double span = xmax - xmin;
    const double f = span > 0 ? (std::log10(n) - xmin) / span : 0.5;
    return left + f * (width - left - right);
  };
  auto py = [&](double y) { return top + (hi - y) / (hi - lo) * (height - top - bottom); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
  for (const auto& s : summary)
    out << "<text x=\"" << coord(px(s.size)) << "\" y=\"" << height - bottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << s.size << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << coord(py(hi)) << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_real(hi).substr(0, 6) << "</text>\n";
  out << "<text x=\"" << left - 6 << "\" y=\"" << coord(py(lo)) << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_real(lo).substr(0, 6) << "</text>\n";
  out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">graph size (log scale)</text>\n";

  const Eigen::Index d = summary.front().mean.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    const char* color = kPalette[i % 10];
    out << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const auto& s : summary) out << coord(px(s.size)) << ',' << coord(py(s.mean[i] + s.std[i])) << ' ';
    for (auto it = summary.rbegin(); it != summary.rend(); ++it)
      out << coord(px(it->size)) << ',' << coord(py(it->mean[i] - it->std[i])) << ' ';
    out << "\"/>\n";
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    out << "<polyline class=\"mean\" fill=\"none\" stroke-width=\"2\" stroke=\"" << kPalette[i % 10]
        << "\" points=\"";
    for (const auto& s : summary) out << coord(px(s.size)) << ',' << coord(py(s.mean[i])) << ' ';
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

void write_report_csv(const std::string& path, const SweepReport& report) {
  to_file(path, [&](std::ostream& o) { write_report_csv(o, report); });
}
void write_summary_csv(const std::string& path, const SweepReport& report) {
  to_file(path, [&](std::ostream& o) { write_summary_csv(o, report); });
}
void write_plot_svg(const std::string& path, const SweepReport& report) {
  to_file(path, [&](std::ostream& o) { write_plot_svg(o, report); });
}

SweepReport read_report_csv(std::istream& in, const std::optional<Vector>& limit) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("size,sample", 0) != 0)
    throw ConfigError("report CSV must start with a size,sample header");
  SweepReport report;
  report.dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != report.dim + 2)
      throw ConfigError("report CSV line " + std::to_string(lineno) + " has the wrong number of fields");
    SweepRow row;
    try {
      row.size = std::stoi(cells[0]);
      row.sample = std::stoi(cells[1]);
      row.output.resize(report.dim);
      for (int i = 0; i < report.dim; ++i) row.output[i] = std::stod(cells[i + 2]);
    } catch (const std::exception&) {
      throw ConfigError("report CSV line " + std::to_string(lineno) + " is not numeric");
    }
    report.rows.push_back(std::move(row));
  }
  report.limit = limit;
  report.summary = summarize(report.rows, limit);
  return report;
}

}  // namespace aggterm
