#include "pinn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pinn/errors.hpp"

namespace pinn::report {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  return out;
}

}  // namespace

void write_records_csv(const std::string& path,
                       const std::vector<trainer::TrainingRecord>& records,
                       const std::vector<std::string>& term_names) {
  auto out = open_out(path);
  out << "iter,wall_s,total_loss";
  for (const auto& name : term_names) out << ",term_" << name;
  out << ",proposal_entropy\n";
  for (const auto& r : records) {
    out << r.iteration << ',' << format_double(r.wall_s) << ',' << format_double(r.total_loss);
    for (double t : r.term_losses) out << ',' << format_double(t);
    out << ',' << format_double(r.proposal_entropy) << '\n';
  }
  if (!out) throw ConfigError(path + ": write failed");
}

std::size_t Csv::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::invalid_argument("csv column '" + name + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) csv.header.push_back(cell);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != csv.header.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": wrong column count");
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

namespace {

// chart geometry
constexpr double kWidth = 960, kHeight = 600;
constexpr double kLeft = 90, kRight = 930, kTop = 60, kBottom = 540;
constexpr double kFloor = 1e-30;  // log-scale stand-in for nonpositive values

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Range {
  double lo = 0, hi = 1;
};

// round the step to a 1/2/5 decade multiple
double nice_step(double span, int target_ticks) {
  double raw = span / std::max(1, target_ticks);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<Series>& series) {
  Range xr{0, 1};
  double ylog_lo = 0, ylog_hi = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double y = std::log10(std::max(s.y[i], kFloor));
      if (first) {
        xr = {s.x[i], s.x[i]};
        ylog_lo = ylog_hi = y;
        first = false;
      } else {
        xr.lo = std::min(xr.lo, s.x[i]);
        xr.hi = std::max(xr.hi, s.x[i]);
        ylog_lo = std::min(ylog_lo, y);
        ylog_hi = std::max(ylog_hi, y);
      }
    }
  }
  if (xr.hi <= xr.lo) xr.hi = xr.lo + 1;
  ylog_lo = std::floor(ylog_lo);
  ylog_hi = std::ceil(ylog_hi);
  if (ylog_hi <= ylog_lo) ylog_hi = ylog_lo + 1;

  auto px = [&](double x) {
    return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kRight - kLeft);
  };
  auto py = [&](double y) {
    double ly = std::log10(std::max(y, kFloor));
    return kBottom - (ly - ylog_lo) / (ylog_hi - ylog_lo) * (kBottom - kTop);
  };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"14\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << (kWidth / 2) << "\" y=\"30\" text-anchor=\"middle\" font-size=\"18\">"
      << xml_escape(title) << "</text>\n";

  // frame
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << (kRight - kLeft)
      << "\" height=\"" << (kBottom - kTop) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks
  double xstep = nice_step(xr.hi - xr.lo, 6);
  double x0 = std::ceil(xr.lo / xstep) * xstep;
  for (double x = x0; x <= xr.hi + 1e-9 * xstep; x += xstep) {
    double p = px(x);
    out << "<line x1=\"" << format_short(p) << "\" y1=\"" << kBottom << "\" x2=\""
        << format_short(p) << "\" y2=\"" << (kBottom + 6) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << format_short(p) << "\" y=\"" << (kBottom + 24)
        << "\" text-anchor=\"middle\">" << format_short(x) << "</text>\n";
  }
  out << "<text x=\"" << ((kLeft + kRight) / 2) << "\" y=\"" << (kBottom + 48)
      << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";

  // y ticks, one per decade (thinned when the range is wide)
  int decades = static_cast<int>(ylog_hi - ylog_lo);
  int stride = std::max(1, (decades + 11) / 12);
  for (int d = 0; d <= decades; d += stride) {
    double ly = ylog_lo + d;
    double p = kBottom - (ly - ylog_lo) / (ylog_hi - ylog_lo) * (kBottom - kTop);
    out << "<line x1=\"" << (kLeft - 6) << "\" y1=\"" << format_short(p) << "\" x2=\"" << kLeft
        << "\" y2=\"" << format_short(p) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << format_short(p) << "\" x2=\"" << kRight
        << "\" y2=\"" << format_short(p) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << (kLeft - 10) << "\" y=\"" << format_short(p + 5)
        << "\" text-anchor=\"end\">1e" << format_short(ly) << "</text>\n";
  }
  out << "<text x=\"24\" y=\"" << ((kTop + kBottom) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 24 " << ((kTop + kBottom) / 2) << ")\">"
      << xml_escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << format_short(px(s.x[i])) << ',' << format_short(py(s.y[i]));
    }
    out << "\"/>\n";
    double ly = kTop + 20 + 22 * static_cast<double>(si);
    out << "<line x1=\"" << (kRight - 150) << "\" y1=\"" << format_short(ly - 5) << "\" x2=\""
        << (kRight - 120) << "\" y2=\"" << format_short(ly - 5) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << (kRight - 112) << "\" y=\"" << format_short(ly) << "\">"
        << xml_escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw ConfigError(path + ": write failed");
}

}  // namespace pinn::report
