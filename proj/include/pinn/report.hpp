#pragma once

#include <string>
#include <vector>

#include "pinn/trainer.hpp"

namespace pinn::report {

// 17 significant digits, enough for doubles to round-trip.
std::string format_double(double v);

// Schema: iter,wall_s,total_loss,term_<name>...,proposal_entropy with one row
// per training record.
void write_records_csv(const std::string& path,
                       const std::vector<trainer::TrainingRecord>& records,
                       const std::vector<std::string>& term_names);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
};

Csv read_csv(const std::string& path);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal self-contained line chart, one polyline per series, log y axis.
// Output bytes are a pure function of the arguments.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<Series>& series);

}  // namespace pinn::report
