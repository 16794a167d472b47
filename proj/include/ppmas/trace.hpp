#pragma once

#include <string>
#include <vector>

#include "ppmas/errors.hpp"

namespace ppmas::sim {

// Uniform-grid run record. Column names follow the CSV contract:
//   t, x_<i>_<c>, u_<i>_<c>, xhat_<i>_<r>_<c>, err_<i>_<r>, delta_<i>_<r>,
//   rhohat_<task>, rho_<task>, e_<task>, Gamma_<task>
struct Trace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Floats printed with 9 significant digits; emit(parse(emit(x))) == emit(x).
  std::string emit_csv() const;
  static Trace parse_csv(const std::string& text);  // Error("csv") with line

  // Column index by exact name; -1 when absent.
  int column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

std::string format_faults(const FaultLog& log);

}  // namespace ppmas::sim
