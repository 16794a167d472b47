#include "ppmas/trace.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace ppmas::sim {

std::string Trace::emit_csv() const {
  std::ostringstream os;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) os << ',';
    os << columns[c];
  }
  os << '\n';
  char buf[32];
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) os << ',';
      std::snprintf(buf, sizeof(buf), "%.9g", row[c]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

Trace Trace::parse_csv(const std::string& text) {
  Trace trace;
  std::istringstream is(text);
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string field;
    if (line_no == 1) {
      while (std::getline(fields, field, ',')) trace.columns.push_back(field);
      if (trace.columns.empty()) {
        throw Error("csv", "line 1: empty header");
      }
      continue;
    }
    std::vector<double> row;
    while (std::getline(fields, field, ',')) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') {
        throw Error("csv", "line " + std::to_string(line_no) +
                               ": malformed number '" + field + "'");
      }
      row.push_back(v);
    }
    if (row.size() != trace.columns.size()) {
      throw Error("csv", "line " + std::to_string(line_no) + ": expected " +
                             std::to_string(trace.columns.size()) +
                             " fields, got " + std::to_string(row.size()));
    }
    trace.rows.push_back(std::move(row));
  }
  if (trace.columns.empty()) {
    throw Error("csv", "line 1: empty document");
  }
  return trace;
}

int Trace::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return static_cast<int>(c);
  }
  return -1;
}

std::vector<double> Trace::column_values(const std::string& name) const {
  const int c = column(name);
  if (c < 0) {
    throw Error("column_mismatch", "trace has no column '" + name + "'");
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[static_cast<std::size_t>(c)]);
  return out;
}

std::string format_faults(const FaultLog& log) {
  std::ostringstream os;
  char buf[32];
  for (const Fault& f : log.events) {
    std::snprintf(buf, sizeof(buf), "%.9g", f.t);
    os << "t=" << buf << " step=" << f.step << " kind=" << f.kind
       << " detail=" << f.detail << '\n';
  }
  return os.str();
}

}  // namespace ppmas::sim
