#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppmas {

// All recoverable failures carry a stable machine-readable code next to the
// human-readable message. Codes are matched by the CLI and by the validator
// tests, so they are part of the public contract.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

// Runtime anomalies that do not abort a simulation, but mark the run as
// failed: funnel clamps, observer funnel violations, non-finite states.
struct Fault {
  double t = 0.0;
  long step = -1;
  std::string kind;
  std::string detail;
};

struct FaultLog {
  std::vector<Fault> events;

  void add(double t, long step, std::string kind, std::string detail) {
    events.push_back({t, step, std::move(kind), std::move(detail)});
  }
  bool empty() const noexcept { return events.empty(); }
};

}  // namespace ppmas
