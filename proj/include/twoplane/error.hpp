#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace twoplane {

// Raised when an input violates a documented precondition.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

struct IterationRecord {
  enum class Phase { start, descent, newton };
  Phase phase;
  double residual;
  double area;
};

// Solver gave up; the history tells how far it got.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, std::vector<IterationRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<IterationRecord>& history() const noexcept { return history_; }

private:
  std::vector<IterationRecord> history_;
};

inline const char* phase_name(IterationRecord::Phase p) {
  switch (p) {
    case IterationRecord::Phase::start: return "start";
    case IterationRecord::Phase::descent: return "descent";
    case IterationRecord::Phase::newton: return "newton";
  }
  return "?";
}

} // namespace twoplane
