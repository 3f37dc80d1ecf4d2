#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dgplan {

/// Malformed case/config input. Carries the 1-based line when known.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input parsed but violates a model invariant (cycle, missing swing, ...).
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Voltage collapsed during the sweep; holds the max-|dV| trace per iteration.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class singular_matrix_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgplan
