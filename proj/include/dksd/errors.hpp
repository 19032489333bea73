#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dksd {

// Input violates a documented precondition or type invariant.
struct validation_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Operands have incompatible dimensions.
struct dimension_error : validation_error {
  using validation_error::validation_error;
};

// A spherical coordinate sits on (or too close to) the chart singularity
// sin(theta^i) = 0, where log J and the scores diverge.
struct pole_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iterative routine hit its iteration cap before reaching tolerance.
struct not_converged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A rejection sampler saw too many consecutive rejections; the parameters
// are almost certainly corrupted.
struct rejection_stall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Root finding for the ACG envelope parameter failed to bracket a solution.
struct tuning_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested significance level has no entry in a built-in critical-value
// table.
struct unsupported_alpha : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Text input (model spec or plan file) failed to parse.
struct parse_error : std::runtime_error {
  parse_error(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + what),
        line(line),
        column(column) {}

  std::size_t line;
  std::size_t column;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A data CSV row could not be parsed.
struct format_error : std::runtime_error {
  format_error(const std::string& what, std::size_t row)
      : std::runtime_error("row " + std::to_string(row) + ": " + what),
        row(row) {}

  std::size_t row;
};

// A data CSV row is too far from the unit sphere to renormalize silently.
struct norm_error : std::runtime_error {
  norm_error(std::size_t row, double deviation)
      : std::runtime_error("row " + std::to_string(row) +
                           ": vector norm deviates from 1 by " +
                           std::to_string(deviation)),
        row(row),
        deviation(deviation) {}

  std::size_t row;
  double deviation;
};

}  // namespace dksd
