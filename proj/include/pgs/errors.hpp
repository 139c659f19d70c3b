#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pgs {

/// Malformed argument (bad order, non-positive support, shape mismatch, ...).
class InvalidParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Moment matrix not invertible at an evaluation point: too few kernel
/// centers in the support, or condition estimate above threshold. The
/// caller should enlarge the support size.
class SingularMomentError : public std::runtime_error {
 public:
  SingularMomentError(std::string msg, int point_index, double condition)
      : std::runtime_error(std::move(msg)),
        point_index(point_index),
        condition(condition) {}

  int point_index;   // measurement-point index, -1 for free-standing points
  double condition;  // estimate at failure, 0 if rank-deficient outright
};

/// Shape matrix rank-deficient in the least-squares fit.
class RankDeficiencyError : public std::runtime_error {
 public:
  RankDeficiencyError(std::string msg, double smallest_singular_value)
      : std::runtime_error(std::move(msg)),
        smallest_singular_value(smallest_singular_value) {}

  double smallest_singular_value;
};

/// Deformed bond length collapsed to (numerical) zero.
class DegenerateBondError : public std::runtime_error {
 public:
  DegenerateBondError(std::string msg, int node, int neighbor)
      : std::runtime_error(std::move(msg)), node(node), neighbor(neighbor) {}

  int node;
  int neighbor;
};

/// Operator evaluation requested at nodes whose horizon is not fully
/// covered by the point set and no boundary data was supplied.
class MissingBoundaryError : public std::runtime_error {
 public:
  MissingBoundaryError(std::string msg, std::vector<int> nodes)
      : std::runtime_error(std::move(msg)), nodes(std::move(nodes)) {}

  std::vector<int> nodes;
};

/// Degenerate force-state model (e.g. influence kernel vanishing on the
/// whole horizon).
class InvalidModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nonlinear solve diverged; carries the residual history for diagnosis.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(std::string msg, std::vector<double> residual_history)
      : std::runtime_error(std::move(msg)),
        residual_history(std::move(residual_history)) {}

  std::vector<double> residual_history;
};

/// Relative-residual loss undefined: a sample has ||b|| = 0.
class ZeroDenominatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Snapshot/CSV parse failure with file position.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, std::string path, int line)
      : std::runtime_error(std::move(msg)), path(std::move(path)), line(line) {}

  std::string path;
  int line;  // 1-based, 0 when not tied to a specific line
};

/// Filesystem failure surfaced with the offending path.
class IoError : public std::runtime_error {
 public:
  IoError(std::string msg, std::string path)
      : std::runtime_error(std::move(msg)), path(std::move(path)) {}

  std::string path;
};

}  // namespace pgs
