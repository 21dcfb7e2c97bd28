#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace proxidist {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Grid = std::vector<double>;

// Error taxonomy mirrors the CLI exit codes: 2 input, 3 numerical, 4 config.
enum class ErrorKind : int { Input = 2, Numerical = 3, Config = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& what)
      : std::runtime_error(what), kind_(kind), stage_(std::move(stage)) {}
  ErrorKind kind() const { return kind_; }
  const std::string& stage() const { return stage_; }

 private:
  ErrorKind kind_;
  std::string stage_;
};

[[noreturn]] inline void fail_input(const std::string& stage, const std::string& msg) {
  throw Error(ErrorKind::Input, stage, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& stage, const std::string& msg) {
  throw Error(ErrorKind::Numerical, stage, msg);
}
[[noreturn]] inline void fail_config(const std::string& stage, const std::string& msg) {
  throw Error(ErrorKind::Config, stage, msg);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
  double length() const { return hi - lo; }
};

}  // namespace proxidist
