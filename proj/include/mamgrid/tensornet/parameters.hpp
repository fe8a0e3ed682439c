#pragma once

#include <deque>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace mamgrid::tensornet {

using Matrix = Eigen::MatrixXd;

/// Raised when a value or gradient stops being finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on operand shape mismatch or malformed tensor files.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value
};

/// Ordered, named parameters with value semantics: copying a set copies
/// every tensor. Element addresses stay valid while parameters are added.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;

  /// Copies values from a set with the same names and shapes.
  void copy_values_from(const ParameterSet& other);

  double grad_norm() const;

 private:
  std::deque<Parameter> params_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)) with fan_in = rows, fan_out = cols.
void glorot_uniform(Parameter& p, std::mt19937_64& rng);

/// {name: {rows, cols, data (column-major)}}; doubles round-trip exactly.
nlohmann::json parameters_to_json(const ParameterSet& params);
/// Loads values into an existing set; names and shapes must match exactly.
void parameters_from_json(const nlohmann::json& doc, ParameterSet& params);

}  // namespace mamgrid::tensornet
