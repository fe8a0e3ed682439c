#include "mamgrid/tensornet/parameters.hpp"

#include <cmath>
#include <set>

namespace mamgrid::tensornet {

using nlohmann::json;

Parameter& ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) throw ShapeError("duplicate parameter '" + name + "'");
  if (rows <= 0 || cols <= 0) throw ShapeError("parameter '" + name + "' has an empty shape");
  params_.push_back({name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ShapeError("unknown parameter '" + name + "'");
}

const Parameter& ParameterSet::at(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ShapeError("unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw ShapeError("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    const Parameter& src = other[i];
    Parameter& dst = params_[i];
    if (src.name != dst.name || src.value.rows() != dst.value.rows() || src.value.cols() != dst.value.cols()) {
      throw ShapeError("parameter '" + dst.name + "' does not match '" + src.name + "'");
    }
    dst.value = src.value;
  }
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

void glorot_uniform(Parameter& p, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = u(rng);
  }
}

json parameters_to_json(const ParameterSet& params) {
  json doc = json::object();
  for (const auto& p : params) {
    doc[p.name] = {{"rows", p.value.rows()},
                   {"cols", p.value.cols()},
                   {"data", std::vector<double>(p.value.data(), p.value.data() + p.value.size())}};
  }
  return doc;
}

void parameters_from_json(const json& doc, ParameterSet& params) {
  if (!doc.is_object()) throw ShapeError("tensors: expected a JSON object");
  if (doc.size() != params.size()) throw ShapeError("tensors: parameter count mismatch");
  for (auto& p : params) {
    if (!doc.contains(p.name)) throw ShapeError("tensors: missing '" + p.name + "'");
    const json& t = doc.at(p.name);
    try {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (rows != p.value.rows() || cols != p.value.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ShapeError("tensors: shape mismatch for '" + p.name + "'");
      }
      p.value = Eigen::Map<const Matrix>(data.data(), rows, cols);
    } catch (const json::exception& e) {
      throw ShapeError("tensors: '" + p.name + "': " + e.what());
    }
    if (!p.value.allFinite()) throw NumericError("tensors: non-finite value in '" + p.name + "'");
  }
}

}  // namespace mamgrid::tensornet
