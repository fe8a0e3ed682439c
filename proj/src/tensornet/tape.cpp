#include "mamgrid/tensornet/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mamgrid::tensornet {

namespace {

void expect(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

Matrix row_softmax(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    out.row(r) = (a.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// Softmax backward per row: dA = S .* (G - rowsum(G .* S)).
Matrix softmax_backward(const Matrix& s, const Matrix& g) {
  const Eigen::VectorXd dot = (g.array() * s.array()).rowwise().sum();
  return (s.array() * (g.array().colwise() - dot.array())).matrix();
}

}  // namespace

Var Tape::push(Matrix value, std::initializer_list<Var> inputs,
               std::function<void(Tape&, const Matrix&)> backprop) {
  if (!value.allFinite()) throw NumericError("non-finite value produced on the tape");
  Node node;
  node.value = std::move(value);
  for (Var v : inputs) node.needs_grad = node.needs_grad || needs(v);
  if (node.needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, {}, nullptr);
  nodes_[v.id].needs_grad = true;
  nodes_[v.id].param = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  expect(x.cols() == y.rows(), "matmul", shape(x) + " * " + shape(y));
  return push(x * y, {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::add(Var a, Var b) {
  expect(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add",
         shape(value(a)) + " + " + shape(value(b)));
  return push(value(a) + value(b), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::add_bias(Var a, Var bias) {
  const Matrix& x = value(a);
  const Matrix& c = value(bias);
  expect(c.rows() == 1 && c.cols() == x.cols(), "add_bias", shape(x) + " + " + shape(c));
  Matrix out = x.rowwise() + c.row(0);
  return push(std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

Var Tape::relu(Var a) {
  return push(value(a).cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g, 0.0));
  });
}

Var Tape::propagate(const Matrix& a_norm, Var h) {
  const Matrix& x = value(h);
  const Eigen::Index n = a_norm.rows();
  expect(a_norm.cols() == n && n > 0 && x.rows() % n == 0, "propagate", shape(a_norm) + " over " + shape(x));
  const Eigen::Index wide = x.size() / n;
  Matrix out(x.rows(), x.cols());
  Eigen::Map<Matrix>(out.data(), n, wide).noalias() = a_norm * Eigen::Map<const Matrix>(x.data(), n, wide);
  const Matrix* a = &a_norm;
  return push(std::move(out), {h}, [a, h, n, wide](Tape& t, const Matrix& g) {
    Matrix back(g.rows(), g.cols());
    Eigen::Map<Matrix>(back.data(), n, wide).noalias() =
        a->transpose() * Eigen::Map<const Matrix>(g.data(), n, wide);
    t.accumulate(h, back);
  });
}

Var Tape::node_scores(Var x, Var z) {
  const Matrix& xs = value(x);
  const Matrix& zs = value(z);
  const Eigen::Index b = zs.rows();
  expect(b > 0 && xs.rows() % b == 0 && xs.cols() == zs.cols(), "node_scores", shape(xs) + " . " + shape(zs));
  const Eigen::Index n = xs.rows() / b;
  Matrix out(b, n);
  for (Eigen::Index k = 0; k < b; ++k) out.row(k) = (xs.middleRows(k * n, n) * zs.row(k).transpose()).transpose();
  return push(std::move(out), {x, z}, [x, z, n, b](Tape& t, const Matrix& g) {
    const Matrix& xs = t.value(x);
    const Matrix& zs = t.value(z);
    if (t.needs(x)) {
      Matrix gx(xs.rows(), xs.cols());
      for (Eigen::Index k = 0; k < b; ++k) gx.middleRows(k * n, n) = g.row(k).transpose() * zs.row(k);
      t.accumulate(x, gx);
    }
    if (t.needs(z)) {
      Matrix gz(b, zs.cols());
      for (Eigen::Index k = 0; k < b; ++k) gz.row(k) = g.row(k) * xs.middleRows(k * n, n);
      t.accumulate(z, gz);
    }
  });
}

Var Tape::softmax_rows(Var a) {
  Var out = push(row_softmax(value(a)), {a}, nullptr);
  if (needs(a)) {
    const std::size_t self = out.id;
    nodes_[self].backprop = [a, self](Tape& t, const Matrix& g) {
      t.accumulate(a, softmax_backward(t.nodes_[self].value, g));
    };
  }
  return out;
}

Var Tape::masked_softmax_rows(Var logits, const Matrix& mask) {
  const Matrix& l = value(logits);
  expect(l.cols() == mask.cols() && (l.rows() == 1 || l.rows() == mask.rows()), "masked_softmax_rows",
         shape(l) + " with mask " + shape(mask));
  Matrix out = Matrix::Zero(mask.rows(), mask.cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    const auto row = l.row(l.rows() == 1 ? 0 : r);
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c) != 0.0) m = std::max(m, row(c));
    }
    expect(std::isfinite(m), "masked_softmax_rows", "row " + std::to_string(r) + " is fully masked");
    double total = 0.0;
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c) != 0.0) total += out(r, c) = std::exp(row(c) - m);
    }
    out.row(r) /= total;
  }
  Var v = push(std::move(out), {logits}, nullptr);
  if (needs(logits)) {
    const std::size_t self = v.id;
    const bool broadcast = l.rows() == 1;
    nodes_[self].backprop = [logits, self, broadcast](Tape& t, const Matrix& g) {
      // Masked entries have s = 0, so they receive no gradient.
      const Matrix d = softmax_backward(t.nodes_[self].value, g);
      t.accumulate(logits, broadcast ? Matrix(d.colwise().sum()) : d);
    };
  }
  return v;
}

Var Tape::weighted_node_sum(Var w, Var x) {
  const Matrix& ws = value(w);
  const Matrix& xs = value(x);
  const Eigen::Index b = ws.rows();
  const Eigen::Index n = ws.cols();
  expect(xs.rows() == n * b, "weighted_node_sum", shape(ws) + " over " + shape(xs));
  Matrix out(b, xs.cols());
  for (Eigen::Index k = 0; k < b; ++k) out.row(k) = ws.row(k) * xs.middleRows(k * n, n);
  return push(std::move(out), {w, x}, [w, x, n, b](Tape& t, const Matrix& g) {
    const Matrix& ws = t.value(w);
    const Matrix& xs = t.value(x);
    if (t.needs(w)) {
      Matrix gw(b, n);
      for (Eigen::Index k = 0; k < b; ++k) gw.row(k) = (xs.middleRows(k * n, n) * g.row(k).transpose()).transpose();
      t.accumulate(w, gw);
    }
    if (t.needs(x)) {
      Matrix gx(xs.rows(), xs.cols());
      for (Eigen::Index k = 0; k < b; ++k) gx.middleRows(k * n, n) = ws.row(k).transpose() * g.row(k);
      t.accumulate(x, gx);
    }
  });
}

Var Tape::node_mean(Var x, Eigen::Index nodes) {
  const Matrix& xs = value(x);
  expect(nodes > 0 && xs.rows() % nodes == 0, "node_mean", shape(xs) + " with " + std::to_string(nodes) + " nodes");
  const Eigen::Index b = xs.rows() / nodes;
  Matrix out(b, xs.cols());
  for (Eigen::Index k = 0; k < b; ++k) out.row(k) = xs.middleRows(k * nodes, nodes).colwise().mean();
  return push(std::move(out), {x}, [x, nodes, b](Tape& t, const Matrix& g) {
    Matrix gx(nodes * b, g.cols());
    for (Eigen::Index k = 0; k < b; ++k) {
      gx.middleRows(k * nodes, nodes) = (g.row(k) / static_cast<double>(nodes)).replicate(nodes, 1);
    }
    t.accumulate(x, gx);
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  expect(x.rows() == y.rows(), "concat_cols", shape(x) + " | " + shape(y));
  Matrix out(x.rows(), x.cols() + y.cols());
  out << x, y;
  const Eigen::Index split = x.cols();
  return push(std::move(out), {a, b}, [a, b, split](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g.leftCols(split));
    if (t.needs(b)) t.accumulate(b, g.rightCols(g.cols() - split));
  });
}

Var Tape::dueling(Var v, Var adv) {
  const Matrix& vs = value(v);
  const Matrix& as = value(adv);
  expect(vs.cols() == 1 && vs.rows() == as.rows() && as.cols() > 0, "dueling", shape(vs) + " with " + shape(as));
  const Eigen::VectorXd mean = as.rowwise().mean();
  Matrix out = (as.colwise() + (vs.col(0) - mean));
  return push(std::move(out), {v, adv}, [v, adv](Tape& t, const Matrix& g) {
    const Eigen::VectorXd row = g.rowwise().sum();
    if (t.needs(v)) t.accumulate(v, row);
    if (t.needs(adv)) {
      const double k = static_cast<double>(g.cols());
      t.accumulate(adv, g.colwise() - row / k);
    }
  });
}

Var Tape::pick(Var q, const std::vector<std::size_t>& index) {
  const Matrix& qs = value(q);
  expect(static_cast<Eigen::Index>(index.size()) == qs.rows(), "pick", "one index per row required");
  Matrix out(qs.rows(), 1);
  for (Eigen::Index r = 0; r < qs.rows(); ++r) {
    expect(static_cast<Eigen::Index>(index[r]) < qs.cols(), "pick", "index out of range");
    out(r, 0) = qs(r, static_cast<Eigen::Index>(index[r]));
  }
  return push(std::move(out), {q}, [q, index](Tape& t, const Matrix& g) {
    Matrix gq = Matrix::Zero(t.value(q).rows(), t.value(q).cols());
    for (std::size_t r = 0; r < index.size(); ++r) {
      gq(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(index[r])) = g(static_cast<Eigen::Index>(r), 0);
    }
    t.accumulate(q, gq);
  });
}

Var Tape::mse(Var pred, const Matrix& target) {
  const Matrix& p = value(pred);
  expect(p.rows() == target.rows() && p.cols() == target.cols() && p.size() > 0, "mse",
         shape(p) + " vs " + shape(target));
  if (!target.allFinite()) throw NumericError("mse: non-finite target");
  Matrix diff = p - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
  return push(std::move(out), {pred}, [pred, diff](Tape& t, const Matrix& g) {
    t.accumulate(pred, diff * (2.0 * g(0, 0) / static_cast<double>(diff.size())));
  });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("backward called twice on the same tape");
  expect(value(loss).size() == 1, "backward", "loss must be 1x1, got " + shape(value(loss)));
  backward_done_ = true;
  if (!needs(loss)) return;
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (!n.grad.allFinite()) throw NumericError("non-finite gradient during backward");
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backprop) {
      n.backprop(*this, n.grad);
    }
  }
}

Var gcn_layer(Tape& tape, const Matrix& a_norm, Var h, Var w) {
  return tape.relu(tape.propagate(a_norm, tape.matmul(h, w)));
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  expect(adjacency.rows() == adjacency.cols(), "normalize_adjacency", "square matrix required");
  const Matrix a = adjacency + Matrix::Identity(adjacency.rows(), adjacency.cols());
  const Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace mamgrid::tensornet
