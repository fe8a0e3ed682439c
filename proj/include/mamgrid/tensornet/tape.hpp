#pragma once

#include <functional>
#include <vector>

#include "mamgrid/tensornet/parameters.hpp"

namespace mamgrid::tensornet {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Each op appends a node holding its value and, when
/// any input needs a gradient, a closure propagating the node's gradient
/// to its inputs. Parameter leaves accumulate into Parameter::grad on
/// backward(). A tape supports one backward pass.
///
/// Batched graph tensors use a stacked layout: B graphs of N nodes form an
/// (N*B) x d matrix whose row n + N*b is node n of graph b.
class Tape {
 public:
  Var constant(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); empty for nodes that need none.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a (r x c) plus a 1 x c row broadcast over rows.
  Var add_bias(Var a, Var bias);
  Var relu(Var a);
  /// a_norm (N x N, constant) applied to every graph of a stacked (N*B) x d
  /// tensor. `a_norm` must outlive the tape.
  Var propagate(const Matrix& a_norm, Var h);
  /// s(b, n) = <x row n + N*b, z row b>; x stacked (N*B) x d, z B x d.
  Var node_scores(Var x, Var z);
  Var softmax_rows(Var a);
  /// Row softmax restricted to entries where mask == 1 (others exactly 0).
  /// `logits` is B x K or 1 x K (broadcast over the mask's B rows).
  Var masked_softmax_rows(Var logits, const Matrix& mask);
  /// out(b, :) = sum_n w(b, n) * x(n + N*b, :); w B x N, x stacked.
  Var weighted_node_sum(Var w, Var x);
  /// Per-graph mean over nodes of a stacked tensor: B x d.
  Var node_mean(Var x, Eigen::Index nodes);
  Var concat_cols(Var a, Var b);
  /// Dueling combination Q = V + A - mean_row(A); v is B x 1, adv B x K.
  Var dueling(Var v, Var adv);
  /// out(b) = q(b, index[b]); B x 1.
  Var pick(Var q, const std::vector<std::size_t>& index);
  /// mean((pred - target)^2) over all entries; 1 x 1.
  Var mse(Var pred, const Matrix& target);
  Var sum(Var a);

  /// Requires a 1 x 1 node. Throws std::logic_error on a second call.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, const Matrix&)> backprop;
  };

  Var push(Matrix value, std::initializer_list<Var> inputs, std::function<void(Tape&, const Matrix&)> backprop);
  void accumulate(Var v, const Matrix& g);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

/// ReLU(a_norm * h * w) on a stacked tensor.
Var gcn_layer(Tape& tape, const Matrix& a_norm, Var h, Var w);

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
Matrix normalize_adjacency(const Matrix& adjacency);

/// Numerically stable softmax of a vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& v);

}  // namespace mamgrid::tensornet
