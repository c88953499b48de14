#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include <nodenorm/dense.hpp>
#include <nodenorm/errors.hpp>
#include <nodenorm/rng.hpp>
#include <nodenorm/sparse_adjacency.hpp>

namespace nodenorm {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }

  const Matrix& value() const;
  /// Gradient after Tape::backward. Only leaves keep their gradient.
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of dense-matrix operations.
///
/// Nodes are appended in evaluation order, so inputs always precede the
/// nodes that consume them and backward is a single reverse sweep. A tape is
/// single-threaded and lives for one forward/backward pass. Operations that
/// reference external data (adjacency, labels) require it to outlive the
/// tape.
class Tape {
 public:
  /// Receives the gradient of the recorded node and accumulates into inputs.
  using BackwardFn = std::function<void(const Matrix& out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Appends an op result. The node requires grad iff any input does; the
  /// backward rule is dropped otherwise.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds `g` into the gradient of node `id` when that node requires grad.
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[id];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  /// Seeds d(root)/d(root) = 1 and visits every node once in reverse order.
  /// `root` must be 1×1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  // deque keeps references returned by value()/grad() stable while recording.
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

// Differentiable operations. Shapes are checked eagerly and reported as
// ShapeError.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var scale(Var x, double factor);
Var relu(Var x);
Var square(Var x);
/// Sum of all entries as a 1×1 value.
Var sum(Var x);

/// adj · H with adjoint adjᵀ · G. `adj` must outlive the tape.
Var spmm(const SparseAdjacency<double>& adj, Var h);

/// Inverted dropout. Identity when `training` is false or `rate` is 0.
Var dropout(Var x, double rate, Rng& rng, bool training);

/// Mean over masked rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const int> labels, const std::vector<bool>& mask);

/// lambda · Σ|w| over every entry of every parameter; subgradient sign(0) = 0.
Var l1_penalty(std::span<const Var> params, double lambda);

/// Max over entries of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|) using central
/// differences with step `h`. `f` must build a 1×1 result from the leaf it
/// receives.
double gradient_check(const std::function<Var(Tape&, Var)>& f, const Matrix& at, double h = 1e-5);

/// Uniform Glorot initialization in [-s, s], s = sqrt(6 / (rows + cols)).
Matrix glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Adam moments for a fixed list of parameters.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update with coupled L2 decay (grad += weight_decay · w).
/// Moments are zero-initialised on the first call.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state, double lr,
               double weight_decay);

}  // namespace nodenorm
