#include <nodenorm/autodiff.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace nodenorm {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ValidationError("operands recorded on different tapes");
}

}  // namespace

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ValidationError("input recorded on a different tape");
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  if (!node.requires_grad) throw ValidationError("gradient requested for a value without requires_grad");
  return node.grad;
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw ValidationError("backward root belongs to another tape");
  if (root.rows() != 1 || root.cols() != 1) {
    throw ValidationError("backward requires a scalar root, got " + shape_of(root.value()));
  }
  for (Node& node : nodes_) {
    if (node.requires_grad) node.grad.resize(0, 0);
  }
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad = Matrix::Ones(1, 1);

  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.is_leaf || !node.requires_grad || node.grad.size() == 0) continue;
    node.backward(node.grad, *this);
    node.grad.resize(0, 0);
  }
  for (Node& node : nodes_) {
    if (node.is_leaf && node.requires_grad && node.grad.size() == 0) {
      node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    }
  }
}

Var matmul(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_of(a.value()) + " times " + shape_of(b.value()));
  }
  Matrix out = a.value() * b.value();
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](const Matrix& g, Tape& t) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: " + shape_of(a.value()) + " plus " + shape_of(b.value()));
  }
  Matrix out = a.value() + b.value();
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](const Matrix& g, Tape& t) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var scale(Var x, double factor) {
  const auto ix = x.id();
  return x.tape().record(x.value() * factor, {x},
                         [ix, factor](const Matrix& g, Tape& t) { t.accumulate(ix, g * factor); });
}

Var relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](const Matrix& g, Tape& t) {
    const Matrix& in = t.value(ix);
    t.accumulate(ix, (in.array() > 0.0).select(g, 0.0));
  });
}

Var square(Var x) {
  const auto ix = x.id();
  return x.tape().record(x.value().array().square().matrix(), {x}, [ix](const Matrix& g, Tape& t) {
    t.accumulate(ix, (2.0 * g.array() * t.value(ix).array()).matrix());
  });
}

Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const auto ix = x.id();
  const auto rows = x.rows();
  const auto cols = x.cols();
  return x.tape().record(std::move(out), {x}, [ix, rows, cols](const Matrix& g, Tape& t) {
    t.accumulate(ix, Matrix::Constant(rows, cols, g(0, 0)));
  });
}

Var spmm(const SparseAdjacency<double>& adj, Var h) {
  Matrix out = spmm(adj, h.value());
  const auto ih = h.id();
  const auto* op = &adj;
  return h.tape().record(std::move(out), {h}, [ih, op](const Matrix& g, Tape& t) {
    t.accumulate(ih, spmm_transposed(*op, g));
  });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      mask(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  Matrix out = x.value().cwiseProduct(mask);
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, mask = std::move(mask)](const Matrix& g, Tape& t) {
    t.accumulate(ix, g.cwiseProduct(mask));
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels, const std::vector<bool>& mask) {
  const Matrix& z = logits.value();
  const auto n = z.rows();
  const auto classes = z.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n || static_cast<Eigen::Index>(mask.size()) != n) {
    throw ShapeError("softmax_cross_entropy: labels/mask length differs from logits rows");
  }
  const auto count = std::count(mask.begin(), mask.end(), true);
  if (count == 0) throw ValidationError("softmax_cross_entropy: mask selects no nodes");

  Matrix probs = Matrix::Zero(n, classes);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || y >= classes) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
    const double top = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - top).eval();
    const double log_norm = std::log(shifted.exp().sum());
    loss += log_norm - shifted(y);
    probs.row(i) = (shifted - log_norm).exp().matrix();
  }
  const double inv = 1.0 / static_cast<double>(count);
  Matrix out(1, 1);
  out(0, 0) = loss * inv;

  // probs becomes (softmax - onehot) / |mask|, zero on unmasked rows.
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    probs(i, labels[i]) -= 1.0;
    probs.row(i) *= inv;
  }
  const auto il = logits.id();
  return logits.tape().record(std::move(out), {logits},
                              [il, delta = std::move(probs)](const Matrix& g, Tape& t) {
                                t.accumulate(il, delta * g(0, 0));
                              });
}

Var l1_penalty(std::span<const Var> params, double lambda) {
  if (params.empty()) throw ValidationError("l1_penalty: no parameters");
  if (lambda < 0.0) throw ConfigError("l1_penalty: lambda must be non-negative");
  Tape& tape = params.front().tape();
  double total = 0.0;
  std::vector<std::size_t> ids;
  for (const Var& p : params) {
    total += p.value().cwiseAbs().sum();
    ids.push_back(p.id());
  }
  Matrix out(1, 1);
  out(0, 0) = lambda * total;
  return tape.record(std::move(out), params, [ids, lambda](const Matrix& g, Tape& t) {
    for (auto id : ids) {
      if (!t.requires_grad(id)) continue;
      const Matrix& w = t.value(id);
      t.accumulate(id, (w.array().sign() * (lambda * g(0, 0))).matrix());
    }
  });
}

double gradient_check(const std::function<Var(Tape&, Var)>& f, const Matrix& at, double h) {
  Matrix analytic;
  {
    Tape tape;
    Var x = tape.leaf(at, true);
    Var y = f(tape, x);
    if (y.rows() != 1 || y.cols() != 1) {
      throw ValidationError("gradient_check: function must return a scalar");
    }
    tape.backward(y);
    analytic = x.grad();
  }
  auto evaluate = [&](const Matrix& point) {
    Tape tape;
    Var x = tape.leaf(point, false);
    return f(tape, x).value()(0, 0);
  };

  double worst = 0.0;
  Matrix point = at;
  for (Eigen::Index i = 0; i < at.rows(); ++i) {
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      const double original = point(i, j);
      point(i, j) = original + h;
      const double up = evaluate(point);
      point(i, j) = original - h;
      const double down = evaluate(point);
      point(i, j) = original;
      const double numeric = (up - down) / (2.0 * h);
      const double ad = analytic(i, j);
      const double denom = std::max({1.0, std::abs(ad), std::abs(numeric)});
      worst = std::max(worst, std::abs(ad - numeric) / denom);
    }
  }
  return worst;
}

Matrix glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw ConfigError("glorot_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return w;
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state, double lr,
               double weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Matrix& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter list");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].rows() != params[k].rows() || grads[k].cols() != params[k].cols() ||
        state.m[k].rows() != params[k].rows() || state.m[k].cols() != params[k].cols()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(k));
    }
  }

  ++state.t;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix g = grads[k] + weight_decay * params[k];
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g.cwiseAbs2();
    params[k].array() -= lr * (state.m[k].array() / correction1) /
                         ((state.v[k].array() / correction2).sqrt() + state.eps);
  }
}

}  // namespace nodenorm
