#include <nodenorm/model.hpp>

#include <string>

namespace nodenorm {

std::string NormKind::name() const {
  switch (type) {
    case Type::kNone:
      return "none";
    case Type::kNodeNorm:
      return "nodenorm" + std::to_string(p);
    case Type::kLayerNorm:
      return "layernorm";
    case Type::kLayerNormStar:
      return "layernorm-star";
    case Type::kLayerNormMS:
      return "layernorm-ms";
  }
  return "none";
}

NormKind NormKind::parse(const std::string& text) {
  if (text == "none") return none();
  if (text == "layernorm") return layer_norm();
  if (text == "layernorm-star") return layer_norm_star();
  if (text == "layernorm-ms") return layer_norm_ms();
  if (text.rfind("nodenorm", 0) == 0) {
    const std::string digits = text.substr(8);
    if (digits.empty()) return node_norm(1);
    int p = 0;
    try {
      std::size_t used = 0;
      p = std::stoi(digits, &used);
      if (used != digits.size()) p = 0;
    } catch (const std::exception&) {
      p = 0;
    }
    if (p < 1) throw ConfigError("invalid NodeNorm root in '" + text + "'");
    return node_norm(p);
  }
  throw ConfigError("unknown norm '" + text + "'");
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kGCN:
      return "gcn";
    case Architecture::kTGCN:
      return "tgcn";
    case Architecture::kPGCN:
      return "pgcn";
  }
  return "gcn";
}

std::string to_string(Placement placement) {
  return placement == Placement::kAfterConv ? "after" : "inside";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "gcn") return Architecture::kGCN;
  if (text == "tgcn" || text == "t-gcn") return Architecture::kTGCN;
  if (text == "pgcn" || text == "p-gcn") return Architecture::kPGCN;
  throw ConfigError("unknown architecture '" + text + "'");
}

Placement parse_placement(const std::string& text) {
  if (text == "after") return Placement::kAfterConv;
  if (text == "inside") return Placement::kInsideConv;
  throw ConfigError("unknown placement '" + text + "'");
}

void ModelSpec::validate() const {
  if (depth < 2) throw ConfigError("model depth must be >= 2");
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (norm.type == NormKind::Type::kNodeNorm) {
    if (norm.p < 1) throw ConfigError("NodeNorm root p must be >= 1");
    const int narrowest = placement == Placement::kInsideConv ? std::min(input_dim, hidden_dim) : hidden_dim;
    if (narrowest < 2) throw ConfigError("NodeNorm needs at least 2 features at every normalized layer");
  }
}

std::vector<LayerKind> layer_plan(const ModelSpec& spec) {
  std::vector<LayerKind> plan(static_cast<std::size_t>(spec.depth), LayerKind::kGraphConv);
  for (int l = 1; l + 1 < spec.depth; ++l) {
    if (spec.architecture == Architecture::kTGCN) plan[l] = LayerKind::kTransform;
    if (spec.architecture == Architecture::kPGCN) plan[l] = LayerKind::kPropagate;
  }
  return plan;
}

namespace {

bool is_learned(LayerKind kind) { return kind != LayerKind::kPropagate; }

}  // namespace

bool layer_is_normalized(const ModelSpec& spec, int l) {
  if (!spec.norm.active() || l + 1 >= spec.depth) return false;
  return is_learned(layer_plan(spec)[l]);
}

bool layer_has_residual(const ModelSpec& spec, int l) {
  if (!spec.residual || l == 0 || l + 1 >= spec.depth) return false;
  return is_learned(layer_plan(spec)[l]);
}

std::size_t Model::parameter_count() const {
  std::size_t count = 0;
  for (const auto& w : weights) count += static_cast<std::size_t>(w.size());
  for (const auto& a : norm_alpha) count += static_cast<std::size_t>(a.size());
  for (const auto& b : norm_beta) count += static_cast<std::size_t>(b.size());
  return count;
}

Model build_model(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  Model model;
  model.spec = spec;
  const auto plan = layer_plan(spec);
  for (int l = 0; l < spec.depth; ++l) {
    if (!is_learned(plan[l])) continue;
    const int in = l == 0 ? spec.input_dim : spec.hidden_dim;
    const int out = l + 1 == spec.depth ? spec.num_classes : spec.hidden_dim;
    model.weights.push_back(glorot_init(in, out, rng));
    if (layer_is_normalized(spec, l) && spec.norm.has_affine()) {
      const int width = spec.placement == Placement::kInsideConv ? in : out;
      model.norm_alpha.push_back(Matrix::Ones(1, width));
      model.norm_beta.push_back(Matrix::Zero(1, width));
    }
  }
  return model;
}

BoundParams bind(const Model& model, Tape& tape, bool requires_grad) {
  BoundParams params;
  for (const auto& w : model.weights) params.weights.push_back(tape.leaf(w, requires_grad));
  for (const auto& a : model.norm_alpha) params.norm_alpha.push_back(tape.leaf(a, requires_grad));
  for (const auto& b : model.norm_beta) params.norm_beta.push_back(tape.leaf(b, requires_grad));
  return params;
}

Var apply_norm(Var h, NormKind norm, Var alpha, Var beta) {
  switch (norm.type) {
    case NormKind::Type::kNone:
      return h;
    case NormKind::Type::kNodeNorm:
      return node_norm(h, norm.p);
    case NormKind::Type::kLayerNorm:
      return layer_norm(h, alpha, beta, LayerNormMode::kFull);
    case NormKind::Type::kLayerNormStar:
      return layer_norm(h, alpha, beta, LayerNormMode::kStar);
    case NormKind::Type::kLayerNormMS:
      return layer_norm(h, alpha, beta, LayerNormMode::kMS);
  }
  return h;
}

Var gc_layer(Var h, const SparseAdjacency<double>* adj, Var weight, NormKind norm, Placement placement,
             bool apply_relu, Var alpha, Var beta) {
  Var out = adj != nullptr ? spmm(*adj, h) : h;
  if (placement == Placement::kInsideConv) out = apply_norm(out, norm, alpha, beta);
  out = matmul(out, weight);
  if (apply_relu) out = relu(out);
  if (placement == Placement::kAfterConv) out = apply_norm(out, norm, alpha, beta);
  return out;
}

ForwardPass forward(const Model& model, Tape& tape, Var x, const SparseAdjacency<double>& adj, bool training,
                    Rng& rng) {
  return forward(model, tape, x, adj, training, rng, bind(model, tape, training));
}

ForwardPass forward(const Model& model, Tape& tape, Var x, const SparseAdjacency<double>& adj, bool training,
                    Rng& rng, BoundParams params) {
  const ModelSpec& spec = model.spec;
  if (x.rows() != adj.n()) {
    throw ShapeError("forward: feature rows (" + std::to_string(x.rows()) + ") differ from node count (" +
                     std::to_string(adj.n()) + ")");
  }
  if (x.cols() != spec.input_dim) throw ShapeError("forward: feature width differs from model input_dim");

  if (params.weights.size() != model.weights.size() || params.norm_alpha.size() != model.norm_alpha.size() ||
      params.norm_beta.size() != model.norm_beta.size()) {
    throw ShapeError("forward: bound parameters do not match the model");
  }
  ForwardPass pass;
  pass.params = std::move(params);
  const auto plan = layer_plan(spec);
  std::size_t weight_index = 0;
  std::size_t norm_index = 0;
  Var h = x;
  for (int l = 0; l < spec.depth; ++l) {
    if (plan[l] == LayerKind::kPropagate) {
      h = spmm(adj, h);
      pass.hidden.push_back(h);
      continue;
    }
    const bool last = l + 1 == spec.depth;
    const NormKind norm = layer_is_normalized(spec, l) ? spec.norm : NormKind::none();
    Var alpha;
    Var beta;
    if (norm.has_affine()) {
      alpha = pass.params.norm_alpha[norm_index];
      beta = pass.params.norm_beta[norm_index];
    }
    if (norm.active()) ++norm_index;

    Var input = dropout(h, spec.dropout_rate, rng, training);
    const SparseAdjacency<double>* prop = plan[l] == LayerKind::kGraphConv ? &adj : nullptr;
    Var out = gc_layer(input, prop, pass.params.weights[weight_index++], norm, spec.placement, !last, alpha, beta);
    if (layer_has_residual(spec, l)) out = add(out, h);
    h = out;
    pass.hidden.push_back(h);
  }
  pass.logits = h;
  return pass;
}

Evaluation evaluate(const Model& model, const Matrix& x, const SparseAdjacency<double>& adj) {
  Tape tape;
  Rng unused(0);
  const ForwardPass pass = forward(model, tape, tape.constant(x), adj, false, unused);
  Evaluation result;
  result.logits = pass.logits.value();
  for (const Var& h : pass.hidden) result.hidden.push_back(h.value());
  return result;
}

}  // namespace nodenorm
