#pragma once

#include <string>
#include <vector>

#include <nodenorm/autodiff.hpp>
#include <nodenorm/normalization.hpp>
#include <nodenorm/sparse_adjacency.hpp>

namespace nodenorm {

enum class Architecture {
  kGCN,   ///< every layer is PROP + TRAN
  kTGCN,  ///< hidden layers are TRAN only
  kPGCN,  ///< hidden layers are PROP only (parameter-free)
};

enum class Placement {
  kAfterConv,   ///< spmm → matmul → relu → norm
  kInsideConv,  ///< spmm → norm → matmul → relu
};

struct NormKind {
  enum class Type { kNone, kNodeNorm, kLayerNorm, kLayerNormStar, kLayerNormMS };

  Type type = Type::kNone;
  int p = 1;  ///< NodeNorm root, >= 1

  static NormKind none() { return {}; }
  static NormKind node_norm(int p) { return {Type::kNodeNorm, p}; }
  static NormKind layer_norm() { return {Type::kLayerNorm, 1}; }
  static NormKind layer_norm_star() { return {Type::kLayerNormStar, 1}; }
  static NormKind layer_norm_ms() { return {Type::kLayerNormMS, 1}; }

  bool active() const { return type != Type::kNone; }
  bool has_affine() const { return type == Type::kLayerNorm; }

  /// "none", "nodenorm1", "layernorm", "layernorm-star", "layernorm-ms".
  std::string name() const;
  static NormKind parse(const std::string& text);

  friend bool operator==(const NormKind&, const NormKind&) = default;
};

std::string to_string(Architecture arch);
std::string to_string(Placement placement);
Architecture parse_architecture(const std::string& text);
Placement parse_placement(const std::string& text);

struct ModelSpec {
  int depth = 2;
  int input_dim = 0;
  int hidden_dim = 64;
  int num_classes = 0;
  Architecture architecture = Architecture::kGCN;
  NormKind norm;
  Placement placement = Placement::kAfterConv;
  bool residual = false;
  double dropout_rate = 0.0;

  /// Throws ConfigError when the spec cannot be built.
  void validate() const;
};

enum class LayerKind { kGraphConv, kTransform, kPropagate };

/// Kind of each of the depth layers: GC first and last; the hidden stack
/// depends on the architecture.
std::vector<LayerKind> layer_plan(const ModelSpec& spec);

/// Whether layer `l` (0-based) carries a normalization / a residual skip.
bool layer_is_normalized(const ModelSpec& spec, int l);
bool layer_has_residual(const ModelSpec& spec, int l);

struct Model {
  ModelSpec spec;
  /// One matrix per learned layer, in layer order.
  std::vector<Matrix> weights;
  /// LayerNorm α/β (1×d), one pair per normalized layer; empty otherwise.
  std::vector<Matrix> norm_alpha;
  std::vector<Matrix> norm_beta;

  std::size_t parameter_count() const;
};

/// Glorot weights, α = 1, β = 0.
Model build_model(const ModelSpec& spec, Rng& rng);

/// Model parameters registered as leaves of one tape.
struct BoundParams {
  std::vector<Var> weights;
  std::vector<Var> norm_alpha;
  std::vector<Var> norm_beta;
};

BoundParams bind(const Model& model, Tape& tape, bool requires_grad);

/// One GC layer (adj != nullptr) or a pure TRAN layer (adj == nullptr).
/// `alpha`/`beta` are only read for full LayerNorm.
Var gc_layer(Var h, const SparseAdjacency<double>* adj, Var weight, NormKind norm, Placement placement,
             bool apply_relu, Var alpha = {}, Var beta = {});

/// Applies `norm` row-wise; identity for NormKind::none().
Var apply_norm(Var h, NormKind norm, Var alpha = {}, Var beta = {});

struct ForwardPass {
  Var logits;
  /// Output of every layer, length == depth; the last entry is the logits.
  std::vector<Var> hidden;
  BoundParams params;
};

/// Records the whole model on `tape`. Dropout only fires when `training`.
ForwardPass forward(const Model& model, Tape& tape, Var x, const SparseAdjacency<double>& adj, bool training,
                    Rng& rng);

/// Same, reading the parameters from `params` instead of binding fresh leaves.
ForwardPass forward(const Model& model, Tape& tape, Var x, const SparseAdjacency<double>& adj, bool training,
                    Rng& rng, BoundParams params);

struct Evaluation {
  Matrix logits;
  std::vector<Matrix> hidden;
};

/// Eval-mode forward detached from any tape.
Evaluation evaluate(const Model& model, const Matrix& x, const SparseAdjacency<double>& adj);

}  // namespace nodenorm
