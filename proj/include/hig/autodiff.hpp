#pragma once

// Tape-based reverse-mode differentiation over a static graph of vector-valued
// primitives. A Graph is built once per experiment (network composed with a
// physics solver) and evaluated for many (parameters, input) pairs through a
// reusable Tape. Reverse passes accept a block of k cotangents at once, which
// is how per-sample Jacobians are assembled: one pass with the m x m identity.

#include "hig/linalg.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hig::ad {

/// Raised when a forward evaluation produces NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Location of one dense layer inside the flat parameter vector. The weight
/// block is stored column-major with `rows` = fan-out and `cols` = fan-in.
struct LayerSlice {
  Index weight_offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index bias_offset = 0;

  Index weight_size() const { return rows * cols; }
};

/// Flat network parameter vector with per-layer offsets.
struct ParamVector {
  Vector values;
  std::vector<LayerSlice> layers;

  Index size() const { return values.size(); }

  Eigen::Map<const Matrix> weight(std::size_t layer) const {
    const auto& l = layers.at(layer);
    return {values.data() + l.weight_offset, l.rows, l.cols};
  }
  Eigen::Map<const Vector> bias(std::size_t layer) const {
    const auto& l = layers.at(layer);
    return {values.data() + l.bias_offset, l.rows};
  }

  /// Throws std::invalid_argument unless the layer slices tile [0, size())
  /// exactly and every value is finite.
  void validate() const;
};

/// Strongly typed handle to a node of a Graph.
struct NodeId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op : std::uint8_t {
  Input,
  Constant,
  Affine,
  Tanh,
  Relu,
  Square,
  Cube,
  LinComb,
  Mul,
  ScalarMul,
  MatVec,
  Dot,
  Slice,
  Concat,
  ComplexMul,
  TridiagSolve,
};

const char* op_name(Op op);

/// Handle to a constant matrix stored once in a Graph and shared by several
/// matvec nodes.
struct MatrixHandle {
  std::int32_t index = -1;
};

/// Complex vectors of length n are encoded as real vectors of length 2n with
/// the real parts first and the imaginary parts second.
class Graph {
 public:
  struct Node {
    Op op = Op::Input;
    std::vector<NodeId> inputs;
    Index dim = 0;
    Index offset = 0;       // into the tape's value buffer
    std::int32_t aux = -1;  // index into constants / matrices / coefficient lists
    Index start = 0;        // Slice start
    LayerSlice layer;       // Affine parameters
    std::string label;
  };

  NodeId input(Index dim, std::string label = "input");
  NodeId constant(Vector value, std::string label = "constant");
  NodeId affine(NodeId x, const LayerSlice& layer, std::string label = "affine");
  NodeId tanh(NodeId x, std::string label = "tanh");
  NodeId relu(NodeId x, std::string label = "relu");
  NodeId square(NodeId x, std::string label = "square");
  NodeId cube(NodeId x, std::string label = "cube");
  /// sum_i coefficient_i * node_i; all terms share one dimension.
  NodeId lincomb(const std::vector<std::pair<double, NodeId>>& terms, std::string label = "lincomb");
  NodeId add(NodeId a, NodeId b, std::string label = "add") { return lincomb({{1.0, a}, {1.0, b}}, std::move(label)); }
  NodeId sub(NodeId a, NodeId b, std::string label = "sub") { return lincomb({{1.0, a}, {-1.0, b}}, std::move(label)); }
  NodeId scale(double c, NodeId a, std::string label = "scale") { return lincomb({{c, a}}, std::move(label)); }
  /// Elementwise product.
  NodeId mul(NodeId a, NodeId b, std::string label = "mul");
  /// s * v for a one-dimensional node s.
  NodeId scalar_mul(NodeId s, NodeId v, std::string label = "scalar_mul");
  /// m * x for a constant matrix m.
  NodeId matvec(Matrix m, NodeId x, std::string label = "matvec");
  MatrixHandle add_matrix(Matrix m);
  NodeId matvec(MatrixHandle m, NodeId x, std::string label = "matvec");
  NodeId dot(NodeId a, NodeId b, std::string label = "dot");
  NodeId slice(NodeId x, Index start, Index length, std::string label = "slice");
  NodeId concat(const std::vector<NodeId>& parts, std::string label = "concat");
  /// Elementwise complex product of two complex-pair vectors.
  NodeId complex_mul(NodeId a, NodeId b, std::string label = "complex_mul");
  /// Solves T x = rhs for a complex tridiagonal T given by its three bands
  /// (complex-pair encoded, lengths n-1, n, n-1).
  NodeId tridiag_solve(NodeId lower, NodeId diag, NodeId upper, NodeId rhs, std::string label = "tridiag_solve");

  void set_output(NodeId out);

  NodeId input_node() const { return input_; }
  NodeId output_node() const { return output_; }
  Index input_dim() const { return node(input_).dim; }
  Index output_dim() const { return node(output_).dim; }
  Index value_size() const { return value_size_; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Smallest parameter vector length the affine nodes can address.
  Index required_params() const { return required_params_; }

  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id.index)); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Vector& constant_value(const Node& n) const { return constants_[static_cast<std::size_t>(n.aux)]; }
  const Matrix& matrix_value(const Node& n) const { return matrices_[static_cast<std::size_t>(n.aux)]; }
  const std::vector<double>& coefficients(const Node& n) const { return coefficients_[static_cast<std::size_t>(n.aux)]; }

 private:
  NodeId push(Node n);
  Index dim_of(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<Vector> constants_;
  std::vector<Matrix> matrices_;
  std::vector<std::vector<double>> coefficients_;
  NodeId input_;
  NodeId output_;
  Index value_size_ = 0;
  Index required_params_ = 0;
};

/// Reusable evaluation buffers for one Graph. Not thread-safe; use one Tape per
/// thread.
class Tape {
 public:
  explicit Tape(const Graph& graph);

  /// Forward pass; returns a view of the output node's value.
  Eigen::Map<const Vector> forward(const ParamVector& theta, const Eigen::Ref<const Vector>& input);

  /// Reverse pass over the most recent forward pass. `cotangents` is m x k;
  /// column c of `param_grads` (t x k) receives += c-th cotangent^T * dy/dtheta.
  void backward(const ParamVector& theta, const Eigen::Ref<const Matrix>& cotangents,
                Eigen::Ref<Matrix> param_grads);

  /// Value of an arbitrary node from the last forward pass.
  Eigen::Map<const Vector> value(NodeId id) const;

  const Graph& graph() const { return *graph_; }

 private:
  const Graph* graph_;
  Vector values_;
  Matrix adjoints_;
};

/// Stacked per-sample Jacobians and loss gradients of one mini-batch.
/// Row block i of `jac` is dy_i/dtheta; block i of `loss_grads` is dL/dy_i.
struct JacobianStack {
  RowMajorMatrix jac;
  Vector loss_grads;
  Index batch = 0;
  Index out_dim = 0;

  void validate() const;
};

Vector evaluate(const Graph& g, const ParamVector& theta, const Eigen::Ref<const Vector>& input);

/// cotangent^T * dy/dtheta.
Vector vjp(const Graph& g, const ParamVector& theta, const Eigen::Ref<const Vector>& input,
           const Eigen::Ref<const Vector>& cotangent);

/// (b*m) x t matrix whose row i*m + j is the vjp of sample i with unit
/// cotangent e_j.
RowMajorMatrix per_sample_jacobian(const Graph& g, const ParamVector& theta, std::span<const Vector> inputs);

}  // namespace hig::ad
