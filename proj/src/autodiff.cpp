#include "hig/autodiff.hpp"

#include <sstream>

namespace hig::ad {

namespace {

using ConstBlock = Eigen::Block<const Matrix>;

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument("graph: " + what); }

linalg::ComplexVector to_complex(const Eigen::Ref<const Vector>& pair) {
  const Index n = pair.size() / 2;
  linalg::ComplexVector z(n);
  for (Index i = 0; i < n; ++i) z[i] = {pair[i], pair[n + i]};
  return z;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Affine: return "affine";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Square: return "square";
    case Op::Cube: return "cube";
    case Op::LinComb: return "lincomb";
    case Op::Mul: return "mul";
    case Op::ScalarMul: return "scalar_mul";
    case Op::MatVec: return "matvec";
    case Op::Dot: return "dot";
    case Op::Slice: return "slice";
    case Op::Concat: return "concat";
    case Op::ComplexMul: return "complex_mul";
    case Op::TridiagSolve: return "tridiag_solve";
  }
  return "?";
}

void ParamVector::validate() const {
  std::vector<std::pair<Index, Index>> spans;
  for (const auto& l : layers) {
    spans.emplace_back(l.weight_offset, l.weight_size());
    spans.emplace_back(l.bias_offset, l.rows);
  }
  std::sort(spans.begin(), spans.end());
  Index cursor = 0;
  for (const auto& [start, len] : spans) {
    if (start != cursor) throw std::invalid_argument("ParamVector: layer slices do not tile the parameter vector");
    cursor += len;
  }
  if (cursor != size()) throw std::invalid_argument("ParamVector: layer slices do not cover the parameter vector");
  if (!values.allFinite()) throw std::invalid_argument("ParamVector: non-finite parameter value");
}

void JacobianStack::validate() const {
  if (batch < 1 || out_dim < 1) throw std::invalid_argument("JacobianStack: empty batch");
  if (jac.rows() != batch * out_dim || loss_grads.size() != batch * out_dim)
    throw std::invalid_argument("JacobianStack: shapes inconsistent with batch * out_dim");
}

// ---------------------------------------------------------------------------
// Graph construction

Index Graph::dim_of(NodeId id) const {
  if (!id.valid() || static_cast<std::size_t>(id.index) >= nodes_.size()) fail("reference to unknown node");
  return nodes_[static_cast<std::size_t>(id.index)].dim;
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) dim_of(in);
  n.offset = value_size_;
  value_size_ += n.dim;
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

NodeId Graph::input(Index dim, std::string label) {
  if (input_.valid()) fail("graph already has an input node");
  if (dim < 1) fail("input dimension must be positive");
  Node n;
  n.op = Op::Input;
  n.dim = dim;
  n.label = std::move(label);
  input_ = push(std::move(n));
  return input_;
}

NodeId Graph::constant(Vector value, std::string label) {
  Node n;
  n.op = Op::Constant;
  n.dim = value.size();
  n.aux = static_cast<std::int32_t>(constants_.size());
  n.label = std::move(label);
  constants_.push_back(std::move(value));
  return push(std::move(n));
}

NodeId Graph::affine(NodeId x, const LayerSlice& layer, std::string label) {
  if (dim_of(x) != layer.cols) fail("affine input dimension does not match layer fan-in");
  Node n;
  n.op = Op::Affine;
  n.inputs = {x};
  n.dim = layer.rows;
  n.layer = layer;
  n.label = std::move(label);
  required_params_ = std::max({required_params_, layer.weight_offset + layer.weight_size(), layer.bias_offset + layer.rows});
  return push(std::move(n));
}

namespace {
Graph::Node unary(Op op, NodeId x, Index dim, std::string label) {
  Graph::Node n;
  n.op = op;
  n.inputs = {x};
  n.dim = dim;
  n.label = std::move(label);
  return n;
}
}  // namespace

NodeId Graph::tanh(NodeId x, std::string label) { return push(unary(Op::Tanh, x, dim_of(x), std::move(label))); }
NodeId Graph::relu(NodeId x, std::string label) { return push(unary(Op::Relu, x, dim_of(x), std::move(label))); }
NodeId Graph::square(NodeId x, std::string label) { return push(unary(Op::Square, x, dim_of(x), std::move(label))); }
NodeId Graph::cube(NodeId x, std::string label) { return push(unary(Op::Cube, x, dim_of(x), std::move(label))); }

NodeId Graph::lincomb(const std::vector<std::pair<double, NodeId>>& terms, std::string label) {
  if (terms.empty()) fail("lincomb needs at least one term");
  Node n;
  n.op = Op::LinComb;
  n.dim = dim_of(terms.front().second);
  std::vector<double> coeffs;
  for (const auto& [c, id] : terms) {
    if (dim_of(id) != n.dim) fail("lincomb terms differ in dimension");
    n.inputs.push_back(id);
    coeffs.push_back(c);
  }
  n.aux = static_cast<std::int32_t>(coefficients_.size());
  coefficients_.push_back(std::move(coeffs));
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b, std::string label) {
  if (dim_of(a) != dim_of(b)) fail("mul operands differ in dimension");
  Node n;
  n.op = Op::Mul;
  n.inputs = {a, b};
  n.dim = dim_of(a);
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId s, NodeId v, std::string label) {
  if (dim_of(s) != 1) fail("scalar_mul expects a one-dimensional scale node");
  Node n;
  n.op = Op::ScalarMul;
  n.inputs = {s, v};
  n.dim = dim_of(v);
  n.label = std::move(label);
  return push(std::move(n));
}

MatrixHandle Graph::add_matrix(Matrix m) {
  if (m.size() == 0) fail("empty matvec matrix");
  if (!m.allFinite()) fail("non-finite matvec matrix");
  matrices_.push_back(std::move(m));
  return MatrixHandle{static_cast<std::int32_t>(matrices_.size() - 1)};
}

NodeId Graph::matvec(MatrixHandle handle, NodeId x, std::string label) {
  if (handle.index < 0 || static_cast<std::size_t>(handle.index) >= matrices_.size()) fail("unknown matrix handle");
  const Matrix& m = matrices_[static_cast<std::size_t>(handle.index)];
  if (m.cols() != dim_of(x)) fail("matvec matrix columns do not match operand dimension");
  Node n;
  n.op = Op::MatVec;
  n.inputs = {x};
  n.dim = m.rows();
  n.aux = handle.index;
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::matvec(Matrix m, NodeId x, std::string label) { return matvec(add_matrix(std::move(m)), x, std::move(label)); }

NodeId Graph::dot(NodeId a, NodeId b, std::string label) {
  if (dim_of(a) != dim_of(b)) fail("dot operands differ in dimension");
  Node n;
  n.op = Op::Dot;
  n.inputs = {a, b};
  n.dim = 1;
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::slice(NodeId x, Index start, Index length, std::string label) {
  if (start < 0 || length < 1 || start + length > dim_of(x)) fail("slice out of range");
  Node n;
  n.op = Op::Slice;
  n.inputs = {x};
  n.dim = length;
  n.start = start;
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts, std::string label) {
  if (parts.empty()) fail("concat needs at least one part");
  Node n;
  n.op = Op::Concat;
  n.inputs = parts;
  for (NodeId p : parts) n.dim += dim_of(p);
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::complex_mul(NodeId a, NodeId b, std::string label) {
  if (dim_of(a) != dim_of(b) || dim_of(a) % 2 != 0) fail("complex_mul operands must be equal-length complex pairs");
  Node n;
  n.op = Op::ComplexMul;
  n.inputs = {a, b};
  n.dim = dim_of(a);
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::tridiag_solve(NodeId lower, NodeId diag, NodeId upper, NodeId rhs, std::string label) {
  const Index nd = dim_of(diag);
  if (nd % 2 != 0 || nd < 2) fail("tridiag_solve diagonal must be a complex-pair vector");
  const Index n = nd / 2;
  if (dim_of(lower) != 2 * (n - 1) || dim_of(upper) != 2 * (n - 1) || dim_of(rhs) != nd)
    fail("tridiag_solve band or rhs dimension mismatch");
  if (n < 2) fail("tridiag_solve needs at least a 2x2 system");
  Node node;
  node.op = Op::TridiagSolve;
  node.inputs = {lower, diag, upper, rhs};
  node.dim = nd;
  node.label = std::move(label);
  return push(std::move(node));
}

void Graph::set_output(NodeId out) {
  dim_of(out);
  if (!input_.valid()) fail("graph has no input node");
  output_ = out;
}

// ---------------------------------------------------------------------------
// Evaluation

Tape::Tape(const Graph& graph) : graph_(&graph), values_(Vector::Zero(graph.value_size())) {
  if (!graph.output_node().valid()) fail("graph output not set");
}

Eigen::Map<const Vector> Tape::value(NodeId id) const {
  const auto& n = graph_->node(id);
  return {values_.data() + n.offset, n.dim};
}

Eigen::Map<const Vector> Tape::forward(const ParamVector& theta, const Eigen::Ref<const Vector>& input) {
  const Graph& g = *graph_;
  if (input.size() != g.input_dim()) {
    std::ostringstream os;
    os << "input length " << input.size() << " does not match graph input dimension " << g.input_dim();
    fail(os.str());
  }
  if (theta.size() < g.required_params()) fail("parameter vector shorter than the graph requires");

  double* vals = values_.data();
  auto in = [&](const Graph::Node& n, std::size_t k) {
    const auto& src = g.node(n.inputs[k]);
    return Eigen::Map<const Vector>(vals + src.offset, src.dim);
  };

  const auto& nodes = g.nodes();
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const auto& n = nodes[idx];
    Eigen::Map<Vector> y(vals + n.offset, n.dim);
    switch (n.op) {
      case Op::Input: y = input; break;
      case Op::Constant: y = g.constant_value(n); break;
      case Op::Affine: {
        const auto& l = n.layer;
        Eigen::Map<const Matrix> w(theta.values.data() + l.weight_offset, l.rows, l.cols);
        Eigen::Map<const Vector> b(theta.values.data() + l.bias_offset, l.rows);
        y.noalias() = w * in(n, 0);
        y += b;
        break;
      }
      case Op::Tanh: y = in(n, 0).array().tanh(); break;
      case Op::Relu: y = in(n, 0).cwiseMax(0.0); break;
      case Op::Square: y = in(n, 0).array().square(); break;
      case Op::Cube: y = in(n, 0).array().cube(); break;
      case Op::LinComb: {
        const auto& c = g.coefficients(n);
        y = c[0] * in(n, 0);
        for (std::size_t k = 1; k < c.size(); ++k) y += c[k] * in(n, k);
        break;
      }
      case Op::Mul: y = in(n, 0).cwiseProduct(in(n, 1)); break;
      case Op::ScalarMul: y = in(n, 0)[0] * in(n, 1); break;
      case Op::MatVec: y.noalias() = g.matrix_value(n) * in(n, 0); break;
      case Op::Dot: y[0] = in(n, 0).dot(in(n, 1)); break;
      case Op::Slice: y = in(n, 0).segment(n.start, n.dim); break;
      case Op::Concat: {
        Index pos = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          auto part = in(n, k);
          y.segment(pos, part.size()) = part;
          pos += part.size();
        }
        break;
      }
      case Op::ComplexMul: {
        const Index h = n.dim / 2;
        auto a = in(n, 0);
        auto b = in(n, 1);
        for (Index i = 0; i < h; ++i) {
          const double ar = a[i], ai = a[h + i], br = b[i], bi = b[h + i];
          y[i] = ar * br - ai * bi;
          y[h + i] = ar * bi + ai * br;
        }
        break;
      }
      case Op::TridiagSolve: {
        linalg::ComplexTridiagonal t{to_complex(in(n, 0)), to_complex(in(n, 1)), to_complex(in(n, 2))};
        const auto x = linalg::solve_tridiagonal_complex(t, to_complex(in(n, 3)));
        const Index h = n.dim / 2;
        y.head(h) = x.real();
        y.tail(h) = x.imag();
        break;
      }
    }
    if (!y.allFinite()) {
      std::ostringstream os;
      os << "non-finite value at node #" << idx << " '" << n.label << "' (" << op_name(n.op) << ")";
      throw NonFiniteError(os.str());
    }
  }
  const auto& out = g.node(g.output_node());
  return {vals + out.offset, out.dim};
}

void Tape::backward(const ParamVector& theta, const Eigen::Ref<const Matrix>& cotangents,
                    Eigen::Ref<Matrix> param_grads) {
  const Graph& g = *graph_;
  const Index k = cotangents.cols();
  if (cotangents.rows() != g.output_dim()) fail("cotangent rows must equal the graph output dimension");
  if (param_grads.rows() != theta.size() || param_grads.cols() != k)
    fail("parameter gradient block must be t x k");

  if (adjoints_.rows() != g.value_size() || adjoints_.cols() != k) adjoints_.resize(g.value_size(), k);
  adjoints_.setZero();
  const auto& out = g.node(g.output_node());
  adjoints_.middleRows(out.offset, out.dim) = cotangents;

  const double* vals = values_.data();
  auto val = [&](NodeId id) {
    const auto& src = g.node(id);
    return Eigen::Map<const Vector>(vals + src.offset, src.dim);
  };
  auto adj = [&](NodeId id) {
    const auto& src = g.node(id);
    return adjoints_.middleRows(src.offset, src.dim);
  };

  const auto& nodes = g.nodes();
  for (std::size_t idx = nodes.size(); idx-- > 0;) {
    const auto& n = nodes[idx];
    if (n.op == Op::Input || n.op == Op::Constant) continue;
    const auto ybar = adjoints_.middleRows(n.offset, n.dim);
    Eigen::Map<const Vector> y(vals + n.offset, n.dim);

    switch (n.op) {
      case Op::Input:
      case Op::Constant: break;
      case Op::Affine: {
        const auto& l = n.layer;
        Eigen::Map<const Matrix> w(theta.values.data() + l.weight_offset, l.rows, l.cols);
        auto x = val(n.inputs[0]);
        adj(n.inputs[0]).noalias() += w.transpose() * ybar;
        // d(W x)/dW: column s of W receives x_s * ybar.
        for (Index s = 0; s < l.cols; ++s) {
          if (x[s] != 0.0) param_grads.middleRows(l.weight_offset + s * l.rows, l.rows) += x[s] * ybar;
        }
        param_grads.middleRows(l.bias_offset, l.rows) += ybar;
        break;
      }
      case Op::Tanh:
        adj(n.inputs[0]) += (1.0 - y.array().square()).matrix().asDiagonal() * ybar;
        break;
      case Op::Relu: {
        auto x = val(n.inputs[0]);
        adj(n.inputs[0]) += (x.array() > 0.0).cast<double>().matrix().asDiagonal() * ybar;
        break;
      }
      case Op::Square: adj(n.inputs[0]) += (2.0 * val(n.inputs[0])).asDiagonal() * ybar; break;
      case Op::Cube:
        adj(n.inputs[0]) += (3.0 * val(n.inputs[0]).array().square()).matrix().asDiagonal() * ybar;
        break;
      case Op::LinComb: {
        const auto& c = g.coefficients(n);
        for (std::size_t t = 0; t < c.size(); ++t) adj(n.inputs[t]) += c[t] * ybar;
        break;
      }
      case Op::Mul: {
        auto a = val(n.inputs[0]);
        auto b = val(n.inputs[1]);
        adj(n.inputs[0]) += b.asDiagonal() * ybar;
        adj(n.inputs[1]) += a.asDiagonal() * ybar;
        break;
      }
      case Op::ScalarMul: {
        const double s = val(n.inputs[0])[0];
        auto v = val(n.inputs[1]);
        adj(n.inputs[0]) += v.transpose() * ybar;
        adj(n.inputs[1]) += s * ybar;
        break;
      }
      case Op::MatVec: adj(n.inputs[0]).noalias() += g.matrix_value(n).transpose() * ybar; break;
      case Op::Dot: {
        auto a = val(n.inputs[0]);
        auto b = val(n.inputs[1]);
        adj(n.inputs[0]).noalias() += b * ybar;
        adj(n.inputs[1]).noalias() += a * ybar;
        break;
      }
      case Op::Slice: adj(n.inputs[0]).middleRows(n.start, n.dim) += ybar; break;
      case Op::Concat: {
        Index pos = 0;
        for (NodeId part : n.inputs) {
          const Index d = g.node(part).dim;
          adj(part) += ybar.middleRows(pos, d);
          pos += d;
        }
        break;
      }
      case Op::ComplexMul: {
        const Index h = n.dim / 2;
        auto a = val(n.inputs[0]);
        auto b = val(n.inputs[1]);
        auto abar = adj(n.inputs[0]);
        auto bbar = adj(n.inputs[1]);
        // abar = conj(b) * ybar and bbar = conj(a) * ybar in complex form.
        for (Index i = 0; i < h; ++i) {
          const double ar = a[i], ai = a[h + i], br = b[i], bi = b[h + i];
          for (Index c = 0; c < k; ++c) {
            const double yr = ybar(i, c), yi = ybar(h + i, c);
            abar(i, c) += yr * br + yi * bi;
            abar(h + i, c) += yi * br - yr * bi;
            bbar(i, c) += yr * ar + yi * ai;
            bbar(h + i, c) += yi * ar - yr * ai;
          }
        }
        break;
      }
      case Op::TridiagSolve: {
        const Index h = n.dim / 2;
        linalg::ComplexTridiagonal t{to_complex(val(n.inputs[0])), to_complex(val(n.inputs[1])),
                                     to_complex(val(n.inputs[2]))};
        const auto th = t.adjoint();
        const auto x = to_complex(y);
        auto lbar = adj(n.inputs[0]);
        auto dbar = adj(n.inputs[1]);
        auto ubar = adj(n.inputs[2]);
        auto rbar = adj(n.inputs[3]);
        linalg::ComplexVector xbar(h);
        for (Index c = 0; c < k; ++c) {
          for (Index i = 0; i < h; ++i) xbar[i] = {ybar(i, c), ybar(h + i, c)};
          // rhs cotangent solves T^H r = xbar; band cotangent (i, j) is -r_i conj(x_j).
          const auto r = linalg::solve_tridiagonal_complex(th, xbar);
          for (Index i = 0; i < h; ++i) {
            rbar(i, c) += r[i].real();
            rbar(h + i, c) += r[i].imag();
            const auto d = -r[i] * std::conj(x[i]);
            dbar(i, c) += d.real();
            dbar(h + i, c) += d.imag();
          }
          for (Index i = 0; i + 1 < h; ++i) {
            const auto lo = -r[i + 1] * std::conj(x[i]);
            lbar(i, c) += lo.real();
            lbar(h - 1 + i, c) += lo.imag();
            const auto up = -r[i] * std::conj(x[i + 1]);
            ubar(i, c) += up.real();
            ubar(h - 1 + i, c) += up.imag();
          }
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

Vector evaluate(const Graph& g, const ParamVector& theta, const Eigen::Ref<const Vector>& input) {
  Tape tape(g);
  return tape.forward(theta, input);
}

Vector vjp(const Graph& g, const ParamVector& theta, const Eigen::Ref<const Vector>& input,
           const Eigen::Ref<const Vector>& cotangent) {
  if (cotangent.size() != g.output_dim()) fail("cotangent length must equal the graph output dimension");
  Tape tape(g);
  tape.forward(theta, input);
  Matrix grads = Matrix::Zero(theta.size(), 1);
  tape.backward(theta, cotangent, grads);
  return grads.col(0);
}

RowMajorMatrix per_sample_jacobian(const Graph& g, const ParamVector& theta, std::span<const Vector> inputs) {
  if (inputs.empty()) fail("per_sample_jacobian needs at least one sample");
  const Index m = g.output_dim();
  const Index t = theta.size();
  RowMajorMatrix jac(static_cast<Index>(inputs.size()) * m, t);
  Tape tape(g);
  const Matrix identity = Matrix::Identity(m, m);
  Matrix block(t, m);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    tape.forward(theta, inputs[i]);
    block.setZero();
    tape.backward(theta, identity, block);
    jac.middleRows(static_cast<Index>(i) * m, m) = block.transpose();
  }
  return jac;
}

}  // namespace hig::ad
