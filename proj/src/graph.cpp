#include "fairpfn/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace fairpfn {

namespace {

constexpr double kLnEps = 1e-12;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var Graph::push(Node n) {
  const int id = static_cast<int>(nodes_.size());
  if (check_finite_) check_value(n, id);
  nodes_.push_back(std::move(n));
  return Var{id};
}

void Graph::check_value(const Node& n, int id) const {
  if (!n.value.all_finite())
    throw std::runtime_error("graph: non-finite value at node " + std::to_string(id));
}

const Graph::Node& Graph::node(Var v, const char* who) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw std::runtime_error(std::string(who) + ": invalid node handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::value(Tensor v) {
  Node n;
  n.op = Op::kValue;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Graph::param(Tensor v, std::string name) {
  Node n;
  n.op = Op::kParam;
  n.value = std::move(v);
  n.needs_grad = true;
  n.name = std::move(name);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Node& na = node(a, "matmul");
  const Node& nb = node(b, "matmul");
  const i64 m = trans_a ? na.value.cols() : na.value.rows();
  const i64 k = trans_a ? na.value.rows() : na.value.cols();
  const i64 kb = trans_b ? nb.value.cols() : nb.value.rows();
  const i64 ncols = trans_b ? nb.value.rows() : nb.value.cols();
  if (k != kb)
    throw std::runtime_error("matmul: inner dimensions differ at node " +
                             std::to_string(nodes_.size()) + ": " + na.value.shape_str() +
                             (trans_a ? "^T" : "") + " * " + nb.value.shape_str() +
                             (trans_b ? "^T" : ""));
  Node n;
  n.op = Op::kMatMul;
  n.parents = {a.id, b.id};
  n.i0 = trans_a ? 1 : 0;
  n.i1 = trans_b ? 1 : 0;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = Tensor::zeros({m, ncols});
  matmul_into(na.value, trans_a, nb.value, trans_b, n.value);
  return push(std::move(n));
}

Var Graph::transpose(Var a) {
  const Node& na = node(a, "transpose");
  const i64 r = na.value.rows(), c = na.value.cols();
  Node n;
  n.op = Op::kTranspose;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = Tensor::zeros({c, r});
  for (i64 i = 0; i < r; ++i)
    for (i64 j = 0; j < c; ++j) n.value.at(j, i) = na.value.at(i, j);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Node& na = node(a, "add");
  const Node& nb = node(b, "add");
  if (!na.value.same_shape(nb.value))
    throw std::runtime_error("add: shape mismatch at node " + std::to_string(nodes_.size()) +
                             ": " + na.value.shape_str() + " vs " + nb.value.shape_str());
  Node n;
  n.op = Op::kAdd;
  n.parents = {a.id, b.id};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] += nb.value[i];
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Node& na = node(a, "sub");
  const Node& nb = node(b, "sub");
  if (!na.value.same_shape(nb.value))
    throw std::runtime_error("sub: shape mismatch at node " + std::to_string(nodes_.size()));
  Node n;
  n.op = Op::kSub;
  n.parents = {a.id, b.id};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] -= nb.value[i];
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Node& na = node(a, "mul");
  const Node& nb = node(b, "mul");
  if (!na.value.same_shape(nb.value))
    throw std::runtime_error("mul: shape mismatch at node " + std::to_string(nodes_.size()));
  Node n;
  n.op = Op::kMul;
  n.parents = {a.id, b.id};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] *= nb.value[i];
  return push(std::move(n));
}

Var Graph::scale(Var a, double c) {
  const Node& na = node(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.parents = {a.id};
  n.c0 = c;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] *= c;
  return push(std::move(n));
}

Var Graph::add_rows(Var a, Var row) {
  const Node& na = node(a, "add_rows");
  const Node& nr = node(row, "add_rows");
  if (nr.value.rows() != 1 || nr.value.cols() != na.value.cols())
    throw std::runtime_error("add_rows: row shape mismatch at node " +
                             std::to_string(nodes_.size()));
  Node n;
  n.op = Op::kAddRows;
  n.parents = {a.id, row.id};
  n.needs_grad = na.needs_grad || nr.needs_grad;
  n.value = na.value;
  const i64 r = na.value.rows(), c = na.value.cols();
  for (i64 i = 0; i < r; ++i)
    for (i64 j = 0; j < c; ++j) n.value.at(i, j) += nr.value[j];
  return push(std::move(n));
}

Var Graph::softmax_rows(Var a) {
  const Node& na = node(a, "softmax_rows");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  const i64 r = n.value.rows(), c = n.value.cols();
  for (i64 i = 0; i < r; ++i) {
    double mx = n.value.at(i, 0);
    for (i64 j = 1; j < c; ++j) mx = std::max(mx, n.value.at(i, j));
    double s = 0.0;
    for (i64 j = 0; j < c; ++j) {
      const double e = std::exp(n.value.at(i, j) - mx);
      n.value.at(i, j) = e;
      s += e;
    }
    const double inv = 1.0 / s;
    for (i64 j = 0; j < c; ++j) n.value.at(i, j) *= inv;
  }
  return push(std::move(n));
}

Var Graph::layer_norm_rows(Var x, Var gamma, Var beta) {
  const Node& nx = node(x, "layer_norm_rows");
  const Node& ng = node(gamma, "layer_norm_rows");
  const Node& nb = node(beta, "layer_norm_rows");
  const i64 r = nx.value.rows(), c = nx.value.cols();
  if (ng.value.rows() != 1 || ng.value.cols() != c || nb.value.rows() != 1 ||
      nb.value.cols() != c)
    throw std::runtime_error("layer_norm_rows: gamma/beta shape mismatch at node " +
                             std::to_string(nodes_.size()));
  Node n;
  n.op = Op::kLayerNormRows;
  n.parents = {x.id, gamma.id, beta.id};
  n.needs_grad = nx.needs_grad || ng.needs_grad || nb.needs_grad;
  n.value = Tensor::zeros({r, c});
  n.aux = Tensor::zeros({r, 2});  // mean, rstd per row
  for (i64 i = 0; i < r; ++i) {
    double mu = 0.0;
    for (i64 j = 0; j < c; ++j) mu += nx.value.at(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (i64 j = 0; j < c; ++j) {
      const double d = nx.value.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    n.aux.at(i, 0) = mu;
    n.aux.at(i, 1) = rstd;
    for (i64 j = 0; j < c; ++j) {
      const double xh = (nx.value.at(i, j) - mu) * rstd;
      n.value.at(i, j) = ng.value[j] * xh + nb.value[j];
    }
  }
  return push(std::move(n));
}

Var Graph::relu(Var a) {
  const Node& na = node(a, "relu");
  Node n;
  n.op = Op::kRelu;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i)
    if (n.value[i] < 0.0) n.value[i] = 0.0;
  return push(std::move(n));
}

Var Graph::tanh_act(Var a) {
  const Node& na = node(a, "tanh_act");
  Node n;
  n.op = Op::kTanh;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] = std::tanh(n.value[i]);
  return push(std::move(n));
}

Var Graph::gelu(Var a) {
  const Node& na = node(a, "gelu");
  Node n;
  n.op = Op::kGelu;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) {
    const double x = n.value[i];
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    n.value[i] = 0.5 * x * (1.0 + t);
  }
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  const Node& na = node(a, "sigmoid");
  Node n;
  n.op = Op::kSigmoid;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] = sigmoid_scalar(n.value[i]);
  return push(std::move(n));
}

Var Graph::square(Var a) {
  const Node& na = node(a, "square");
  Node n;
  n.op = Op::kSquare;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (i64 i = 0; i < n.value.size(); ++i) n.value[i] *= n.value[i];
  return push(std::move(n));
}

Var Graph::slice_rows(Var a, i64 r0, i64 r1) {
  const Node& na = node(a, "slice_rows");
  const i64 r = na.value.rows(), c = na.value.cols();
  if (r0 < 0 || r1 > r || r0 >= r1)
    throw std::runtime_error("slice_rows: bad range at node " + std::to_string(nodes_.size()));
  Node n;
  n.op = Op::kSliceRows;
  n.parents = {a.id};
  n.i0 = r0;
  n.i1 = r1;
  n.needs_grad = na.needs_grad;
  n.value = Tensor::zeros({r1 - r0, c});
  for (i64 i = r0; i < r1; ++i)
    for (i64 j = 0; j < c; ++j) n.value.at(i - r0, j) = na.value.at(i, j);
  return push(std::move(n));
}

Var Graph::slice_cols(Var a, i64 c0, i64 c1) {
  const Node& na = node(a, "slice_cols");
  const i64 r = na.value.rows(), c = na.value.cols();
  if (c0 < 0 || c1 > c || c0 >= c1)
    throw std::runtime_error("slice_cols: bad range at node " + std::to_string(nodes_.size()));
  Node n;
  n.op = Op::kSliceCols;
  n.parents = {a.id};
  n.i0 = c0;
  n.i1 = c1;
  n.needs_grad = na.needs_grad;
  n.value = Tensor::zeros({r, c1 - c0});
  for (i64 i = 0; i < r; ++i)
    for (i64 j = c0; j < c1; ++j) n.value.at(i, j - c0) = na.value.at(i, j);
  return push(std::move(n));
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_cols: empty input");
  Node n;
  n.op = Op::kConcatCols;
  i64 r = -1, c = 0;
  for (Var p : parts) {
    const Node& np = node(p, "concat_cols");
    if (r < 0) r = np.value.rows();
    if (np.value.rows() != r)
      throw std::runtime_error("concat_cols: row mismatch at node " +
                               std::to_string(nodes_.size()));
    c += np.value.cols();
    n.parents.push_back(p.id);
    n.needs_grad = n.needs_grad || np.needs_grad;
  }
  n.value = Tensor::zeros({r, c});
  i64 off = 0;
  for (Var p : parts) {
    const Node& np = nodes_[static_cast<std::size_t>(p.id)];
    const i64 pc = np.value.cols();
    for (i64 i = 0; i < r; ++i)
      for (i64 j = 0; j < pc; ++j) n.value.at(i, off + j) = np.value.at(i, j);
    off += pc;
  }
  return push(std::move(n));
}

Var Graph::sum_all(Var a) {
  const Node& na = node(a, "sum_all");
  Node n;
  n.op = Op::kSumAll;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (i64 i = 0; i < na.value.size(); ++i) s += na.value[i];
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Graph::mean_all(Var a) {
  const Node& na = node(a, "mean_all");
  if (na.value.size() == 0) throw std::runtime_error("mean_all: empty input");
  Node n;
  n.op = Op::kMeanAll;
  n.parents = {a.id};
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (i64 i = 0; i < na.value.size(); ++i) s += na.value[i];
  n.value = Tensor::scalar(s / static_cast<double>(na.value.size()));
  return push(std::move(n));
}

Var Graph::bce_with_logits(Var logits, const Tensor& labels, const Tensor* weights) {
  const Node& nl = node(logits, "bce_with_logits");
  if (nl.value.size() != labels.size())
    throw std::runtime_error("bce_with_logits: length mismatch at node " +
                             std::to_string(nodes_.size()));
  if (weights && weights->size() != labels.size())
    throw std::runtime_error("bce_with_logits: weight length mismatch");
  Node n;
  n.op = Op::kBceWithLogits;
  n.parents = {logits.id};
  n.needs_grad = nl.needs_grad;
  n.aux = labels;
  if (weights) n.aux2 = *weights;
  double total = 0.0, wsum = 0.0;
  for (i64 i = 0; i < labels.size(); ++i) {
    const double z = nl.value[i];
    const double y = labels[i];
    const double w = weights ? (*weights)[i] : 1.0;
    // max(z,0) - z*y + log(1 + exp(-|z|))
    total += w * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z))));
    wsum += w;
  }
  if (wsum <= 0.0) throw std::runtime_error("bce_with_logits: non-positive weight sum");
  n.c0 = wsum;
  n.value = Tensor::scalar(total / wsum);
  return push(std::move(n));
}

const Tensor& Graph::val(Var v) const { return node(v, "val").value; }

const Tensor& Graph::grad(Var v) {
  node(v, "grad");
  if (!backward_done_) throw std::runtime_error("grad: backward has not been run");
  return grad_of(v.id);  // unreached nodes get zeros
}

Tensor& Graph::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Graph::backward(Var out) {
  const Node& n = node(out, "backward");
  if (n.value.size() != 1)
    throw std::runtime_error("backward: output is not scalar; pass an upstream gradient");
  backward(out, Tensor::scalar(1.0));
}

void Graph::backward(Var out, const Tensor& upstream) {
  if (nodes_.empty()) throw std::runtime_error("backward: graph has no forward pass");
  const Node& n = node(out, "backward");
  if (!n.value.same_shape(upstream))
    throw std::runtime_error("backward: upstream gradient shape mismatch");
  for (auto& nd : nodes_) {
    nd.grad_alloc = false;
    nd.grad = Tensor();
  }
  grad_of(out.id) = upstream;
  nodes_[static_cast<std::size_t>(out.id)].grad_alloc = true;
  for (int id = out.id; id >= 0; --id) {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (!nd.grad_alloc || !nd.needs_grad || nd.parents.empty()) continue;
    backward_node(id);
  }
  backward_done_ = true;
}

void Graph::backward_node(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Tensor& g = n.grad;
  auto parent = [&](int slot) -> Node& {
    return nodes_[static_cast<std::size_t>(n.parents[static_cast<std::size_t>(slot)])];
  };
  auto pgrad = [&](int slot) -> Tensor& { return grad_of(n.parents[static_cast<std::size_t>(slot)]); };
  auto wants = [&](int slot) { return parent(slot).needs_grad; };

  switch (n.op) {
    case Op::kValue:
    case Op::kParam:
      break;
    case Op::kMatMul: {
      const bool ta = n.i0 != 0, tb = n.i1 != 0;
      const Tensor& a = parent(0).value;
      const Tensor& b = parent(1).value;
      if (wants(0)) {
        Tensor& ga = pgrad(0);
        if (!ta && !tb) matmul_into(g, false, b, true, ga, 1.0);         // gC * B^T
        else if (ta && !tb) matmul_into(b, false, g, true, ga, 1.0);     // B * gC^T
        else if (!ta && tb) matmul_into(g, false, b, false, ga, 1.0);    // gC * B
        else matmul_into(b, true, g, true, ga, 1.0);                     // B^T * gC^T
      }
      if (wants(1)) {
        Tensor& gb = pgrad(1);
        if (!ta && !tb) matmul_into(a, true, g, false, gb, 1.0);         // A^T * gC
        else if (ta && !tb) matmul_into(a, false, g, false, gb, 1.0);    // A * gC
        else if (!ta && tb) matmul_into(g, true, a, false, gb, 1.0);     // gC^T * A
        else matmul_into(g, true, a, true, gb, 1.0);                     // gC^T * A^T
      }
      break;
    }
    case Op::kTranspose: {
      if (!wants(0)) break;
      Tensor& ga = pgrad(0);
      const i64 r = ga.rows(), c = ga.cols();
      for (i64 i = 0; i < r; ++i)
        for (i64 j = 0; j < c; ++j) ga.at(i, j) += g.at(j, i);
      break;
    }
    case Op::kAdd: {
      for (int s = 0; s < 2; ++s) {
        if (!wants(s)) continue;
        Tensor& gp = pgrad(s);
        for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i];
      }
      break;
    }
    case Op::kSub: {
      if (wants(0)) {
        Tensor& gp = pgrad(0);
        for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gp = pgrad(1);
        for (i64 i = 0; i < g.size(); ++i) gp[i] -= g[i];
      }
      break;
    }
    case Op::kMul: {
      if (wants(0)) {
        Tensor& gp = pgrad(0);
        const Tensor& b = parent(1).value;
        for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i] * b[i];
      }
      if (wants(1)) {
        Tensor& gp = pgrad(1);
        const Tensor& a = parent(0).value;
        for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i] * a[i];
      }
      break;
    }
    case Op::kScale: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      for (i64 i = 0; i < g.size(); ++i) gp[i] += n.c0 * g[i];
      break;
    }
    case Op::kAddRows: {
      const i64 r = g.rows(), c = g.cols();
      if (wants(0)) {
        Tensor& gp = pgrad(0);
        for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gr = pgrad(1);
        for (i64 i = 0; i < r; ++i)
          for (i64 j = 0; j < c; ++j) gr[j] += g.at(i, j);
      }
      break;
    }
    case Op::kSoftmaxRows: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& y = n.value;
      const i64 r = y.rows(), c = y.cols();
      for (i64 i = 0; i < r; ++i) {
        double dot = 0.0;
        for (i64 j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
        for (i64 j = 0; j < c; ++j) gp.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
      }
      break;
    }
    case Op::kLayerNormRows: {
      const Tensor& x = parent(0).value;
      const Tensor& gamma = parent(1).value;
      const i64 r = x.rows(), c = x.cols();
      const double invc = 1.0 / static_cast<double>(c);
      for (i64 i = 0; i < r; ++i) {
        const double mu = n.aux.at(i, 0);
        const double rstd = n.aux.at(i, 1);
        double mean_gh = 0.0, mean_ghx = 0.0;
        for (i64 j = 0; j < c; ++j) {
          const double xh = (x.at(i, j) - mu) * rstd;
          const double gh = g.at(i, j) * gamma[j];
          mean_gh += gh;
          mean_ghx += gh * xh;
        }
        mean_gh *= invc;
        mean_ghx *= invc;
        if (wants(0)) {
          Tensor& gx = pgrad(0);
          for (i64 j = 0; j < c; ++j) {
            const double xh = (x.at(i, j) - mu) * rstd;
            const double gh = g.at(i, j) * gamma[j];
            gx.at(i, j) += rstd * (gh - mean_gh - xh * mean_ghx);
          }
        }
        if (wants(1)) {
          Tensor& gg = pgrad(1);
          for (i64 j = 0; j < c; ++j) {
            const double xh = (x.at(i, j) - mu) * rstd;
            gg[j] += g.at(i, j) * xh;
          }
        }
        if (wants(2)) {
          Tensor& gb = pgrad(2);
          for (i64 j = 0; j < c; ++j) gb[j] += g.at(i, j);
        }
      }
      break;
    }
    case Op::kRelu: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& x = parent(0).value;
      for (i64 i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) gp[i] += g[i];
      break;
    }
    case Op::kTanh: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& y = n.value;
      for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::kGelu: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& x = parent(0).value;
      for (i64 i = 0; i < g.size(); ++i) {
        const double xv = x[i];
        const double u = kGeluC * (xv + kGeluA * xv * xv * xv);
        const double t = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * xv * xv);
        gp[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t * t) * du);
      }
      break;
    }
    case Op::kSigmoid: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& y = n.value;
      for (i64 i = 0; i < g.size(); ++i) gp[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::kSquare: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& x = parent(0).value;
      for (i64 i = 0; i < g.size(); ++i) gp[i] += 2.0 * x[i] * g[i];
      break;
    }
    case Op::kSliceRows: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const i64 c = gp.cols();
      for (i64 i = n.i0; i < n.i1; ++i)
        for (i64 j = 0; j < c; ++j) gp.at(i, j) += g.at(i - n.i0, j);
      break;
    }
    case Op::kSliceCols: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const i64 r = gp.rows();
      for (i64 i = 0; i < r; ++i)
        for (i64 j = n.i0; j < n.i1; ++j) gp.at(i, j) += g.at(i, j - n.i0);
      break;
    }
    case Op::kConcatCols: {
      i64 off = 0;
      for (std::size_t s = 0; s < n.parents.size(); ++s) {
        const i64 pc = parent(static_cast<int>(s)).value.cols();
        if (wants(static_cast<int>(s))) {
          Tensor& gp = pgrad(static_cast<int>(s));
          const i64 r = gp.rows();
          for (i64 i = 0; i < r; ++i)
            for (i64 j = 0; j < pc; ++j) gp.at(i, j) += g.at(i, off + j);
        }
        off += pc;
      }
      break;
    }
    case Op::kSumAll: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const double gv = g[0];
      for (i64 i = 0; i < gp.size(); ++i) gp[i] += gv;
      break;
    }
    case Op::kMeanAll: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const double gv = g[0] / static_cast<double>(gp.size());
      for (i64 i = 0; i < gp.size(); ++i) gp[i] += gv;
      break;
    }
    case Op::kBceWithLogits: {
      if (!wants(0)) break;
      Tensor& gp = pgrad(0);
      const Tensor& z = parent(0).value;
      const Tensor& y = n.aux;
      const bool weighted = n.aux2.size() == z.size();
      const double gv = g[0] / n.c0;
      for (i64 i = 0; i < z.size(); ++i) {
        const double w = weighted ? n.aux2[i] : 1.0;
        gp[i] += gv * w * (sigmoid_scalar(z[i]) - y[i]);
      }
      break;
    }
  }
}

double gradient_check(const Tensor& at, const std::function<Var(Graph&, Var)>& build_scalar,
                      double h) {
  Graph g;
  Var p = g.param(at, "p");
  Var out = build_scalar(g, p);
  g.backward(out);
  const Tensor analytic = g.grad(p);

  double max_rel = 0.0;
  for (i64 i = 0; i < at.size(); ++i) {
    Tensor plus = at, minus = at;
    plus[i] += h;
    minus[i] -= h;
    Graph gp, gm;
    const double fp = gp.val(build_scalar(gp, gp.param(plus)))[0];
    const double fm = gm.val(build_scalar(gm, gm.param(minus)))[0];
    const double numeric = (fp - fm) / (2.0 * h);
    // floor keeps near-zero entries from amplifying finite-difference noise;
    // below it the check is effectively absolute at 1e-10
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-6});
    max_rel = std::max(max_rel, std::fabs(numeric - analytic[i]) / denom);
  }
  return max_rel;
}

}  // namespace fairpfn
