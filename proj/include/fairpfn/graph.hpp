#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairpfn/tensor.hpp"

namespace fairpfn {

class Graph;

/// Handle into a Graph's tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode automatic differentiation on a tape of tensor ops.
/// Values are computed eagerly as nodes are created; backward() walks the
/// tape in reverse. Single-threaded per graph; independent graphs may live
/// on different threads.
class Graph {
 public:
  explicit Graph(bool check_finite = true) : check_finite_(check_finite) {}

  // leaves
  Var value(Tensor v);                              // constant, no gradient
  Var param(Tensor v, std::string name = "");       // gradient leaf

  // ops
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_rows(Var a, Var row);                     // broadcast 1 x C over rows
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gamma, Var beta);  // eps = 1e-12, population var
  Var relu(Var a);
  Var tanh_act(Var a);
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var square(Var a);
  Var slice_rows(Var a, i64 r0, i64 r1);
  Var slice_cols(Var a, i64 c0, i64 c1);
  Var concat_cols(const std::vector<Var>& parts);
  Var sum_all(Var a);
  Var mean_all(Var a);
  /// Mean binary cross-entropy from logits, numerically stable log-sum-exp
  /// form. Optional per-sample weights (weighted mean). Returns a scalar.
  Var bce_with_logits(Var logits, const Tensor& labels, const Tensor* weights = nullptr);

  const Tensor& val(Var v) const;
  /// Gradient of the last backward() target w.r.t. node v. Nodes without a
  /// path to the target report a zero gradient.
  const Tensor& grad(Var v);

  /// Backward from a scalar output (seed 1).
  void backward(Var out);
  /// Backward with an explicit upstream gradient of the output's shape.
  void backward(Var out, const Tensor& upstream);

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  enum class Op {
    kValue,
    kParam,
    kMatMul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddRows,
    kSoftmaxRows,
    kLayerNormRows,
    kRelu,
    kTanh,
    kGelu,
    kSigmoid,
    kSquare,
    kSliceRows,
    kSliceCols,
    kConcatCols,
    kSumAll,
    kMeanAll,
    kBceWithLogits,
  };

  struct Node {
    Op op;
    std::vector<int> parents;
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool grad_alloc = false;
    double c0 = 0.0;
    i64 i0 = 0, i1 = 0;
    Tensor aux;   // op-specific cache (LN row stats, BCE labels)
    Tensor aux2;  // BCE weights
    std::string name;
  };

  Var push(Node n);
  const Node& node(Var v, const char* who) const;
  void check_value(const Node& n, int id) const;
  void backward_node(int id);
  Tensor& grad_of(int id);

  std::vector<Node> nodes_;
  bool check_finite_ = true;
  bool backward_done_ = false;
};

/// Max relative error between analytic and central finite-difference
/// gradients of a scalar-valued function of one parameter tensor.
/// `build` must construct the graph from scratch on each call.
double gradient_check(const Tensor& at,
                      const std::function<Var(Graph&, Var)>& build_scalar,
                      double h = 1e-5);

}  // namespace fairpfn
