#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ham/array.hpp"
#include "ham/rng.hpp"

namespace ham {

// Trainable leaf. Gradients accumulate into `grad` during Tape::backward.
struct Parameter {
  std::string name;
  Array value;
  Array grad;

  Parameter(std::string n, Array v)
      : name(std::move(n)), value(std::move(v)), grad(Array::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a tape node. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;

  const Array& value() const;
  const Array& grad() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Operations append nodes; backward() walks the nodes in
// reverse creation order (a valid topological order since every operation
// only consumes earlier nodes) and finally flushes leaf gradients into their
// bound Parameters.
class Tape {
 public:
  struct Node {
    Array value;
    Array grad;
    std::vector<int> parents;
    std::function<void(Tape&, int)> backward;  // argument: own node id
    Parameter* param = nullptr;
  };

  // Constant leaf (gradients are computed but go nowhere).
  Var leaf(Array value);

  // Parameter leaf; one node per (tape, parameter) pair.
  Var leaf(Parameter& p);

  Var make(Array value, std::vector<int> parents,
           std::function<void(Tape&, int)> backward);

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  // Seeds the (scalar) root with gradient 1 and propagates. May be called
  // once per tape.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  // Deque keeps node references stable while later operations append; Var
  // handles and backward closures rely on that.
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, int> param_leafs_;
  bool backward_done_ = false;
};

inline const Array& Var::value() const { return tape_->node(id_).value; }
inline const Array& Var::grad() const { return tape_->node(id_).grad; }

// ---- elementwise and structural operations ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

// x: [T x d], bias: [d] or [1 x d]; broadcast add over rows.
Var add_rowvec(Var x, Var bias);

Var matmul(Var a, Var b);

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(Var a, Var b);
Var slice_rows(Var a, int begin, int end);

// x: [T x Cin], w: [(kernel*Cin) x Cout] with taps outermost, b: [Cout].
// Same-length zero-padded convolution; kernel must be odd.
Var conv1d_same(Var x, Var w, Var b, int kernel);

Var gelu(Var x);
Var softmax_rows(Var x);

// Row-wise RMS normalization with learned gain; epsilon 1e-6.
Var rmsnorm(Var x, Var gain);

// Row-wise layer normalization with learned gain and bias; epsilon 1e-5.
Var layer_norm(Var x, Var gain, Var bias);

// Fused multi-head scaled-dot-product attention over already-projected
// q, k, v: [Tq x d], [Tk x d], [Tk x d]. Splits into `heads` slices of
// d/heads columns, attends per head, concatenates. Causal attention never
// touches entries with key index > query index (loop bounds, not masking),
// so future positions cannot perturb earlier outputs even at the bit level.
Var attention_core(Var q, Var k, Var v, int heads, bool causal);

// Gather rows of `table` ([V x d]) by id; ids must lie in [0, V).
Var embedding(Var table, const std::vector<int>& ids);

// Inverted dropout. Identity when train is false or rate is 0.
Var dropout(Var x, double rate, Rng& rng, bool train);

Var sum_all(Var x);
Var mean_all(Var x);

// Mean cross entropy over rows of logits [T x V] against integer targets.
Var cross_entropy(Var logits, const std::vector<int>& targets);

// Summed cross entropy; positions where mask is 0 contribute nothing.
// mask may be null (all positions counted).
Var cross_entropy_sum(Var logits, const std::vector<int>& targets,
                      const std::vector<std::uint8_t>* mask = nullptr);

// Sum of absolute differences.
Var l1(Var a, Var b);

// Summed binary cross entropy on logits [T x 1] against {0,1} targets,
// with optional per-position mask.
Var bce_logits_sum(Var logits, const std::vector<double>& targets,
                   const std::vector<std::uint8_t>* mask = nullptr);

}  // namespace ham
