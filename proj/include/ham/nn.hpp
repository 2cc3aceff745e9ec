#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ham/tape.hpp"

namespace ham {

// Owns every Parameter of a model bundle. Names are unique; creation order is
// the canonical iteration order (checkpoints and the optimizer rely on it).
class ParamStore {
 public:
  Parameter& create(const std::string& name, Array init);
  Parameter* find(const std::string& name) const;
  Parameter& get(const std::string& name) const;
  const std::vector<Parameter*>& all() const { return order_; }
  void zero_grads();
  std::size_t total_size() const;

 private:
  std::vector<std::unique_ptr<Parameter>> owned_;
  std::vector<Parameter*> order_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

// Per-forward context: the tape to record on, train/eval mode, and the RNG
// that feeds dropout while training.
struct Fwd {
  Tape& tape;
  bool train = false;
  Rng* rng = nullptr;
};

Array init_normal(Rng& rng, std::vector<int> shape, double stddev);
Array init_ones(std::vector<int> shape);

// Dropout that is a no-op outside training (or when no RNG is wired in).
Var maybe_dropout(const Fwd& f, Var x, double rate);

struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;

  static Linear create(ParamStore& ps, const std::string& name, int in, int out,
                       Rng& rng);
  Var operator()(Tape& t, Var x) const;
};

struct Conv1dLayer {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  int kernel = 0;

  static Conv1dLayer create(ParamStore& ps, const std::string& name, int cin,
                            int cout, int kernel, Rng& rng);
  Var operator()(Tape& t, Var x) const;
};

struct RmsNormLayer {
  Parameter* gain = nullptr;

  static RmsNormLayer create(ParamStore& ps, const std::string& name, int d);
  Var operator()(Tape& t, Var x) const;
};

struct LayerNormLayer {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNormLayer create(ParamStore& ps, const std::string& name, int d);
  Var operator()(Tape& t, Var x) const;
};

// Projection + fused attention core + output projection. Queries and the
// key/value stream may have different widths (cross attention).
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;

  static MultiHeadAttention create(ParamStore& ps, const std::string& name,
                                   int d_model, int d_kv, int heads, Rng& rng);
  Var operator()(Tape& t, Var q_in, Var kv_in, bool causal) const;
};

// Pre-norm transformer block: x += attn(norm(x)); x += ffn(norm(x)).
struct TransformerBlock {
  LayerNormLayer ln1, ln2;
  MultiHeadAttention attn;
  Linear ffn1, ffn2;
  double dropout_rate = 0.0;
  bool causal = false;

  static TransformerBlock create(ParamStore& ps, const std::string& name,
                                 int d_model, int heads, int ffn_dim,
                                 double dropout_rate, bool causal, Rng& rng);
  Var operator()(const Fwd& f, Var x) const;
};

}  // namespace ham
