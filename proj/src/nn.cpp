#include "ham/nn.hpp"

#include <cmath>

#include "ham/errors.hpp"

namespace ham {

Parameter& ParamStore::create(const std::string& name, Array init) {
  if (by_name_.count(name)) {
    throw ConfigError("parameter name already taken: " + name);
  }
  owned_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  Parameter* p = owned_.back().get();
  order_.push_back(p);
  by_name_.emplace(name, p);
  return *p;
}

Parameter* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParamStore::get(const std::string& name) const {
  Parameter* p = find(name);
  if (p == nullptr) throw ConfigError("no parameter named " + name);
  return *p;
}

void ParamStore::zero_grads() {
  for (Parameter* p : order_) p->zero_grad();
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (Parameter* p : order_) n += p->value.size();
  return n;
}

Array init_normal(Rng& rng, std::vector<int> shape, double stddev) {
  Array a(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal() * stddev;
  return a;
}

Array init_ones(std::vector<int> shape) {
  return Array::full(std::move(shape), 1.0);
}

Linear Linear::create(ParamStore& ps, const std::string& name, int in, int out,
                      Rng& rng) {
  Linear l;
  l.w = &ps.create(name + ".w",
                   init_normal(rng, {in, out}, 1.0 / std::sqrt(static_cast<double>(in))));
  l.b = &ps.create(name + ".b", Array::zeros({out}));
  return l;
}

Var Linear::operator()(Tape& t, Var x) const {
  return add_rowvec(matmul(x, t.leaf(*w)), t.leaf(*b));
}

Conv1dLayer Conv1dLayer::create(ParamStore& ps, const std::string& name, int cin,
                                int cout, int kernel, Rng& rng) {
  if (kernel <= 0 || kernel % 2 == 0) {
    throw ConfigError("conv layer " + name + ": kernel must be odd, got " +
                      std::to_string(kernel));
  }
  Conv1dLayer c;
  double stddev = 1.0 / std::sqrt(static_cast<double>(kernel * cin));
  c.w = &ps.create(name + ".w", init_normal(rng, {kernel * cin, cout}, stddev));
  c.b = &ps.create(name + ".b", Array::zeros({cout}));
  c.kernel = kernel;
  return c;
}

Var Conv1dLayer::operator()(Tape& t, Var x) const {
  return conv1d_same(x, t.leaf(*w), t.leaf(*b), kernel);
}

RmsNormLayer RmsNormLayer::create(ParamStore& ps, const std::string& name, int d) {
  RmsNormLayer n;
  n.gain = &ps.create(name + ".gain", init_ones({d}));
  return n;
}

Var RmsNormLayer::operator()(Tape& t, Var x) const {
  return rmsnorm(x, t.leaf(*gain));
}

LayerNormLayer LayerNormLayer::create(ParamStore& ps, const std::string& name, int d) {
  LayerNormLayer n;
  n.gain = &ps.create(name + ".gain", init_ones({d}));
  n.bias = &ps.create(name + ".bias", Array::zeros({d}));
  return n;
}

Var LayerNormLayer::operator()(Tape& t, Var x) const {
  return layer_norm(x, t.leaf(*gain), t.leaf(*bias));
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& name,
                                              int d_model, int d_kv, int heads,
                                              Rng& rng) {
  if (heads <= 0 || d_model % heads != 0) {
    throw ConfigError("attention " + name + ": width " + std::to_string(d_model) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  MultiHeadAttention a;
  a.wq = Linear::create(ps, name + ".q", d_model, d_model, rng);
  a.wk = Linear::create(ps, name + ".k", d_kv, d_model, rng);
  a.wv = Linear::create(ps, name + ".v", d_kv, d_model, rng);
  a.wo = Linear::create(ps, name + ".o", d_model, d_model, rng);
  a.heads = heads;
  return a;
}

Var MultiHeadAttention::operator()(Tape& t, Var q_in, Var kv_in, bool causal) const {
  Var q = wq(t, q_in);
  Var k = wk(t, kv_in);
  Var v = wv(t, kv_in);
  return wo(t, attention_core(q, k, v, heads, causal));
}

TransformerBlock TransformerBlock::create(ParamStore& ps, const std::string& name,
                                          int d_model, int heads, int ffn_dim,
                                          double dropout_rate, bool causal, Rng& rng) {
  TransformerBlock b;
  b.ln1 = LayerNormLayer::create(ps, name + ".ln1", d_model);
  b.ln2 = LayerNormLayer::create(ps, name + ".ln2", d_model);
  b.attn = MultiHeadAttention::create(ps, name + ".attn", d_model, d_model, heads, rng);
  b.ffn1 = Linear::create(ps, name + ".ffn1", d_model, ffn_dim, rng);
  b.ffn2 = Linear::create(ps, name + ".ffn2", ffn_dim, d_model, rng);
  b.dropout_rate = dropout_rate;
  b.causal = causal;
  return b;
}

Var maybe_dropout(const Fwd& f, Var x, double rate) {
  if (!f.train || f.rng == nullptr || rate == 0.0) return x;
  return dropout(x, rate, *f.rng, true);
}

Var TransformerBlock::operator()(const Fwd& f, Var x) const {
  Tape& t = f.tape;
  Var h = ln1(t, x);
  Var a = maybe_dropout(f, attn(t, h, h, causal), dropout_rate);
  x = add(x, a);
  Var m = ffn2(t, gelu(ffn1(t, ln2(t, x))));
  m = maybe_dropout(f, m, dropout_rate);
  return add(x, m);
}

}  // namespace ham
