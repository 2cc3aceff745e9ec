#include "ham/gradcheck.hpp"

#include <cmath>

namespace ham {

namespace {

double eval_scalar(const std::function<Var(Tape&)>& build) {
  Tape t;
  return build(t).value().item();
}

// Weighted sum against a fixed random matrix; turns any output into a scalar
// whose gradient exercises every output entry.
Var reduce(Tape& t, Var out, std::uint64_t seed) {
  Rng r(seed);
  Array w = Array::zeros_like(out.value());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = r.uniform(-1.0, 1.0);
  return sum_all(mul(out, t.leaf(std::move(w))));
}

struct Suite {
  std::uint64_t seed;
  std::vector<GradCheckCase> cases;

  Parameter& make_param(ParamStore& ps, const std::string& name,
                        std::vector<int> shape, std::uint64_t salt,
                        double stddev = 1.0) {
    Rng r(mix64(seed, salt));
    return ps.create(name, init_normal(r, std::move(shape), stddev));
  }

  void run(const std::string& op, const std::string& shape, ParamStore& ps,
           const std::function<Var(Tape&)>& build) {
    double err = max_rel_err_fd(ps, build);
    cases.push_back({op, shape, err, err <= kGradCheckTolerance});
  }
};

}  // namespace

double max_rel_err_fd(ParamStore& ps, const std::function<Var(Tape&)>& build,
                      double h) {
  ps.zero_grads();
  {
    Tape t;
    Var loss = build(t);
    t.backward(loss);
  }
  std::vector<Array> ad;
  ad.reserve(ps.all().size());
  for (Parameter* p : ps.all()) ad.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t pi = 0; pi < ps.all().size(); ++pi) {
    Parameter* p = ps.all()[pi];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double orig = p->value[i];
      p->value[i] = orig + h;
      double lp = eval_scalar(build);
      p->value[i] = orig - h;
      double lm = eval_scalar(build);
      p->value[i] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double a = ad[pi][i];
      double denom = std::max({std::abs(a), std::abs(fd), 1e-4});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

GradCheckReport run_gradient_suite(std::uint64_t seed) {
  Suite s{seed, {}};
  std::uint64_t salt = 1;

  struct Dims2 {
    int r, c;
  };

  // Elementwise binaries.
  for (Dims2 d : {Dims2{2, 3}, Dims2{1, 7}, Dims2{5, 4}}) {
    std::string sh = std::to_string(d.r) + "x" + std::to_string(d.c);
    {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.r, d.c}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.r, d.c}, salt++);
      s.run("add", sh, ps, [&](Tape& t) {
        return reduce(t, add(t.leaf(a), t.leaf(b)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.r, d.c}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.r, d.c}, salt++);
      s.run("sub", sh, ps, [&](Tape& t) {
        return reduce(t, sub(t.leaf(a), t.leaf(b)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.r, d.c}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.r, d.c}, salt++);
      s.run("mul", sh, ps, [&](Tape& t) {
        return reduce(t, mul(t.leaf(a), t.leaf(b)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.r, d.c}, salt++);
      s.run("scale", sh, ps, [&](Tape& t) {
        return reduce(t, scale(t.leaf(a), -1.75), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.c}, salt++);
      s.run("add_rowvec", sh, ps, [&](Tape& t) {
        return reduce(t, add_rowvec(t.leaf(x), t.leaf(b)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      s.run("gelu", sh, ps, [&](Tape& t) {
        return reduce(t, gelu(t.leaf(x)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      s.run("softmax_rows", sh, ps, [&](Tape& t) {
        return reduce(t, softmax_rows(t.leaf(x)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      s.run("sum_all", sh, ps, [&](Tape& t) { return sum_all(t.leaf(x)); });
      s.run("mean_all", sh, ps, [&](Tape& t) { return mean_all(t.leaf(x)); });
    }
    {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.r, d.c}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.r, d.c}, salt++);
      s.run("l1", sh, ps, [&](Tape& t) { return l1(t.leaf(a), t.leaf(b)); });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      Parameter& g = s.make_param(ps, "g", {d.c}, salt++, 0.5);
      s.run("rmsnorm", sh, ps, [&](Tape& t) {
        return reduce(t, rmsnorm(t.leaf(x), t.leaf(g)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      Parameter& g = s.make_param(ps, "g", {d.c}, salt++, 0.5);
      Parameter& b = s.make_param(ps, "b", {d.c}, salt++, 0.5);
      s.run("layer_norm", sh, ps, [&](Tape& t) {
        return reduce(t, layer_norm(t.leaf(x), t.leaf(g), t.leaf(b)), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r + 2, d.c}, salt++);
      std::string sl = std::to_string(d.r + 2) + "x" + std::to_string(d.c);
      s.run("slice_rows", sl, ps, [&](Tape& t) {
        return reduce(t, slice_rows(t.leaf(x), 1, d.r + 1), 7);
      });
    }
    {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.r, d.c}, salt++);
      std::uint64_t mask_seed = mix64(seed, salt++);
      s.run("dropout", sh, ps, [&, mask_seed](Tape& t) {
        Rng r(mask_seed);
        return reduce(t, dropout(t.leaf(x), 0.3, r, true), 7);
      });
    }
  }

  // matmul.
  {
    struct MM {
      int m, k, n;
    };
    for (MM d : {MM{2, 3, 4}, MM{1, 5, 2}, MM{4, 4, 3}}) {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.m, d.k}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.k, d.n}, salt++);
      std::string sh = std::to_string(d.m) + "x" + std::to_string(d.k) + "*" +
                       std::to_string(d.k) + "x" + std::to_string(d.n);
      s.run("matmul", sh, ps, [&](Tape& t) {
        return reduce(t, matmul(t.leaf(a), t.leaf(b)), 7);
      });
    }
  }

  // Concatenation.
  {
    struct CC {
      int r1, r2, c;
    };
    for (CC d : {CC{2, 3, 4}, CC{1, 1, 2}, CC{4, 2, 5}}) {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.r1, d.c}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.r2, d.c}, salt++);
      std::string sh = std::to_string(d.r1) + "+" + std::to_string(d.r2) + "x" +
                       std::to_string(d.c);
      s.run("concat_rows", sh, ps, [&](Tape& t) {
        return reduce(t, concat_rows({t.leaf(a), t.leaf(b)}), 7);
      });
    }
    for (CC d : {CC{3, 2, 4}, CC{1, 5, 1}, CC{4, 3, 3}}) {
      ParamStore ps;
      Parameter& a = s.make_param(ps, "a", {d.c, d.r1}, salt++);
      Parameter& b = s.make_param(ps, "b", {d.c, d.r2}, salt++);
      std::string sh = std::to_string(d.c) + "x" + std::to_string(d.r1) + "|" +
                       std::to_string(d.r2);
      s.run("concat_cols", sh, ps, [&](Tape& t) {
        return reduce(t, concat_cols(t.leaf(a), t.leaf(b)), 7);
      });
    }
  }

  // Convolution.
  {
    struct CV {
      int T, cin, cout, k;
    };
    for (CV d : {CV{5, 2, 3, 3}, CV{1, 1, 2, 1}, CV{7, 3, 2, 5}}) {
      ParamStore ps;
      Parameter& x = s.make_param(ps, "x", {d.T, d.cin}, salt++);
      Parameter& w = s.make_param(ps, "w", {d.k * d.cin, d.cout}, salt++, 0.7);
      Parameter& b = s.make_param(ps, "b", {d.cout}, salt++, 0.3);
      std::string sh = std::to_string(d.T) + "x" + std::to_string(d.cin) + "->" +
                       std::to_string(d.cout) + "k" + std::to_string(d.k);
      s.run("conv1d_same", sh, ps, [&, d](Tape& t) {
        return reduce(t, conv1d_same(t.leaf(x), t.leaf(w), t.leaf(b), d.k), 7);
      });
    }
  }

  // Attention core, causal and cross.
  {
    struct AT {
      int tq, tk, d, heads;
      bool causal;
    };
    for (AT d : {AT{3, 3, 4, 2, true}, AT{4, 4, 6, 3, true}, AT{5, 5, 4, 1, true},
                 AT{2, 5, 6, 3, false}, AT{3, 4, 4, 2, false}, AT{1, 6, 4, 1, false}}) {
      ParamStore ps;
      Parameter& q = s.make_param(ps, "q", {d.tq, d.d}, salt++);
      Parameter& k = s.make_param(ps, "k", {d.tk, d.d}, salt++);
      Parameter& v = s.make_param(ps, "v", {d.tk, d.d}, salt++);
      std::string sh = std::to_string(d.tq) + "x" + std::to_string(d.tk) + "x" +
                       std::to_string(d.d) + "h" + std::to_string(d.heads) +
                       (d.causal ? "c" : "x");
      s.run("attention_core", sh, ps, [&, d](Tape& t) {
        return reduce(
            t, attention_core(t.leaf(q), t.leaf(k), t.leaf(v), d.heads, d.causal), 7);
      });
    }
  }

  // Embedding gather with repeated ids.
  {
    struct EM {
      int V, d;
      std::vector<int> ids;
    };
    for (const EM& d : {EM{5, 3, {0, 2, 2, 4}}, EM{3, 2, {1, 1, 1}},
                        EM{8, 4, {7, 0, 3, 3, 5}}}) {
      ParamStore ps;
      Parameter& tab = s.make_param(ps, "tab", {d.V, d.d}, salt++);
      std::string sh = std::to_string(d.V) + "x" + std::to_string(d.d) + "/" +
                       std::to_string(d.ids.size());
      s.run("embedding", sh, ps, [&, d](Tape& t) {
        return reduce(t, embedding(t.leaf(tab), d.ids), 7);
      });
    }
  }

  // Cross entropy, mean and masked sum.
  {
    struct CE {
      int T, V;
    };
    for (CE d : {CE{3, 5}, CE{1, 4}, CE{6, 3}}) {
      ParamStore ps;
      Parameter& lg = s.make_param(ps, "logits", {d.T, d.V}, salt++);
      std::vector<int> targets;
      Rng r(mix64(seed, salt++));
      for (int i = 0; i < d.T; ++i) targets.push_back(r.below(d.V));
      std::vector<std::uint8_t> mask;
      for (int i = 0; i < d.T; ++i) mask.push_back(i % 2 == 0 ? 1 : 0);
      std::string sh = std::to_string(d.T) + "x" + std::to_string(d.V);
      s.run("cross_entropy", sh, ps, [&, targets](Tape& t) {
        return cross_entropy(t.leaf(lg), targets);
      });
      s.run("cross_entropy_sum", sh, ps, [&, targets, mask](Tape& t) {
        return cross_entropy_sum(t.leaf(lg), targets, &mask);
      });
    }
  }

  // Binary cross entropy on logits.
  {
    for (int T : {2, 4, 7}) {
      ParamStore ps;
      Parameter& lg = s.make_param(ps, "logits", {T, 1}, salt++);
      std::vector<double> targets;
      std::vector<std::uint8_t> mask;
      Rng r(mix64(seed, salt++));
      for (int i = 0; i < T; ++i) {
        targets.push_back(r.uniform() < 0.5 ? 0.0 : 1.0);
        mask.push_back(i == T - 1 || r.uniform() < 0.7 ? 1 : 0);
      }
      std::string sh = std::to_string(T) + "x1";
      s.run("bce_logits_sum", sh, ps, [&, targets, mask](Tape& t) {
        return bce_logits_sum(t.leaf(lg), targets, &mask);
      });
    }
  }

  // Composite: linear -> gelu -> linear -> cross entropy.
  {
    struct LN {
      int T, in, mid, out;
    };
    for (LN d : {LN{3, 4, 5, 3}, LN{2, 2, 3, 4}, LN{5, 3, 4, 2}}) {
      ParamStore ps;
      Rng init(mix64(seed, salt++));
      Linear l1 = Linear::create(ps, "l1", d.in, d.mid, init);
      Linear l2 = Linear::create(ps, "l2", d.mid, d.out, init);
      Array x = init_normal(init, {d.T, d.in}, 1.0);
      std::vector<int> targets;
      for (int i = 0; i < d.T; ++i) targets.push_back(i % d.out);
      std::string sh = std::to_string(d.T) + "x" + std::to_string(d.in) + "-" +
                       std::to_string(d.mid) + "-" + std::to_string(d.out);
      s.run("linear_chain", sh, ps, [&, x, targets](Tape& t) {
        return cross_entropy(l2(t, gelu(l1(t, t.leaf(x)))), targets);
      });
    }
  }

  // Composite: full pre-norm transformer block (eval mode, no dropout).
  {
    struct TB {
      int T, d, heads, ffn;
      bool causal;
    };
    for (TB d : {TB{4, 4, 2, 8, true}, TB{3, 6, 3, 4, false}, TB{2, 4, 1, 6, true}}) {
      ParamStore ps;
      Rng init(mix64(seed, salt++));
      TransformerBlock blk = TransformerBlock::create(ps, "blk", d.d, d.heads,
                                                      d.ffn, 0.0, d.causal, init);
      Array x = init_normal(init, {d.T, d.d}, 1.0);
      std::string sh = std::to_string(d.T) + "x" + std::to_string(d.d) + "h" +
                       std::to_string(d.heads) + (d.causal ? "c" : "x");
      s.run("transformer_block", sh, ps, [&, x](Tape& t) {
        Fwd f{t, false, nullptr};
        return reduce(t, blk(f, t.leaf(x)), 7);
      });
    }
  }

  return GradCheckReport{std::move(s.cases)};
}

}  // namespace ham
