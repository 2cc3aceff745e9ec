#include "ham/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <utility>

namespace ham {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

constexpr double kRmsNormEps = 1e-6;
constexpr double kLayerNormEps = 1e-5;

void axpy(Array& dst, const Array& src, double s) {
  double* d = dst.data();
  const double* a = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s * a[i];
}

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError("operands belong to different tapes");
  }
  return *a.tape();
}

void require_rank2(const char* op, const Array& a) {
  if (a.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 array, got shape " +
                     a.shape_str());
  }
}

double stable_softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::leaf(Array value) {
  nodes_.push_back(Node{std::move(value), Array(), {}, nullptr, nullptr});
  nodes_.back().grad = Array::zeros_like(nodes_.back().value);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Parameter& p) {
  auto it = param_leafs_.find(&p);
  if (it != param_leafs_.end()) return Var(this, it->second);
  Var v = leaf(p.value);
  nodes_.back().param = &p;
  param_leafs_.emplace(&p, v.id());
  return v;
}

Var Tape::make(Array value, std::vector<int> parents,
               std::function<void(Tape&, int)> backward) {
  nodes_.push_back(Node{std::move(value), Array(), std::move(parents),
                        std::move(backward), nullptr});
  nodes_.back().grad = Array::zeros_like(nodes_.back().value);
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw ContractError("backward: root from another tape");
  if (backward_done_) throw ContractError("backward: tape already consumed");
  backward_done_ = true;
  Node& r = node(root.id());
  if (r.value.size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + r.value.shape_str());
  }
  r.grad.fill(1.0);
  for (int id = root.id(); id >= 0; --id) {
    Node& n = node(id);
    if (n.backward) n.backward(*this, id);
  }
  for (auto& n : nodes_) {
    if (n.param != nullptr) axpy(n.param->grad, n.grad, 1.0);
  }
}

// ---- elementwise ----

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape("add", a.value(), b.value());
  Array y = a.value();
  axpy(y, b.value(), 1.0);
  return t.make(std::move(y), {a.id(), b.id()}, [](Tape& t, int self) {
    auto& n = t.node(self);
    axpy(t.node(n.parents[0]).grad, n.grad, 1.0);
    axpy(t.node(n.parents[1]).grad, n.grad, 1.0);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape("sub", a.value(), b.value());
  Array y = a.value();
  axpy(y, b.value(), -1.0);
  return t.make(std::move(y), {a.id(), b.id()}, [](Tape& t, int self) {
    auto& n = t.node(self);
    axpy(t.node(n.parents[0]).grad, n.grad, 1.0);
    axpy(t.node(n.parents[1]).grad, n.grad, -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape("mul", a.value(), b.value());
  Array y = a.value();
  {
    double* d = y.data();
    const double* bv = b.value().data();
    for (std::size_t i = 0; i < y.size(); ++i) d[i] *= bv[i];
  }
  return t.make(std::move(y), {a.id(), b.id()}, [](Tape& t, int self) {
    auto& n = t.node(self);
    auto& pa = t.node(n.parents[0]);
    auto& pb = t.node(n.parents[1]);
    const double* g = n.grad.data();
    const double* av = pa.value.data();
    const double* bv = pb.value.data();
    double* ga = pa.grad.data();
    double* gb = pb.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ga[i] += g[i] * bv[i];
      gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  Array y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
  return t.make(std::move(y), {a.id()}, [s](Tape& t, int self) {
    auto& n = t.node(self);
    axpy(t.node(n.parents[0]).grad, n.grad, s);
  });
}

Var add_rowvec(Var x, Var bias) {
  Tape& t = same_tape(x, bias);
  require_rank2("add_rowvec", x.value());
  const Array& b = bias.value();
  int d = x.value().cols();
  bool ok = (b.ndim() == 1 && b.dim(0) == d) ||
            (b.ndim() == 2 && b.dim(0) == 1 && b.dim(1) == d);
  if (!ok) {
    throw ShapeError("add_rowvec: bias shape " + b.shape_str() +
                     " does not broadcast over rows of " + x.value().shape_str());
  }
  Array y = x.value();
  int T = y.rows();
  for (int r = 0; r < T; ++r) {
    for (int c = 0; c < d; ++c) y.at(r, c) += b[static_cast<std::size_t>(c)];
  }
  return t.make(std::move(y), {x.id(), bias.id()}, [T, d](Tape& t, int self) {
    auto& n = t.node(self);
    axpy(t.node(n.parents[0]).grad, n.grad, 1.0);
    Array& gb = t.node(n.parents[1]).grad;
    for (int r = 0; r < T; ++r) {
      for (int c = 0; c < d; ++c) gb[static_cast<std::size_t>(c)] += n.grad.at(r, c);
    }
  });
}

// ---- linear algebra ----

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_rank2("matmul", a.value());
  require_rank2("matmul", b.value());
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + av.shape_str() +
                     " vs " + bv.shape_str());
  }
  int m = av.rows(), k = av.cols(), n = bv.cols();
  Array y({m, n});
  MutMap(y.data(), m, n).noalias() =
      ConstMap(av.data(), m, k) * ConstMap(bv.data(), k, n);
  return t.make(std::move(y), {a.id(), b.id()}, [m, k, n](Tape& t, int self) {
    auto& nd = t.node(self);
    auto& pa = t.node(nd.parents[0]);
    auto& pb = t.node(nd.parents[1]);
    ConstMap G(nd.grad.data(), m, n);
    ConstMap A(pa.value.data(), m, k);
    ConstMap B(pb.value.data(), k, n);
    MutMap(pa.grad.data(), m, k).noalias() += G * B.transpose();
    MutMap(pb.grad.data(), k, n).noalias() += A.transpose() * G;
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = *parts[0].tape();
  int cols = parts[0].value().cols();
  int rows = 0;
  std::vector<int> ids;
  std::vector<int> row_counts;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ContractError("concat_rows: mixed tapes");
    require_rank2("concat_rows", p.value());
    if (p.value().cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + p.value().shape_str() +
                       " vs " + parts[0].value().shape_str());
    }
    ids.push_back(p.id());
    row_counts.push_back(p.value().rows());
    rows += p.value().rows();
  }
  Array y({rows, cols});
  int r0 = 0;
  for (const Var& p : parts) {
    const Array& v = p.value();
    for (int r = 0; r < v.rows(); ++r) {
      for (int c = 0; c < cols; ++c) y.at(r0 + r, c) = v.at(r, c);
    }
    r0 += v.rows();
  }
  return t.make(std::move(y), std::move(ids),
                [row_counts, cols](Tape& t, int self) {
                  auto& n = t.node(self);
                  int r0 = 0;
                  for (std::size_t i = 0; i < n.parents.size(); ++i) {
                    Array& gp = t.node(n.parents[i]).grad;
                    for (int r = 0; r < row_counts[i]; ++r) {
                      for (int c = 0; c < cols; ++c) gp.at(r, c) += n.grad.at(r0 + r, c);
                    }
                    r0 += row_counts[i];
                  }
                });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_rank2("concat_cols", a.value());
  require_rank2("concat_cols", b.value());
  if (a.value().rows() != b.value().rows()) {
    throw ShapeError("concat_cols: row mismatch " + a.value().shape_str() +
                     " vs " + b.value().shape_str());
  }
  int T = a.value().rows(), ca = a.value().cols(), cb = b.value().cols();
  Array y({T, ca + cb});
  for (int r = 0; r < T; ++r) {
    for (int c = 0; c < ca; ++c) y.at(r, c) = a.value().at(r, c);
    for (int c = 0; c < cb; ++c) y.at(r, ca + c) = b.value().at(r, c);
  }
  return t.make(std::move(y), {a.id(), b.id()}, [T, ca, cb](Tape& t, int self) {
    auto& n = t.node(self);
    Array& ga = t.node(n.parents[0]).grad;
    Array& gb = t.node(n.parents[1]).grad;
    for (int r = 0; r < T; ++r) {
      for (int c = 0; c < ca; ++c) ga.at(r, c) += n.grad.at(r, c);
      for (int c = 0; c < cb; ++c) gb.at(r, c) += n.grad.at(r, ca + c);
    }
  });
}

Var slice_rows(Var a, int begin, int end) {
  Tape& t = *a.tape();
  require_rank2("slice_rows", a.value());
  int T = a.value().rows(), d = a.value().cols();
  if (begin < 0 || end > T || begin >= end) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + a.value().shape_str());
  }
  Array y({end - begin, d});
  for (int r = begin; r < end; ++r) {
    for (int c = 0; c < d; ++c) y.at(r - begin, c) = a.value().at(r, c);
  }
  return t.make(std::move(y), {a.id()}, [begin, end, d](Tape& t, int self) {
    auto& n = t.node(self);
    Array& ga = t.node(n.parents[0]).grad;
    for (int r = begin; r < end; ++r) {
      for (int c = 0; c < d; ++c) ga.at(r, c) += n.grad.at(r - begin, c);
    }
  });
}

Var conv1d_same(Var x, Var w, Var b, int kernel) {
  Tape& t = same_tape(x, w);
  if (kernel <= 0 || kernel % 2 == 0) {
    throw ConfigError("conv1d_same: kernel must be odd and positive, got " +
                      std::to_string(kernel));
  }
  require_rank2("conv1d_same", x.value());
  require_rank2("conv1d_same", w.value());
  int T = x.value().rows(), cin = x.value().cols();
  if (w.value().rows() != kernel * cin) {
    throw ShapeError("conv1d_same: weight shape " + w.value().shape_str() +
                     " does not match kernel " + std::to_string(kernel) +
                     " and input " + x.value().shape_str());
  }
  int cout = w.value().cols();
  const Array& bv = b.value();
  if (!(bv.ndim() == 1 && bv.dim(0) == cout)) {
    throw ShapeError("conv1d_same: bias shape " + bv.shape_str() +
                     " does not match " + std::to_string(cout) + " channels");
  }
  int half = kernel / 2;
  Array y({T, cout});
  const Array& xv = x.value();
  const Array& wv = w.value();
  for (int r = 0; r < T; ++r) {
    for (int o = 0; o < cout; ++o) y.at(r, o) = bv[static_cast<std::size_t>(o)];
    for (int k = 0; k < kernel; ++k) {
      int src = r + k - half;
      if (src < 0 || src >= T) continue;
      for (int ci = 0; ci < cin; ++ci) {
        double xval = xv.at(src, ci);
        if (xval == 0.0) continue;
        const int wrow = k * cin + ci;
        for (int o = 0; o < cout; ++o) y.at(r, o) += xval * wv.at(wrow, o);
      }
    }
  }
  return t.make(std::move(y), {x.id(), w.id(), b.id()},
                [T, cin, cout, kernel, half](Tape& t, int self) {
                  auto& n = t.node(self);
                  auto& px = t.node(n.parents[0]);
                  auto& pw = t.node(n.parents[1]);
                  auto& pb = t.node(n.parents[2]);
                  const Array& g = n.grad;
                  for (int r = 0; r < T; ++r) {
                    for (int o = 0; o < cout; ++o) {
                      pb.grad[static_cast<std::size_t>(o)] += g.at(r, o);
                    }
                    for (int k = 0; k < kernel; ++k) {
                      int src = r + k - half;
                      if (src < 0 || src >= T) continue;
                      for (int ci = 0; ci < cin; ++ci) {
                        const int wrow = k * cin + ci;
                        double gx = 0.0;
                        for (int o = 0; o < cout; ++o) {
                          double go = g.at(r, o);
                          gx += go * pw.value.at(wrow, o);
                          pw.grad.at(wrow, o) += go * px.value.at(src, ci);
                        }
                        px.grad.at(src, ci) += gx;
                      }
                    }
                  }
                });
}

// ---- nonlinearities and norms ----

Var gelu(Var x) {
  Tape& t = *x.tape();
  Array y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = y[i];
    y[i] = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
  }
  return t.make(std::move(y), {x.id()}, [](Tape& t, int self) {
    auto& n = t.node(self);
    auto& px = t.node(n.parents[0]);
    const double* g = n.grad.data();
    const double* xv = px.value.data();
    double* gx = px.grad.data();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      double v = xv[i];
      double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var softmax_rows(Var x) {
  Tape& t = *x.tape();
  require_rank2("softmax_rows", x.value());
  int T = x.value().rows(), d = x.value().cols();
  Array y({T, d});
  for (int r = 0; r < T; ++r) {
    double m = x.value().at(r, 0);
    for (int c = 1; c < d; ++c) m = std::max(m, x.value().at(r, c));
    double z = 0.0;
    for (int c = 0; c < d; ++c) {
      double e = std::exp(x.value().at(r, c) - m);
      y.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < d; ++c) y.at(r, c) /= z;
  }
  return t.make(std::move(y), {x.id()}, [T, d](Tape& t, int self) {
    auto& n = t.node(self);
    Array& gx = t.node(n.parents[0]).grad;
    for (int r = 0; r < T; ++r) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += n.grad.at(r, c) * n.value.at(r, c);
      for (int c = 0; c < d; ++c) {
        gx.at(r, c) += n.value.at(r, c) * (n.grad.at(r, c) - dot);
      }
    }
  });
}

Var rmsnorm(Var x, Var gain) {
  Tape& t = same_tape(x, gain);
  require_rank2("rmsnorm", x.value());
  int T = x.value().rows(), d = x.value().cols();
  const Array& gv = gain.value();
  if (!(gv.ndim() == 1 && gv.dim(0) == d)) {
    throw ShapeError("rmsnorm: gain shape " + gv.shape_str() + " does not match " +
                     x.value().shape_str());
  }
  Array y({T, d});
  std::vector<double> inv_rms(static_cast<std::size_t>(T));
  for (int r = 0; r < T; ++r) {
    double ms = 0.0;
    for (int c = 0; c < d; ++c) {
      double v = x.value().at(r, c);
      ms += v * v;
    }
    ms /= d;
    double inv = 1.0 / std::sqrt(ms + kRmsNormEps);
    inv_rms[static_cast<std::size_t>(r)] = inv;
    for (int c = 0; c < d; ++c) {
      y.at(r, c) = x.value().at(r, c) * inv * gv[static_cast<std::size_t>(c)];
    }
  }
  return t.make(std::move(y), {x.id(), gain.id()},
                [T, d, inv_rms](Tape& t, int self) {
                  auto& n = t.node(self);
                  auto& px = t.node(n.parents[0]);
                  auto& pg = t.node(n.parents[1]);
                  for (int r = 0; r < T; ++r) {
                    double inv = inv_rms[static_cast<std::size_t>(r)];
                    double s = 0.0;
                    for (int c = 0; c < d; ++c) {
                      s += n.grad.at(r, c) * pg.value[static_cast<std::size_t>(c)] *
                           px.value.at(r, c);
                    }
                    double coef = inv * inv * inv * s / d;
                    for (int c = 0; c < d; ++c) {
                      double xv = px.value.at(r, c);
                      px.grad.at(r, c) +=
                          n.grad.at(r, c) * pg.value[static_cast<std::size_t>(c)] * inv -
                          xv * coef;
                      pg.grad[static_cast<std::size_t>(c)] += n.grad.at(r, c) * xv * inv;
                    }
                  }
                });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Tape& t = same_tape(x, gain);
  require_rank2("layer_norm", x.value());
  int T = x.value().rows(), d = x.value().cols();
  const Array& gv = gain.value();
  const Array& bv = bias.value();
  if (!(gv.ndim() == 1 && gv.dim(0) == d) || !(bv.ndim() == 1 && bv.dim(0) == d)) {
    throw ShapeError("layer_norm: gain/bias shapes " + gv.shape_str() + "/" +
                     bv.shape_str() + " do not match " + x.value().shape_str());
  }
  Array y({T, d});
  std::vector<double> mean(static_cast<std::size_t>(T));
  std::vector<double> inv_std(static_cast<std::size_t>(T));
  for (int r = 0; r < T; ++r) {
    double mu = 0.0;
    for (int c = 0; c < d; ++c) mu += x.value().at(r, c);
    mu /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      double v = x.value().at(r, c) - mu;
      var += v * v;
    }
    var /= d;
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    mean[static_cast<std::size_t>(r)] = mu;
    inv_std[static_cast<std::size_t>(r)] = inv;
    for (int c = 0; c < d; ++c) {
      y.at(r, c) = (x.value().at(r, c) - mu) * inv * gv[static_cast<std::size_t>(c)] +
                   bv[static_cast<std::size_t>(c)];
    }
  }
  return t.make(
      std::move(y), {x.id(), gain.id(), bias.id()},
      [T, d, mean, inv_std](Tape& t, int self) {
        auto& n = t.node(self);
        auto& px = t.node(n.parents[0]);
        auto& pg = t.node(n.parents[1]);
        auto& pb = t.node(n.parents[2]);
        for (int r = 0; r < T; ++r) {
          double mu = mean[static_cast<std::size_t>(r)];
          double inv = inv_std[static_cast<std::size_t>(r)];
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int c = 0; c < d; ++c) {
            double xhat = (px.value.at(r, c) - mu) * inv;
            double dxhat = n.grad.at(r, c) * pg.value[static_cast<std::size_t>(c)];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            pg.grad[static_cast<std::size_t>(c)] += n.grad.at(r, c) * xhat;
            pb.grad[static_cast<std::size_t>(c)] += n.grad.at(r, c);
          }
          for (int c = 0; c < d; ++c) {
            double xhat = (px.value.at(r, c) - mu) * inv;
            double dxhat = n.grad.at(r, c) * pg.value[static_cast<std::size_t>(c)];
            px.grad.at(r, c) +=
                inv * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
          }
        }
      });
}

// ---- attention ----

Var attention_core(Var q, Var k, Var v, int heads, bool causal) {
  Tape& t = same_tape(q, k);
  same_tape(k, v);
  require_rank2("attention_core", q.value());
  require_rank2("attention_core", k.value());
  require_rank2("attention_core", v.value());
  int Tq = q.value().rows(), d = q.value().cols();
  int Tk = k.value().rows();
  if (k.value().cols() != d || v.value().cols() != d) {
    throw ShapeError("attention_core: width mismatch q " + q.value().shape_str() +
                     " k " + k.value().shape_str() + " v " + v.value().shape_str());
  }
  if (v.value().rows() != Tk) {
    throw ShapeError("attention_core: key/value length mismatch " +
                     k.value().shape_str() + " vs " + v.value().shape_str());
  }
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError("attention_core: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (causal && Tq != Tk) {
    throw ContractError("attention_core: causal attention requires equal query and key lengths, got " +
                        std::to_string(Tq) + " and " + std::to_string(Tk));
  }
  int dh = d / heads;
  double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Array& qv = q.value();
  const Array& kv = k.value();
  const Array& vv = v.value();
  Array y({Tq, d});
  // Per-head attention weights, kept for the backward pass. Entries beyond
  // the causal bound are never written or read.
  std::vector<Array> weights(static_cast<std::size_t>(heads), Array({Tq, Tk}));
  std::vector<double> scores(static_cast<std::size_t>(Tk));
  for (int h = 0; h < heads; ++h) {
    int c0 = h * dh;
    Array& W = weights[static_cast<std::size_t>(h)];
    for (int i = 0; i < Tq; ++i) {
      int bound = causal ? i : Tk - 1;
      double m = -1e300;
      for (int j = 0; j <= bound; ++j) {
        double s = 0.0;
        for (int c = 0; c < dh; ++c) s += qv.at(i, c0 + c) * kv.at(j, c0 + c);
        s *= inv_scale;
        scores[static_cast<std::size_t>(j)] = s;
        m = std::max(m, s);
      }
      double z = 0.0;
      for (int j = 0; j <= bound; ++j) {
        double e = std::exp(scores[static_cast<std::size_t>(j)] - m);
        W.at(i, j) = e;
        z += e;
      }
      for (int j = 0; j <= bound; ++j) W.at(i, j) /= z;
      for (int c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (int j = 0; j <= bound; ++j) acc += W.at(i, j) * vv.at(j, c0 + c);
        y.at(i, c0 + c) = acc;
      }
    }
  }
  return t.make(
      std::move(y), {q.id(), k.id(), v.id()},
      [Tq, Tk, heads, dh, causal, inv_scale, weights](Tape& t, int self) {
        auto& n = t.node(self);
        auto& pq = t.node(n.parents[0]);
        auto& pk = t.node(n.parents[1]);
        auto& pv = t.node(n.parents[2]);
        std::vector<double> dW(static_cast<std::size_t>(Tk));
        for (int h = 0; h < heads; ++h) {
          int c0 = h * dh;
          const Array& W = weights[static_cast<std::size_t>(h)];
          for (int i = 0; i < Tq; ++i) {
            int bound = causal ? i : Tk - 1;
            double wdot = 0.0;
            for (int j = 0; j <= bound; ++j) {
              double dw = 0.0;
              for (int c = 0; c < dh; ++c) {
                dw += n.grad.at(i, c0 + c) * pv.value.at(j, c0 + c);
              }
              dW[static_cast<std::size_t>(j)] = dw;
              wdot += W.at(i, j) * dw;
            }
            for (int j = 0; j <= bound; ++j) {
              double w = W.at(i, j);
              double ds = w * (dW[static_cast<std::size_t>(j)] - wdot) * inv_scale;
              for (int c = 0; c < dh; ++c) {
                pq.grad.at(i, c0 + c) += ds * pk.value.at(j, c0 + c);
                pk.grad.at(j, c0 + c) += ds * pq.value.at(i, c0 + c);
                pv.grad.at(j, c0 + c) += w * n.grad.at(i, c0 + c);
              }
            }
          }
        }
      });
}

// ---- gathers, dropout, reductions ----

Var embedding(Var table, const std::vector<int>& ids) {
  Tape& t = *table.tape();
  require_rank2("embedding", table.value());
  int V = table.value().rows(), d = table.value().cols();
  Array y({static_cast<int>(ids.size()), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    int id = ids[r];
    if (id < 0 || id >= V) {
      throw VocabError("embedding: id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(V));
    }
    for (int c = 0; c < d; ++c) y.at(static_cast<int>(r), c) = table.value().at(id, c);
  }
  return t.make(std::move(y), {table.id()}, [ids, d](Tape& t, int self) {
    auto& n = t.node(self);
    Array& gt = t.node(n.parents[0]).grad;
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (int c = 0; c < d; ++c) {
        gt.at(ids[r], c) += n.grad.at(static_cast<int>(r), c);
      }
    }
  });
}

Var dropout(Var x, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  Tape& t = *x.tape();
  double keep_scale = 1.0 / (1.0 - rate);
  Array mask = Array::zeros_like(x.value());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = (rng.uniform() >= rate) ? keep_scale : 0.0;
  }
  Array y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return t.make(std::move(y), {x.id()}, [mask](Tape& t, int self) {
    auto& n = t.node(self);
    Array& gx = t.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * mask[i];
  });
}

Var sum_all(Var x) {
  Tape& t = *x.tape();
  double s = 0.0;
  for (std::size_t i = 0; i < x.value().size(); ++i) s += x.value()[i];
  return t.make(Array::scalar(s), {x.id()}, [](Tape& t, int self) {
    auto& n = t.node(self);
    Array& gx = t.node(n.parents[0]).grad;
    double g = n.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean_all(Var x) {
  std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean_all: empty array");
  return scale(sum_all(x), 1.0 / static_cast<double>(n));
}

// ---- losses ----

namespace {

Var cross_entropy_impl(Var logits, const std::vector<int>& targets,
                       const std::vector<std::uint8_t>* mask, bool mean) {
  Tape& t = *logits.tape();
  require_rank2("cross_entropy", logits.value());
  int T = logits.value().rows(), V = logits.value().cols();
  if (static_cast<int>(targets.size()) != T) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(T) + " logit rows");
  }
  if (mask != nullptr && static_cast<int>(mask->size()) != T) {
    throw ShapeError("cross_entropy: mask length " + std::to_string(mask->size()) +
                     " does not match " + std::to_string(T) + " rows");
  }
  if (mean && T == 0) throw ShapeError("cross_entropy: no positions");
  // Per-row softmax probabilities, kept for the backward pass.
  Array probs({T, V});
  double loss = 0.0;
  for (int r = 0; r < T; ++r) {
    int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0 || tgt >= V) {
      throw IndexError("cross_entropy: target id " + std::to_string(tgt) +
                       " outside [0, " + std::to_string(V) + ") at row " +
                       std::to_string(r));
    }
    double m = logits.value().at(r, 0);
    for (int c = 1; c < V; ++c) m = std::max(m, logits.value().at(r, c));
    double z = 0.0;
    for (int c = 0; c < V; ++c) {
      double e = std::exp(logits.value().at(r, c) - m);
      probs.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < V; ++c) probs.at(r, c) /= z;
    bool counted = (mask == nullptr) || (*mask)[static_cast<std::size_t>(r)] != 0;
    if (counted) {
      loss += std::log(z) + m - logits.value().at(r, tgt);
    }
  }
  double w = mean ? 1.0 / T : 1.0;
  std::vector<std::uint8_t> mask_copy;
  if (mask != nullptr) mask_copy = *mask;
  bool has_mask = mask != nullptr;
  return t.make(
      Array::scalar(loss * w), {logits.id()},
      [T, V, w, targets, probs, mask_copy, has_mask](Tape& t, int self) {
        auto& n = t.node(self);
        Array& gl = t.node(n.parents[0]).grad;
        double g = n.grad[0] * w;
        for (int r = 0; r < T; ++r) {
          if (has_mask && mask_copy[static_cast<std::size_t>(r)] == 0) continue;
          for (int c = 0; c < V; ++c) gl.at(r, c) += g * probs.at(r, c);
          gl.at(r, targets[static_cast<std::size_t>(r)]) -= g;
        }
      });
}

}  // namespace

Var cross_entropy(Var logits, const std::vector<int>& targets) {
  return cross_entropy_impl(logits, targets, nullptr, true);
}

Var cross_entropy_sum(Var logits, const std::vector<int>& targets,
                      const std::vector<std::uint8_t>* mask) {
  return cross_entropy_impl(logits, targets, mask, false);
}

Var l1(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape("l1", a.value(), b.value());
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    s += std::abs(a.value()[i] - b.value()[i]);
  }
  return t.make(Array::scalar(s), {a.id(), b.id()}, [](Tape& t, int self) {
    auto& n = t.node(self);
    auto& pa = t.node(n.parents[0]);
    auto& pb = t.node(n.parents[1]);
    double g = n.grad[0];
    for (std::size_t i = 0; i < pa.value.size(); ++i) {
      double diff = pa.value[i] - pb.value[i];
      double sgn = (diff > 0.0) ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      pa.grad[i] += g * sgn;
      pb.grad[i] -= g * sgn;
    }
  });
}

Var bce_logits_sum(Var logits, const std::vector<double>& targets,
                   const std::vector<std::uint8_t>* mask) {
  Tape& t = *logits.tape();
  const Array& lv = logits.value();
  int T;
  if (lv.ndim() == 2 && lv.cols() == 1) {
    T = lv.rows();
  } else if (lv.ndim() == 1) {
    T = lv.dim(0);
  } else {
    throw ShapeError("bce_logits_sum: expected [T x 1] or [T] logits, got " +
                     lv.shape_str());
  }
  if (static_cast<int>(targets.size()) != T) {
    throw ShapeError("bce_logits_sum: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(T) + " logits");
  }
  if (mask != nullptr && static_cast<int>(mask->size()) != T) {
    throw ShapeError("bce_logits_sum: mask length mismatch");
  }
  double loss = 0.0;
  for (int r = 0; r < T; ++r) {
    if (mask != nullptr && (*mask)[static_cast<std::size_t>(r)] == 0) continue;
    double z = lv[static_cast<std::size_t>(r)];
    loss += stable_softplus(z) - targets[static_cast<std::size_t>(r)] * z;
  }
  std::vector<std::uint8_t> mask_copy;
  if (mask != nullptr) mask_copy = *mask;
  bool has_mask = mask != nullptr;
  return t.make(Array::scalar(loss), {logits.id()},
                [T, targets, mask_copy, has_mask](Tape& t, int self) {
                  auto& n = t.node(self);
                  Array& gl = t.node(n.parents[0]).grad;
                  double g = n.grad[0];
                  for (int r = 0; r < T; ++r) {
                    if (has_mask && mask_copy[static_cast<std::size_t>(r)] == 0) continue;
                    double z = t.node(n.parents[0]).value[static_cast<std::size_t>(r)];
                    gl[static_cast<std::size_t>(r)] +=
                        g * (sigmoid(z) - targets[static_cast<std::size_t>(r)]);
                  }
                });
}

}  // namespace ham
