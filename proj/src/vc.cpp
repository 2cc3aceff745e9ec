#include "ham/vc.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "ham/rng.hpp"
#include "ham/rvq.hpp"

namespace ham {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kKernel = 7;
constexpr int kBase = 96;
constexpr int kMid = 384;

double gelu_exact(double v) {
  return 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
}

}  // namespace

VcModel::VcModel(const ModelConfig& cfg)
    : content_dim_(cfg.feature_dim),
      speaker_dim_(cfg.vc_speaker_dim),
      freq_bins_(cfg.vc_freq_bins) {
  if (freq_bins_ % 4 != 0 || freq_bins_ <= 0) {
    throw ConfigError("VcModel: freq_bins must be a positive multiple of 4, got " +
                      std::to_string(freq_bins_));
  }
  Rng rng(cfg.vc_seed);
  auto normal = [&rng](std::vector<int> shape, double stddev) {
    Array a(std::move(shape));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal() * stddev;
    return a;
  };
  auto make_conv = [&](int cin, int cout, int stride) {
    Conv c;
    c.w = normal({cin * kKernel, cout}, 1.0 / std::sqrt(static_cast<double>(cin * kKernel)));
    c.b = normal({cout}, 0.05);
    c.cin = cin;
    c.cout = cout;
    c.stride = stride;
    return c;
  };

  int in_dim = content_dim_ + 1;
  pre_w_ = normal({in_dim, kBase * freq_bins_}, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  pre_b_ = normal({kBase * freq_bins_}, 0.05);
  pre_res1_ = make_conv(kBase, kBase, 1);
  pre_res2_ = make_conv(kBase, kBase, 1);
  enc1_ = make_conv(kBase, kBase * 2, 2);
  enc2_ = make_conv(kBase * 2, kMid, 2);
  mid_res1_ = make_conv(kMid, kMid, 1);
  mid_res2_ = make_conv(kMid, kMid, 1);
  spk384_ = normal({speaker_dim_, kMid}, 1.0 / std::sqrt(static_cast<double>(speaker_dim_)));
  spk192_ = normal({speaker_dim_, kBase * 2}, 1.0 / std::sqrt(static_cast<double>(speaker_dim_)));
  up1_ = make_conv(kMid, kBase * 2, 1);
  up2_ = make_conv(kBase * 2, kBase, 1);
  out_ = make_conv(kBase, kBase, 1);
  read_w_ = normal({kBase, content_dim_}, 1.0 / std::sqrt(static_cast<double>(kBase)));
  read_b_ = normal({content_dim_}, 0.05);
}

// x: (cin, T, F). Kernel (1, 7), zero padding 3 on the frequency axis,
// optional stride along frequency. Each time slice is an independent
// im2col + GEMM.
Array VcModel::apply_conv(const Array& x, const Conv& c) const {
  const int cin = x.dim(0), T = x.dim(1), F = x.dim(2);
  if (cin != c.cin) {
    throw ShapeError("VcModel conv: input channels " + std::to_string(cin) +
                     " do not match weight channels " + std::to_string(c.cin));
  }
  const int Fo = (F + c.stride - 1) / c.stride;
  Array y({c.cout, T, Fo});
  RowMat col(Fo, cin * kKernel);
  Eigen::Map<const RowMat> W(c.w.data(), cin * kKernel, c.cout);
  RowMat out(Fo, c.cout);
  for (int t = 0; t < T; ++t) {
    col.setZero();
    for (int fo = 0; fo < Fo; ++fo) {
      int center = fo * c.stride;
      for (int k = 0; k < kKernel; ++k) {
        int fi = center + k - kKernel / 2;
        if (fi < 0 || fi >= F) continue;
        for (int ci = 0; ci < cin; ++ci) {
          col(fo, ci * kKernel + k) = x.at(ci, t, fi);
        }
      }
    }
    out.noalias() = col * W;
    for (int fo = 0; fo < Fo; ++fo) {
      for (int co = 0; co < c.cout; ++co) {
        y.at(co, t, fo) = out(fo, co) + c.b[static_cast<std::size_t>(co)];
      }
    }
  }
  return y;
}

Array VcModel::upsample2(const Array& x) {
  const int C = x.dim(0), T = x.dim(1), F = x.dim(2);
  Array y({C, T, F * 2});
  for (int c = 0; c < C; ++c) {
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        double v = x.at(c, t, f);
        y.at(c, t, 2 * f) = v;
        y.at(c, t, 2 * f + 1) = v;
      }
    }
  }
  return y;
}

void VcModel::add_speaker(Array& x, const Array& speaker, const Array& proj) const {
  const int C = x.dim(0), T = x.dim(1), F = x.dim(2);
  std::vector<double> bias(static_cast<std::size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (int s = 0; s < speaker_dim_; ++s) {
      acc += speaker[static_cast<std::size_t>(s)] * proj.at(s, c);
    }
    bias[static_cast<std::size_t>(c)] = acc;
  }
  for (int c = 0; c < C; ++c) {
    double v = bias[static_cast<std::size_t>(c)];
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) x.at(c, t, f) += v;
    }
  }
}

Array VcModel::forward(const VcInput& input, VcTrace* trace) const {
  const Array& content = input.content;
  if (content.ndim() != 2 || content.cols() != content_dim_) {
    throw ShapeError("VcModel: content " + content.shape_str() +
                     " does not match feature dimension " + std::to_string(content_dim_));
  }
  const int T = content.rows();
  if (T == 0) throw ValidationError("VcModel: empty content sequence");
  const Array& f0 = input.f0;
  bool f0_ok = (f0.ndim() == 1 && f0.dim(0) == T) ||
               (f0.ndim() == 2 && f0.dim(0) == T && f0.dim(1) == 1);
  if (!f0_ok) {
    throw ShapeError("VcModel: f0 shape " + f0.shape_str() + " does not cover " +
                     std::to_string(T) + " frames");
  }
  for (std::size_t i = 0; i < f0.size(); ++i) {
    if (!(f0[i] >= 0.0)) {
      throw ValidationError("VcModel: f0 must be non-negative and finite");
    }
  }
  if (!(input.speaker.ndim() == 1 && input.speaker.dim(0) == speaker_dim_)) {
    throw ShapeError("VcModel: speaker embedding " + input.speaker.shape_str() +
                     " does not match dimension " + std::to_string(speaker_dim_));
  }
  if (!content.all_finite()) {
    throw ValidationError("VcModel: non-finite content features");
  }

  const int F = freq_bins_;
  // Pre-projection: per frame, (content ++ f0) -> 96*F, laid out as (96, T, F).
  Array h({kBase, T, F});
  {
    Eigen::Map<const RowMat> W(pre_w_.data(), content_dim_ + 1, kBase * F);
    Eigen::VectorXd in(content_dim_ + 1);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < content_dim_; ++c) in(c) = content.at(t, c);
      in(content_dim_) = f0[static_cast<std::size_t>(t)] * 0.01;
      Eigen::RowVectorXd row = in.transpose() * W;
      for (int c = 0; c < kBase; ++c) {
        for (int f = 0; f < F; ++f) {
          h.at(c, t, f) = row(c * F + f) + pre_b_[static_cast<std::size_t>(c * F + f)];
        }
      }
    }
  }
  // Resnet at base width.
  {
    Array u = apply_conv(h, pre_res1_);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = gelu_exact(u[i]);
    u = apply_conv(u, pre_res2_);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += u[i];
  }
  if (trace != nullptr) trace->pre_shape = h.shape();

  Array e1 = apply_conv(h, enc1_);
  for (std::size_t i = 0; i < e1.size(); ++i) e1[i] = gelu_exact(e1[i]);
  Array e2 = apply_conv(e1, enc2_);
  for (std::size_t i = 0; i < e2.size(); ++i) e2[i] = gelu_exact(e2[i]);

  // Bottleneck resnet at (384, T, F/4).
  {
    Array u = apply_conv(e2, mid_res1_);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = gelu_exact(u[i]);
    u = apply_conv(u, mid_res2_);
    for (std::size_t i = 0; i < e2.size(); ++i) e2[i] += u[i];
  }
  if (trace != nullptr) trace->bottleneck_shape = e2.shape();

  add_speaker(e2, input.speaker, spk384_);
  Array d1 = apply_conv(upsample2(e2), up1_);
  for (std::size_t i = 0; i < d1.size(); ++i) d1[i] = gelu_exact(d1[i]);

  add_speaker(d1, input.speaker, spk192_);
  Array d2 = apply_conv(upsample2(d1), up2_);
  for (std::size_t i = 0; i < d2.size(); ++i) d2[i] = gelu_exact(d2[i]);

  Array y = apply_conv(d2, out_);
  if (trace != nullptr) trace->out_shape = y.shape();
  return y;
}

Array VcModel::readout(const Array& map) const {
  if (map.ndim() != 3 || map.dim(0) != kBase) {
    throw ShapeError("VcModel::readout: expected (96, T, F) map, got " + map.shape_str());
  }
  const int T = map.dim(1), F = map.dim(2);
  Array out({T, content_dim_});
  for (int t = 0; t < T; ++t) {
    for (int d = 0; d < content_dim_; ++d) {
      double acc = read_b_[static_cast<std::size_t>(d)];
      for (int c = 0; c < kBase; ++c) {
        double mean = 0.0;
        for (int f = 0; f < F; ++f) mean += map.at(c, t, f);
        mean /= F;
        acc += mean * read_w_.at(c, d);
      }
      out.at(t, d) = acc;
    }
  }
  return out;
}

std::vector<DatasetRecord> generate_synthetic_corpus(
    const std::vector<DatasetRecord>& real, int n_speakers, std::uint64_t seed,
    const ModelConfig& cfg, int speaker_base) {
  if (n_speakers <= 0) {
    throw ConfigError("generate_synthetic_corpus: n_speakers must be positive");
  }
  if (real.empty()) {
    throw ValidationError("generate_synthetic_corpus: no source records");
  }
  VcModel vc(cfg);
  ToyCodec codec(cfg);

  std::vector<Array> speakers;
  speakers.reserve(static_cast<std::size_t>(n_speakers));
  for (int s = 0; s < n_speakers; ++s) {
    Rng rng(mix64(seed, static_cast<std::uint64_t>(s), 0x5EEDull));
    Array emb({cfg.vc_speaker_dim});
    for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = rng.normal();
    speakers.push_back(std::move(emb));
  }

  std::vector<DatasetRecord> out;
  out.reserve(real.size() * static_cast<std::size_t>(n_speakers));
  for (std::size_t ri = 0; ri < real.size(); ++ri) {
    const DatasetRecord& src = real[ri];
    const int T = src.features.rows();
    for (int s = 0; s < n_speakers; ++s) {
      Rng rng(mix64(seed, static_cast<std::uint64_t>(ri), static_cast<std::uint64_t>(s)));
      VcInput input;
      input.content = src.features;
      input.speaker = speakers[static_cast<std::size_t>(s)];
      Array f0({T, 1});
      double base_hz = 120.0 + 40.0 * rng.uniform();
      for (int t = 0; t < T; ++t) {
        double v = base_hz + 25.0 * std::sin(2.0 * 3.14159265358979323846 * t / 16.0) +
                   3.0 * rng.normal();
        f0.at(t, 0) = std::max(0.0, v);
      }
      input.f0 = std::move(f0);

      Array converted = vc.readout(vc.forward(input));
      DatasetRecord rec;
      rec.id = src.id + "_vc" + std::to_string(s);
      rec.phonemes = src.phonemes;
      rec.codecs = codec.encode(converted);
      rec.features = std::move(converted);
      rec.speaker_id = speaker_base + s;
      rec.synthetic = true;
      rec.source_id = src.id;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace ham
