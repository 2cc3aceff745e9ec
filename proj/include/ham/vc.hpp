#pragma once

#include <cstdint>
#include <vector>

#include "ham/array.hpp"
#include "ham/config.hpp"
#include "ham/dataset.hpp"

namespace ham {

// Inputs to the conversion generator: content features (one row per frame),
// a non-negative fundamental-frequency track, and a speaker embedding.
struct VcInput {
  Array content;  // [T x feature_dim]
  Array f0;       // [T x 1] or [T], values >= 0
  Array speaker;  // [speaker_dim]
};

// Stage shapes recorded during a forward pass.
struct VcTrace {
  std::vector<int> pre_shape;         // (96, T, F)
  std::vector<int> bottleneck_shape;  // (384, T, F/4)
  std::vector<int> out_shape;         // (96, T, F)
};

// Frequency-domain UNet with frozen seeded weights. Every convolution has
// kernel (1, 7): all mixing happens along the frequency axis, never across
// time. Channels run 96 -> 192 -> 384 at the bottleneck and back; the
// projected speaker embedding is added before each upsampling stage. The
// model is a fixed random function used only to manufacture voice-converted
// training data, so nothing here touches the autodiff tape.
class VcModel {
 public:
  explicit VcModel(const ModelConfig& cfg);

  // -> feature map of shape (96, T, freq_bins).
  Array forward(const VcInput& input, VcTrace* trace = nullptr) const;

  // Collapse a (96, T, F) map back to frame features [T x feature_dim].
  Array readout(const Array& map) const;

  int freq_bins() const { return freq_bins_; }

 private:
  struct Conv {
    Array w;  // [(cin*7) x cout]
    Array b;  // [cout]
    int cin = 0, cout = 0, stride = 1;
  };

  Array apply_conv(const Array& x, const Conv& c) const;
  static Array upsample2(const Array& x);
  void add_speaker(Array& x, const Array& speaker, const Array& proj) const;

  int content_dim_, speaker_dim_, freq_bins_;
  Array pre_w_, pre_b_;      // (content+1) -> 96*F
  Conv pre_res1_, pre_res2_;
  Conv enc1_, enc2_;
  Conv mid_res1_, mid_res2_;
  Array spk384_, spk192_;    // speaker projections per upsampling stage
  Conv up1_, up2_, out_;
  Array read_w_, read_b_;    // 96 -> feature_dim
};

// One synthetic record per (real record, generated speaker): the real
// record's features drive the content stream, a seeded speaker embedding and
// f0 track select the new voice, and the converted features are re-encoded
// with the frozen residual codec. Speaker ids start at `speaker_base`.
std::vector<DatasetRecord> generate_synthetic_corpus(
    const std::vector<DatasetRecord>& real, int n_speakers, std::uint64_t seed,
    const ModelConfig& cfg, int speaker_base = 1000);

}  // namespace ham
