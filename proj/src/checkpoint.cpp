#include "ham/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "ham/errors.hpp"

namespace ham {

namespace {

constexpr char kMagic[8] = {'H', 'A', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, 4);
}

void put_i64(std::ostream& out, std::int64_t v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_array(std::ostream& out, const Array& a) {
  put_u32(out, static_cast<std::uint32_t>(a.ndim()));
  for (int i = 0; i < a.ndim(); ++i) put_u32(out, static_cast<std::uint32_t>(a.dim(i)));
  for (std::size_t i = 0; i < a.size(); ++i) put_f64(out, a[i]);
}

std::uint64_t get_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (in.gcount() != 8) throw ValidationError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  char buf[4];
  in.read(buf, 4);
  if (in.gcount() != 4) throw ValidationError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return v;
}

std::int64_t get_i64(std::istream& in) {
  return static_cast<std::int64_t>(get_u64(in));
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string get_string(std::istream& in) {
  std::uint64_t n = get_u64(in);
  if (n > (1ull << 32)) throw ValidationError("implausible string length in checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) {
    throw ValidationError("truncated checkpoint");
  }
  return s;
}

Array get_array(std::istream& in) {
  std::uint32_t ndim = get_u32(in);
  if (ndim > 4) throw ValidationError("implausible array rank in checkpoint");
  std::vector<int> shape;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    std::uint32_t d = get_u32(in);
    if (d > (1u << 28)) throw ValidationError("implausible dimension in checkpoint");
    shape.push_back(static_cast<int>(d));
    count *= d;
  }
  Array a(std::move(shape));
  for (std::size_t i = 0; i < count; ++i) a[i] = get_f64(in);
  return a;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_string(out, data.model_config_json);
  put_string(out, data.train_config_json);
  put_u64(out, data.params.size());
  for (const auto& [name, value] : data.params) {
    put_string(out, name);
    put_array(out, value);
  }
  out.put(data.has_optimizer ? 1 : 0);
  if (data.has_optimizer) {
    put_i64(out, data.adam_step_count);
    put_u64(out, data.adam_moments.size());
    for (const auto& [name, m, v] : data.adam_moments) {
      put_string(out, name);
      put_array(out, m);
      put_array(out, v);
    }
  }
  put_string(out, data.rng_state);
  out.put(data.codebook.has_value() ? 1 : 0);
  if (data.codebook.has_value()) {
    put_array(out, data.codebook->centroids);
    put_f64(out, data.codebook->inertia);
  }
  if (!out) throw IoError("short write to " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || !std::equal(magic, magic + 8, kMagic)) {
    throw ValidationError(path + ": not a checkpoint file");
  }
  std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw ValidationError(path + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  CheckpointData data;
  data.model_config_json = get_string(in);
  data.train_config_json = get_string(in);
  std::uint64_t n_params = get_u64(in);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = get_string(in);
    Array value = get_array(in);
    data.params.emplace_back(std::move(name), std::move(value));
  }
  int has_opt = in.get();
  if (has_opt == std::char_traits<char>::eof()) {
    throw ValidationError("truncated checkpoint");
  }
  data.has_optimizer = has_opt != 0;
  if (data.has_optimizer) {
    data.adam_step_count = get_i64(in);
    std::uint64_t n = get_u64(in);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string name = get_string(in);
      Array m = get_array(in);
      Array v = get_array(in);
      data.adam_moments.emplace_back(std::move(name), std::move(m), std::move(v));
    }
  }
  data.rng_state = get_string(in);
  int has_cb = in.get();
  if (has_cb == std::char_traits<char>::eof()) {
    throw ValidationError("truncated checkpoint");
  }
  if (has_cb != 0) {
    Codebook cb;
    cb.centroids = get_array(in);
    cb.inertia = get_f64(in);
    data.codebook = std::move(cb);
  }
  return data;
}

}  // namespace ham
