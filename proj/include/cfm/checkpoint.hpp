#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/mlp.hpp>
#include <cfm/optim.hpp>

namespace cfm {

// Versioned binary training snapshot. Everything needed to resume a run
// bit-exactly: network config, flat parameters, Adam moments, EMA shadow,
// iteration counter, generator state, and which weights sampling uses.
// All scalars are little-endian; floats are IEEE-754 binary64.
struct Checkpoint {
  MlpConfig cfg;
  Vec params;
  OptimState opt;
  EmaState ema;
  std::uint64_t iteration = 0;
  bool sample_with_ema = true;
  std::string rng_state;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'C', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

inline void put_vec(std::string& out, const Vec& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}

  std::uint64_t u64() {
    if (pos_ + 8 > buf_.size()) throw IoError("checkpoint: truncated data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  Vec vec() {
    const auto n = static_cast<Eigen::Index>(u64());
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
    return v;
  }

  std::string bytes(std::size_t n) {
    if (pos_ + n > buf_.size()) throw IoError("checkpoint: truncated data");
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string checkpoint_to_bytes(const Checkpoint& c) {
  std::string out;
  out.append(detail::kCkptMagic, 8);
  detail::put_u64(out, 1);  // format version
  detail::put_u64(out, static_cast<std::uint64_t>(c.cfg.state_dim));
  detail::put_u64(out, static_cast<std::uint64_t>(c.cfg.cond_dim));
  detail::put_u64(out, static_cast<std::uint64_t>(c.cfg.hidden_width));
  detail::put_u64(out, static_cast<std::uint64_t>(c.cfg.hidden_layers));
  detail::put_u64(out, c.cfg.activation == Activation::relu ? 0 : 1);
  detail::put_u64(out, c.iteration);
  detail::put_u64(out, c.sample_with_ema ? 1 : 0);
  detail::put_vec(out, c.params);
  detail::put_u64(out, static_cast<std::uint64_t>(c.opt.step));
  detail::put_f64(out, c.opt.lr);
  detail::put_f64(out, c.opt.beta1);
  detail::put_f64(out, c.opt.beta2);
  detail::put_f64(out, c.opt.eps);
  detail::put_vec(out, c.opt.m);
  detail::put_vec(out, c.opt.v);
  detail::put_f64(out, c.ema.decay);
  detail::put_vec(out, c.ema.shadow);
  detail::put_u64(out, c.rng_state.size());
  out.append(c.rng_state);
  return out;
}

inline Checkpoint checkpoint_from_bytes(const std::string& buf) {
  if (buf.size() < 16 || std::memcmp(buf.data(), detail::kCkptMagic, 8) != 0)
    throw IoError("checkpoint: bad magic");
  detail::Reader r(buf);
  r.bytes(8);  // magic
  const auto version = r.u64();
  if (version != 1) throw IoError("checkpoint: unsupported version");

  Checkpoint c;
  c.cfg.state_dim = static_cast<int>(r.u64());
  c.cfg.cond_dim = static_cast<int>(r.u64());
  c.cfg.hidden_width = static_cast<int>(r.u64());
  c.cfg.hidden_layers = static_cast<int>(r.u64());
  c.cfg.activation = r.u64() == 0 ? Activation::relu : Activation::swish;
  c.iteration = r.u64();
  c.sample_with_ema = r.u64() != 0;
  c.params = r.vec();
  c.opt.step = static_cast<long>(r.u64());
  c.opt.lr = r.f64();
  c.opt.beta1 = r.f64();
  c.opt.beta2 = r.f64();
  c.opt.eps = r.f64();
  c.opt.m = r.vec();
  c.opt.v = r.vec();
  c.ema.decay = r.f64();
  c.ema.shadow = r.vec();
  c.rng_state = r.bytes(r.u64());

  if (c.params.size() != param_count(c.cfg))
    throw IoError("checkpoint: parameter count does not match config");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const Checkpoint& c) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  const std::string bytes = checkpoint_to_bytes(c);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(buf);
}

}  // namespace cfm
