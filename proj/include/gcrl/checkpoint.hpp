#pragma once

// Binary checkpoint:
//   magic "GCRLCKPT" | u32 format version | u32 V | u32 F | u64 layout hash |
//   u64 theta length | theta as little-endian f64 | u64 len + rng state text |
//   u64 len + trainer state (JSON text) | u64 FNV-1a checksum of all prior bytes
// All integers little-endian.

#include <algorithm>
#include <bit>
#include <cstdio>
#include <type_traits>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "gcrl/errors.hpp"
#include "gcrl/policy.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "GCRLCKPT";

struct Checkpoint {
  PolicyParams params;
  std::string rng_state;
  std::string trainer_state;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IoError("corrupt checkpoint: truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
  std::string out(kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.vocab));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.features));
  detail::put_le<std::uint64_t>(out, c.params.layout_hash);
  detail::put_le<std::int64_t>(out, c.params.version);
  detail::put_le<std::uint64_t>(out, c.params.theta.size());
  for (double x : c.params.theta) detail::put_le<double>(out, x);
  detail::put_le<std::uint64_t>(out, c.rng_state.size());
  out += c.rng_state;
  detail::put_le<std::uint64_t>(out, c.trainer_state.size());
  out += c.trainer_state;
  detail::put_le<std::uint64_t>(out, fnv1a64(out));
  return out;
}

// expected_layout_hash == 0 skips the layout check.
inline Checkpoint decode_checkpoint(std::string_view data, std::uint64_t expected_layout_hash = 0) {
  detail::Reader r(data);
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw IoError("corrupt checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.params.vocab = r.get<std::uint32_t>();
  c.params.features = r.get<std::uint32_t>();
  c.params.layout_hash = r.get<std::uint64_t>();
  c.params.version = r.get<std::int64_t>();
  const auto n = r.get<std::uint64_t>();
  if (n != c.params.vocab * c.params.features || n > r.remaining() / sizeof(double))
    throw IoError("corrupt checkpoint: parameter length inconsistent with header");
  c.params.theta.resize(n);
  for (auto& x : c.params.theta) x = r.get<double>();
  c.rng_state = r.bytes(r.get<std::uint64_t>());
  c.trainer_state = r.bytes(r.get<std::uint64_t>());
  const std::size_t body = r.pos();
  const auto sum = r.get<std::uint64_t>();
  if (sum != fnv1a64(data.substr(0, body))) throw IoError("corrupt checkpoint: checksum mismatch");
  if (r.remaining() != 0) throw IoError("corrupt checkpoint: trailing bytes");
  if (expected_layout_hash != 0 && c.params.layout_hash != expected_layout_hash)
    throw IoError("checkpoint layout hash does not match the policy feature layout");
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string bytes = encode_checkpoint(c);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path, std::uint64_t expected_layout_hash = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(data, expected_layout_hash);
}

}  // namespace gcrl
