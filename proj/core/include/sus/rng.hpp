#pragma once

#include <cstdint>

namespace sus {

// Counter-based generator: draw k of stream (seed, stream_id) is a pure
// function of (seed, stream_id, k). The same triple produces the same bits on
// every platform, and draws may be taken in any order.
class RngStream {
 public:
  constexpr RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id), key_(derive_key(seed, stream_id)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t bits_at(std::uint64_t counter) const noexcept;
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform_at(std::uint64_t counter) const noexcept;
  // Standard normal via Box-Muller on draws 2k and 2k+1.
  double normal_at(std::uint64_t counter) const noexcept;

  // Independent child stream; children of distinct indices do not overlap.
  RngStream fork(std::uint64_t child) const noexcept;

  friend constexpr bool operator==(const RngStream&, const RngStream&) = default;

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ (stream * 0xd1342543de82ef95ULL + 1));
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
};

// Sequential cursor over a stream; the only stateful RNG object.
class RngCursor {
 public:
  explicit RngCursor(RngStream stream) noexcept : stream_(stream) {}

  double uniform() noexcept { return stream_.uniform_at(next_++); }
  double normal() noexcept { return stream_.normal_at(next_++); }
  std::uint64_t bits() noexcept { return stream_.bits_at(next_++); }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  RngStream stream_;
  std::uint64_t next_ = 0;
};

// Fixed hash of an index tuple, used to derive stream ids.
std::uint64_t stream_id_of(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                           std::uint64_t d = 0) noexcept;

}  // namespace sus
