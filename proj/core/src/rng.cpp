#include "sus/rng.hpp"

#include <cmath>
#include <numbers>

namespace sus {

std::uint64_t RngStream::bits_at(std::uint64_t counter) const noexcept {
  return mix64(mix64(key_ + counter * 0x9e3779b97f4a7c15ULL) ^ key_);
}

double RngStream::uniform_at(std::uint64_t counter) const noexcept {
  return static_cast<double>(bits_at(counter) >> 11) * 0x1.0p-53;
}

double RngStream::normal_at(std::uint64_t counter) const noexcept {
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform_at(2 * counter);
  const double u2 = uniform_at(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::fork(std::uint64_t child) const noexcept {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(child + 0x632be59bd9b4e019ULL)));
}

std::uint64_t RngCursor::below(std::uint64_t bound) noexcept {
  // Rejecting r < 2^64 mod bound leaves an exact multiple of bound values.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = bits();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t stream_id_of(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                           std::uint64_t d) noexcept {
  std::uint64_t h = RngStream::mix64(a + 0x9e3779b97f4a7c15ULL);
  h = RngStream::mix64(h ^ (b + 0xbf58476d1ce4e5b9ULL));
  h = RngStream::mix64(h ^ (c + 0x94d049bb133111ebULL));
  h = RngStream::mix64(h ^ (d + 0xd6e8feb86659fd93ULL));
  return h;
}

}  // namespace sus
