#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace oodcert {

// Philox4x64-10 counter-based generator (Salmon et al., SC'11). A block of
// four 64-bit words is a pure function of (counter, key), so any element of
// any substream can be produced without touching the others.
class Philox4x64
{
public:
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static constexpr int rounds = 10;

  static Counter generate(Counter counter, Key key) noexcept
  {
    for (int round = 0; round < rounds; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      counter = single_round(counter, key);
    }
    return counter;
  }

private:
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) noexcept
  {
    __extension__ using u128 = unsigned __int128;
    const u128 product = static_cast<u128>(a) * b;
    hi = static_cast<std::uint64_t>(product >> 64);
    lo = static_cast<std::uint64_t>(product);
  }

  static Counter single_round(const Counter& c, const Key& k) noexcept
  {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

// Identifies one reproducible random sequence. The seed and the substream
// index together form the Philox key, so distinct stream indices are
// independent by construction.
struct SampleStream
{
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;

  friend bool operator==(const SampleStream&, const SampleStream&) = default;
};

// Maps a 64-bit word to a double in the open interval (0, 1).
inline double to_open_unit(std::uint64_t bits) noexcept
{
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Fills `out` with independent standard normal variates belonging to element
// `element_index` of `stream`. Block j of the element uses counter
// (element_index, j, 0, 0); each block yields four normals by Box-Muller.
void standard_normals(const SampleStream& stream, std::uint64_t element_index,
                      std::span<double> out) noexcept;

} // namespace oodcert
