#include "oodcert/random.hpp"

#include <cmath>
#include <numbers>

namespace oodcert {

void standard_normals(const SampleStream& stream, std::uint64_t element_index,
                      std::span<double> out) noexcept
{
  const Philox4x64::Key key{stream.seed, stream.stream_index};
  std::size_t filled = 0;
  for (std::uint64_t block = 0; filled < out.size(); ++block) {
    const auto words = Philox4x64::generate({element_index, block, 0, 0}, key);
    for (int pair = 0; pair < 2 && filled < out.size(); ++pair) {
      const double u1 = to_open_unit(words[2 * pair]);
      const double u2 = to_open_unit(words[2 * pair + 1]);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      out[filled++] = radius * std::cos(angle);
      if (filled < out.size())
        out[filled++] = radius * std::sin(angle);
    }
  }
}

} // namespace oodcert
