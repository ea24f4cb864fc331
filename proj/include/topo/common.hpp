#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace topo {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Deterministic RNG. The engine is mt19937_64; the draws (normal, index,
/// shuffle) are hand-rolled so sequences do not depend on the standard
/// library's unspecified distribution algorithms.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in (0, 1].
  double uniform01() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  /// Box-Muller, one value per two engine draws.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) *
                     std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

private:
  std::mt19937_64 engine_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Byte offsets of each UTF-8 codepoint start, with text.size() appended.
/// Invalid lead bytes are treated as single-byte characters.
std::vector<std::size_t> utf8_offsets(std::string_view text);

/// Round half away from zero to the given number of decimal places.
double round_places(double x, int places);

}  // namespace topo
