#include "sawtooth/seeds.hpp"

namespace sawtooth {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : stage) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(master ^ h);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent + 0x9e3779b97f4a7c15ULL * (index + 1));
}

TimeSeries standard_normal(std::size_t channels, std::size_t length, Rng& rng) {
  TimeSeries out(channels, length);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.values()) v = normal(rng);
  return out;
}

}  // namespace sawtooth
