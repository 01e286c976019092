#pragma once

#include <boost/random/beta_distribution.hpp>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <thread>
#include <vector>

namespace cbf {

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Seeded random source. Identical (seed, stream_id) pairs produce identical draw
/// sequences; `substream` derives independent child streams deterministically.
/// A stream must not be shared between threads.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), id_(stream_id), engine_(mix(seed, stream_id)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return id_; }

  RandomStream substream(std::uint64_t child) const {
    return RandomStream(seed_, detail::splitmix64(id_ ^ detail::splitmix64(child + 0x51ed2701ULL)));
  }

  engine_type& engine() noexcept { return engine_; }

  double uniform() { return boost::random::uniform_01<double>()(engine_); }
  double normal() { return boost::random::normal_distribution<double>()(engine_); }
  double gamma(double shape, double scale = 1.0) {
    return boost::random::gamma_distribution<double>(shape, scale)(engine_);
  }
  double chi_squared(double df) { return 2.0 * gamma(0.5 * df); }
  double beta(double a, double b) { return boost::random::beta_distribution<double>(a, b)(engine_); }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t id) {
    return detail::splitmix64(detail::splitmix64(seed) ^ (id * 0xd1342543de82ef95ULL + 1));
  }

  std::uint64_t seed_;
  std::uint64_t id_;
  engine_type engine_;
};

/// Monte Carlo work is split in fixed-size chunks; chunk c always draws from
/// `stream.substream(c)`, so results do not depend on the thread count.
inline constexpr std::size_t kChunkSize = 4096;

/// Worker count: CBF_THREADS if set, otherwise the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("CBF_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

/// Runs `fn(RandomStream&, std::size_t begin, std::size_t count) -> Acc` over chunks of
/// `total` draws and folds the per-chunk results in chunk order with `+=`.
template <class Acc, class Fn>
Acc chunked_reduce(const RandomStream& stream, std::size_t total, Fn fn, unsigned threads = 0) {
  const std::size_t chunks = (total + kChunkSize - 1) / kChunkSize;
  std::vector<Acc> partial(chunks);
  auto work = [&](std::size_t c) {
    RandomStream s = stream.substream(c);
    const std::size_t begin = c * kChunkSize;
    partial[c] = fn(s, begin, std::min(kChunkSize, total - begin));
  };
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < chunks; c += threads) work(c);
      });
    }
  }
  Acc acc{};
  for (auto& p : partial) acc += p;
  return acc;
}

}  // namespace cbf
