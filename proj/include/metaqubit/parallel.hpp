#pragma once
// Counter-based random streams and a chunked parallel loop.
//
// Every Monte Carlo trial draws from its own stream keyed by
// (seed, stream, index), so results do not depend on how trials are
// distributed over workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace metaqubit {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Small-state generator seeded from a counter triple. Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
      : state_(mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) ^ mix64(stream + 0x3c6ef372fe94f82bULL)) ^
               mix64(index * 0x9e3779b97f4a7c15ULL + 0xa54ff53a5f1d36f1ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end, chunk_index) over [0, n) split into contiguous
/// chunks. Chunk boundaries depend only on n and chunk_size, never on the
/// worker count, so per-chunk partial results can be merged in a fixed order.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk_size, unsigned workers, Body&& body) {
  if (n == 0) return;
  chunk_size = std::max<std::size_t>(1, chunk_size);
  const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
  workers = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(chunks));

  auto run_chunk = [&](std::size_t c) {
    const std::size_t b = c * chunk_size;
    body(b, std::min(n, b + chunk_size), c);
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) {
        try {
          run_chunk(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Integer moment accumulator; merging is exact and order independent.
struct CountAccumulator {
  std::uint64_t n = 0;
  std::uint64_t sum = 0;
  std::uint64_t sum_sq = 0;

  void add(std::uint64_t x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }
  void merge(const CountAccumulator& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return n ? static_cast<double>(sum) / static_cast<double>(n) : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double v = (static_cast<double>(sum_sq) - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return std::max(0.0, v);
  }
  double std_error() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

}  // namespace metaqubit
