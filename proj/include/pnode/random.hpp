#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace pnode {

/// Counter-based random bit generator. Draw c of stream s under master seed m
/// is mix(base(m) + s * 2^32 + c), where mix is the SplitMix64 finalizer (a
/// bijection on 64-bit words). Distinct (stream, counter) pairs therefore
/// never produce the same underlying word as long as counter < 2^32.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  explicit CounterStream(std::uint64_t master_seed, std::uint64_t stream = 0)
      : base_(mix(master_seed ^ 0x9e3779b97f4a7c15ULL) + (stream << 32)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(base_ + counter_++); }

  /// Pre-image of the next draw; used to check stream disjointness.
  [[nodiscard]] std::uint64_t next_input() const noexcept { return base_ + counter_; }
  [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// Standard normal draws on top of a CounterStream.
class NormalSampler {
 public:
  explicit NormalSampler(CounterStream stream) : stream_(stream) {}

  double operator()() { return dist_(stream_); }

  [[nodiscard]] const CounterStream& stream() const noexcept { return stream_; }

 private:
  CounterStream stream_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace pnode
