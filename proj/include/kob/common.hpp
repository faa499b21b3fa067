#ifndef KOB_COMMON_HPP
#define KOB_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace kob {

/// Input or contract violation (bad CSV cell, non-binary group, ...).
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure during estimation (singular design, trimming exhausted,
/// too many degenerate resamples, ...).
class estimation_error : public std::runtime_error {
 public:
  explicit estimation_error(const std::string& msg) : std::runtime_error(msg) {}
};

class singular_design_error : public estimation_error {
 public:
  explicit singular_design_error(const std::string& msg) : estimation_error(msg) {}
};

class unsupported_combination_error : public estimation_error {
 public:
  explicit unsupported_combination_error(const std::string& msg)
      : estimation_error(msg) {}
};

// splitmix64 finalizer; decorrelates (seed, stream) pairs so that per-task
// RNG streams are independent of the execution schedule.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace kob

#endif  // KOB_COMMON_HPP
