#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>

namespace ldg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Normalized environment coordinates. Dimension is fixed by the EnvSpec.
struct EnvState {
  Vector values;

  Eigen::Index dim() const { return values.size(); }
  bool operator==(const EnvState& other) const {
    return values.size() == other.values.size() && values == other.values;
  }
};

struct EnvAction {
  Vector values;

  Eigen::Index dim() const { return values.size(); }
  bool operator==(const EnvAction& other) const {
    return values.size() == other.values.size() && values == other.values;
  }
};

enum class Mode : std::uint8_t { Autonomous = 0, Supervisor = 1 };

constexpr std::string_view to_string(Mode mode) {
  return mode == Mode::Autonomous ? "autonomous" : "supervisor";
}

Mode mode_from_string(std::string_view text);

/// splitmix64 finalizer; used to derive independent sub-seeds so that the
/// random streams of resets, noise and training never interleave.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base ^ mix_seed(stream)) + a) + b);
}

// Stream tags for derive_seed.
namespace streams {
inline constexpr std::uint64_t kOffline = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kPolicyInit = 3;
inline constexpr std::uint64_t kClassifierInit = 4;
inline constexpr std::uint64_t kPretrain = 5;
inline constexpr std::uint64_t kEpisode = 6;
inline constexpr std::uint64_t kNoise = 7;
inline constexpr std::uint64_t kPolicyFit = 8;
inline constexpr std::uint64_t kClassifierFit = 9;
inline constexpr std::uint64_t kTest = 10;
inline constexpr std::uint64_t kBudget = 11;
}  // namespace streams

}  // namespace ldg
