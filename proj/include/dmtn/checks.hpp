#pragma once

// Seeded toy instances for gradient checking, shared by the CLI and tests.

#include <cstdint>
#include <string_view>

#include "dmtn/gradcheck.hpp"
#include "dmtn/scorers.hpp"

namespace dmtn::checks {

inline constexpr double kEps = 1e-4;
/// Toy instance drawn by default. Any instance can land a true gradient near
/// the 1e-8 floor of the error metric, where round-off alone reaches ~1e-4.
inline constexpr std::uint64_t kDefaultSeed = 1;
inline constexpr double kTolerance = 1e-4;

/// One gate on random (c, m, q) with d=4, k=3, h=3; the inputs are checked too.
GradCheckResult scorer(nn::ScorerKind kind, std::uint64_t seed = kDefaultSeed, double eps = kEps);

/// Five unrolled GRU steps, input 3, hidden 4.
GradCheckResult gru(std::uint64_t seed = kDefaultSeed, double eps = kEps);

/// Full forward + loss (L2 included) on a 2-fact sample: d=4, k=3, M=2, |V|=10.
GradCheckResult dmtn(nn::ScorerKind kind, std::uint64_t seed = kDefaultSeed, double eps = kEps);

/// MemN2N forward + loss: d=4, 3 memories, 2 hops.
GradCheckResult memn2n(bool tied, std::uint64_t seed = kDefaultSeed, double eps = kEps);

/// Dispatch by target name: `gate`, `gru`, `dmtn`, `memn2n`, `memn2n-untied`.
GradCheckResult run(std::string_view target, nn::ScorerKind kind, std::uint64_t seed = kDefaultSeed,
                    double eps = kEps);

}  // namespace dmtn::checks
