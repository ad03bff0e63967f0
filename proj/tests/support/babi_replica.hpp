#pragma once

// Synthetic stand-ins for bAbI tasks 1 and 4 in the official v1.2 file
// layout. Used when the real corpus is not on disk.

#include <cstdint>
#include <filesystem>
#include <string>

namespace dmtn::replica {

/// Text of one split: task 1 yields 200 stories x 5 questions, task 4 yields
/// 1000 single-question stories. Throws ArgumentError for other tasks.
std::string generate_task(int task, bool train, std::uint64_t seed);

/// Writes `<root>/en/qa<N>_<name>_{train,test}.txt` and returns `root`.
std::filesystem::path write_replica(const std::filesystem::path& root, int task, std::uint64_t seed);

bool supported(int task);

}  // namespace dmtn::replica
