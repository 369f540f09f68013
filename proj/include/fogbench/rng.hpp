#pragma once

#include <cstdint>
#include <string_view>

namespace fogbench {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named sub-stream ("data", "init", "shuffle", ...) of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

/// Worker cap from FOGBENCH_THREADS (default 1, minimum 1).
unsigned worker_threads();

}  // namespace fogbench
