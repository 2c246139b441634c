#pragma once

#include <cstdint>
#include <cstddef>

#include "attnio/attention.hpp"

namespace attnio {

/** A generated problem plus the factor applied to X by the score rescale. */
struct GeneratedProblem {
    AttentionProblem prob;
    double x_scale = 1.0;
};

/**
 * Seeded problem generator. Entries are drawn uniformly from [-1, 1] with
 * std::mt19937_64 and a fixed 53-bit mapping (no distribution adapters), in
 * the order A1, A2, A3, X, Y, dO, each row-major. X is then shrunk so the
 * largest score magnitude is at most 20, leaving exp() far from the guard.
 * Identical (n, d, seed) produce bit-identical problems on any platform.
 */
GeneratedProblem random_problem(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace attnio
