#pragma once

#include <cstdint>

#include "attnio/attention.hpp"
#include "attnio/cache_sim.hpp"

namespace attnio {

/**
 * Tile sizes for the instrumented kernels. The square-tile kernel fills B;
 * the panel kernel fills Br and Bc.
 */
struct BlockParams {
    std::uint64_t B = 0;
    std::uint64_t Br = 0;
    std::uint64_t Bc = 0;
};

/** B = floor(sqrt(M/4)). Requires M >= 4, else CacheTooSmall. */
BlockParams block_params_small(std::uint64_t M);

/** Br = min(ceil(M/(4d)), d), Bc = ceil(M/(4d)). Requires M >= 1 and d >= 1. */
BlockParams block_params_large(std::uint64_t M, std::size_t d);

/** Gradient plus the transfer counters of the run that produced it. */
struct KernelResult {
    Matrix g;
    IoCounter io;
};

/** Smallest capacity that holds every intermediate of the single-pass kernel at once. */
std::uint64_t no_cache_min_capacity(std::size_t n, std::size_t d);

/** Structural floor of the panel kernel's working set. */
std::uint64_t large_cache_min_capacity(std::size_t d);

/**
 * Single-pass gradient that materializes each intermediate whole, reading
 * every input exactly once and evicting operands as soon as they are dead.
 * When sim is non-null its capacity must be at least no_cache_min_capacity
 * (else CacheTooSmall) and every transfer is charged to it; when sim is null
 * the kernel runs uninstrumented and the returned counters are zero. The
 * result matches backward_reference bit for bit.
 */
KernelResult backward_no_cache(const AttentionProblem& prob, CacheSim* sim = nullptr);

/**
 * Square-tile kernel for capacities well below d*d. Works in four phases
 * over B x B tiles with B = floor(sqrt(M/4)), materializing S, A, f, h, q,
 * p, and T in memory. Requires M >= 4. Total I/O follows
 * 6(n^2 d + n d^2)/B + 9 n^2 + 3 n d + d^2 exactly.
 */
KernelResult backward_small_cache(const AttentionProblem& prob, std::uint64_t M);

/** Phase-2 schedule of the panel kernel, selectable per (n, d, M). */
enum class LargeVariant {
    KeyPanel,   // key-block panels resident, per-row scalar pipeline, T tile in cache
    QueryRow,   // one query row resident, key rows streamed, W row in cache
    KeyColumn,  // one T column in cache, everything else streamed per element
};

/** Chosen schedule plus its modeled transfer count. */
struct Phase2Plan {
    LargeVariant variant = LargeVariant::KeyColumn;
    std::uint64_t Bc = 1;       // key block width (KeyPanel only)
    bool g_in_cache = false;    // g resident for all of phase 2
    std::uint64_t predicted_io = 0;
};

/**
 * Deterministic schedule choice: among the variants whose worst-case
 * residency fits in M, pick the one with the smallest modeled I/O. Depends
 * only on (n, d, M).
 */
Phase2Plan plan_large_phase2(std::size_t n, std::size_t d, std::uint64_t M);

/**
 * Panel kernel for capacities at or above d*d. Recomputes S = A1*X and
 * h = A3*Y as n x d arrays, takes l and O from the forward pass, and never
 * materializes an n x n intermediate in memory or cache. Requires
 * M >= large_cache_min_capacity(d) and M >= d*d, else CacheTooSmall.
 */
KernelResult backward_large_cache(const AttentionProblem& prob, const ForwardArtifacts& fwd,
                                  std::uint64_t M);

/**
 * Transfer counters of the plain blocked product (n1 x d) * (d x n2) with
 * B x B tiles under capacity M. The loop structure is identical to the
 * kernels' tiled products, and the counters are data-independent, so no
 * matrix data is involved.
 */
IoCounter blocked_matmul_io(std::size_t n1, std::size_t d, std::size_t n2, std::uint64_t B,
                            std::uint64_t M);

}  // namespace attnio
