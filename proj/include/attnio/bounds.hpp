#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "attnio/matrix.hpp"

namespace attnio {

/** Which side of M = d*d the capacity sits on. */
enum class Regime { SmallCache, Crossover, LargeCache };

/** Closed-form transfer bounds for one (n, d, M) configuration. */
struct BoundReport {
    std::size_t n = 0;
    std::size_t d = 0;
    std::uint64_t M = 0;
    double small_branch = 0.0;         // (n^2 d + n d^2) / sqrt(M)
    double large_branch = 0.0;         // (n^2 d^2 + n d^3) / M
    double backward_bound = 0.0;       // min of the two branches
    double forward_upper_small = 0.0;  // n^2 d / sqrt(M)
    double forward_upper_large = 0.0;  // n^2 d^2 / M
    double flash_upper = 0.0;          // (n^2 d^2 + n d^3) / M
    Regime regime = Regime::Crossover;
};

BoundReport theoretical_bounds(std::size_t n, std::size_t d, std::uint64_t M);

/** Support sizes that drive the sparse bound. */
struct SparseStats {
    std::uint64_t Z_A = 0;    // min(nnz(A1), nnz(A2))
    std::uint64_t Z_X = 0;    // nnz(X)
    std::uint64_t Z_AX = 0;   // min(nnz(A1*X), nnz(X*A2^T))
    std::uint64_t Z_AXA = 0;  // nnz(A1*X*A2^T)
};

/**
 * Counts supports using sparse semiring products that skip zero operands;
 * the skipped terms contribute exact zeros, so the products match their
 * dense counterparts bit for bit. A1 and A2 are n x d, X is d x d.
 */
SparseStats sparse_stats(const Matrix& a1, const Matrix& x, const Matrix& a2);

/**
 * min{ (Z_A^2 + Z_A Z_X)/M, (Z_A sqrt(Z_AXA) + sqrt(Z_A Z_X Z_AX))/sqrt(M) }.
 * On fully dense inputs this reduces exactly to backward_bound.
 */
double sparse_lower_bound(const SparseStats& stats, std::uint64_t M);

/**
 * Least-squares slope of ln(io) against ln(M). Throws InsufficientData with
 * fewer than three points or without at least two distinct M values.
 */
double fit_exponent(const std::vector<std::pair<double, double>>& m_io_points);

}  // namespace attnio
