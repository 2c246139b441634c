#pragma once

#include <cstddef>
#include <vector>

#include "attnio/matrix.hpp"

namespace attnio {

/** Scores with magnitude above this throw NumericOverflow before exp(). */
inline constexpr double kScoreGuard = 50.0;

/**
 * One gradient problem instance.
 *
 * Shapes: A1, A3, dO are n x d; A2 is n x d; X, Y are d x d.
 */
struct AttentionProblem {
    std::size_t n = 0;
    std::size_t d = 0;
    Matrix A1;
    Matrix A2;
    Matrix A3;
    Matrix X;
    Matrix Y;
    Matrix dO;
};

/** Everything the forward pass materializes. */
struct ForwardArtifacts {
    Matrix A;                 // n x n, exp of scores
    std::vector<double> l;    // n row sums of A
    Matrix f;                 // n x n, rows of A divided by l
    Matrix h;                 // n x d, A3*Y
    Matrix O;                 // n x d, f*h
};

/** Gradient-pass products. */
struct BackwardArtifacts {
    Matrix q;  // n x n, dO * h^T
    Matrix p;  // n x n
    Matrix g;  // d x d gradient of the loss in X
};

/**
 * Forward pass: A = exp(A1*X*A2^T), l = A*1, f = diag(l)^-1*A, h = A3*Y,
 * O = f*h. Throws DimensionMismatch on inconsistent shapes and
 * NumericOverflow when any score magnitude exceeds kScoreGuard.
 */
ForwardArtifacts forward(const AttentionProblem& prob);

/**
 * Straight-line gradient of <dO, O(X)> in X using full dense intermediates:
 * q = dO*h^T, p = f o q - diag((f o q)*1)*f, g = A1^T*p*A2.
 */
BackwardArtifacts backward_reference(const AttentionProblem& prob, const ForwardArtifacts& fwd);

/**
 * Loss L(X) = <dO, O(X)> (Frobenius inner product) and its central
 * finite-difference gradient with the given step, evaluated entry by entry.
 */
struct FdResult {
    double loss = 0.0;
    Matrix g;  // d x d
};

FdResult loss_and_fd_gradient(const AttentionProblem& prob, double step);

}  // namespace attnio
