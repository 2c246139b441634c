#pragma once

#include <cstddef>
#include <vector>

#include "attnio/errors.hpp"

namespace attnio {

/**
 * Dense row-major matrix of doubles.
 *
 * Construction zero-fills. Element access is unchecked; shape checks live in
 * the operations that combine matrices.
 */
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return rows * cols; }

    /** Copy of the r_count x c_count block whose top-left corner is (r0, c0). */
    Matrix block(std::size_t r0, std::size_t c0, std::size_t r_count, std::size_t c_count) const;

    /** Write blk into this matrix with its top-left corner at (r0, c0). */
    void set_block(std::size_t r0, std::size_t c0, const Matrix& blk);
};

/**
 * Product a*b with the inner dimension accumulated left to right, so entry
 * (i,j) is sum over k ascending of a(i,k)*b(k,j). Throws DimensionMismatch
 * when a.cols != b.rows.
 */
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/** Entry-wise product; shapes must match. */
Matrix hadamard(const Matrix& a, const Matrix& b);

/** Row sums accumulated left to right. */
std::vector<double> row_sums(const Matrix& a);

/** Half-open index range [begin, begin+count) of block `idx` when splitting `total` into blocks of size `b`. */
struct BlockRange {
    std::size_t begin = 0;
    std::size_t count = 0;
};

BlockRange block_range(std::size_t total, std::size_t b, std::size_t idx);

/** Number of size-b blocks covering `total` indices. */
std::size_t block_count(std::size_t total, std::size_t b);

}  // namespace attnio
