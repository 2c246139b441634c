#include "attnio/matrix.hpp"

#include <string>

namespace attnio {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t r_count, std::size_t c_count) const {
    Matrix out(r_count, c_count);
    for (std::size_t i = 0; i < r_count; ++i) {
        for (std::size_t j = 0; j < c_count; ++j) {
            out.at(i, j) = at(r0 + i, c0 + j);
        }
    }
    return out;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& blk) {
    for (std::size_t i = 0; i < blk.rows; ++i) {
        for (std::size_t j = 0; j < blk.cols; ++j) {
            at(r0 + i, c0 + j) = blk.at(i, j);
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionMismatch("matmul: " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            out.at(j, i) = a.at(i, j);
        }
    }
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw DimensionMismatch("hadamard: " + shape_str(a) + " vs " + shape_str(b));
    }
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        out.data[i] = a.data[i] * b.data[i];
    }
    return out;
}

std::vector<double> row_sums(const Matrix& a) {
    std::vector<double> sums(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) {
            acc += a.at(i, j);
        }
        sums[i] = acc;
    }
    return sums;
}

BlockRange block_range(std::size_t total, std::size_t b, std::size_t idx) {
    BlockRange r;
    r.begin = idx * b;
    r.count = (r.begin + b <= total) ? b : total - r.begin;
    return r;
}

std::size_t block_count(std::size_t total, std::size_t b) {
    return (total + b - 1) / b;
}

}  // namespace attnio
