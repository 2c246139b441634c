#include "attnio/bounds.hpp"

#include <cmath>
#include <string>

#include "attnio/errors.hpp"

namespace attnio {

BoundReport theoretical_bounds(std::size_t n, std::size_t d, std::uint64_t M) {
    if (n == 0 || d == 0 || M == 0) {
        throw DimensionMismatch("bounds need positive n, d, M");
    }
    BoundReport report;
    report.n = n;
    report.d = d;
    report.M = M;

    const std::uint64_t nn = n;
    const std::uint64_t dd = d;
    const double sqrt_m = std::sqrt(static_cast<double>(M));
    const double m = static_cast<double>(M);

    const double small_num = static_cast<double>(nn * nn * dd + nn * dd * dd);
    const double large_num = static_cast<double>(nn * nn * dd * dd + nn * dd * dd * dd);
    report.small_branch = small_num / sqrt_m;
    report.large_branch = large_num / m;
    report.backward_bound = std::min(report.small_branch, report.large_branch);
    report.forward_upper_small = static_cast<double>(nn * nn * dd) / sqrt_m;
    report.forward_upper_large = static_cast<double>(nn * nn * dd * dd) / m;
    report.flash_upper = report.large_branch;

    const std::uint64_t crossover = dd * dd;
    if (M < crossover) {
        report.regime = Regime::SmallCache;
    } else if (M == crossover) {
        report.regime = Regime::Crossover;
    } else {
        report.regime = Regime::LargeCache;
    }
    return report;
}

namespace {

std::uint64_t nnz(const Matrix& m) {
    std::uint64_t count = 0;
    for (double x : m.data) {
        if (x != 0.0) {
            ++count;
        }
    }
    return count;
}

/** a*b skipping zero operands; identical bits to the dense product. */
Matrix sparse_product(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionMismatch("sparse product: " + std::to_string(a.cols) + " vs " +
                                std::to_string(b.rows));
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = a.at(i, k);
            if (av == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < b.cols; ++j) {
                const double bv = b.at(k, j);
                if (bv == 0.0) {
                    continue;
                }
                out.at(i, j) += av * bv;
            }
        }
    }
    return out;
}

}  // namespace

SparseStats sparse_stats(const Matrix& a1, const Matrix& x, const Matrix& a2) {
    if (a1.cols != x.rows || x.rows != x.cols || a2.cols != x.cols || a1.rows != a2.rows) {
        throw DimensionMismatch("sparse stats expect A1 (n x d), X (d x d), A2 (n x d)");
    }
    SparseStats stats;
    stats.Z_A = std::min(nnz(a1), nnz(a2));
    stats.Z_X = nnz(x);

    const Matrix a1x = sparse_product(a1, x);
    const Matrix xa2t = sparse_product(x, transpose(a2));
    stats.Z_AX = std::min(nnz(a1x), nnz(xa2t));
    stats.Z_AXA = nnz(sparse_product(a1x, transpose(a2)));
    return stats;
}

double sparse_lower_bound(const SparseStats& stats, std::uint64_t M) {
    if (M == 0) {
        throw DimensionMismatch("sparse bound needs positive M");
    }
    const double za = static_cast<double>(stats.Z_A);
    const double zx = static_cast<double>(stats.Z_X);
    const double zax = static_cast<double>(stats.Z_AX);
    const double zaxa = static_cast<double>(stats.Z_AXA);
    const double m = static_cast<double>(M);

    const double branch1 = (za * za + za * zx) / m;
    const double branch2 = (za * std::sqrt(zaxa) + std::sqrt(za * zx * zax)) / std::sqrt(m);
    return std::min(branch1, branch2);
}

double fit_exponent(const std::vector<std::pair<double, double>>& m_io_points) {
    if (m_io_points.size() < 3) {
        throw InsufficientData("exponent fit needs at least 3 points, got " +
                               std::to_string(m_io_points.size()));
    }
    const double count = static_cast<double>(m_io_points.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (const auto& [m, io] : m_io_points) {
        mean_x += std::log(m);
        mean_y += std::log(io);
    }
    mean_x /= count;
    mean_y /= count;

    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& [m, io] : m_io_points) {
        const double dx = std::log(m) - mean_x;
        sxx += dx * dx;
        sxy += dx * (std::log(io) - mean_y);
    }
    if (sxx == 0.0) {
        throw InsufficientData("exponent fit needs at least two distinct M values");
    }
    return sxy / sxx;
}

}  // namespace attnio
