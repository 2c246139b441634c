#include <doctest.h>

#include <random>

#include "attnio/errors.hpp"
#include "attnio/matrix.hpp"

using namespace attnio;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (auto& x : m.data) {
        x = dist(eng);
    }
    return m;
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            c.at(i, j) = acc;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("matmul matches a naive triple loop bit for bit") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Matrix a = random_matrix(5, 7, seed);
        const Matrix b = random_matrix(7, 4, seed + 100);
        const Matrix got = matmul(a, b);
        const Matrix want = naive_matmul(a, b);
        REQUIRE(got.rows == want.rows);
        REQUIRE(got.cols == want.cols);
        for (std::size_t i = 0; i < got.data.size(); ++i) {
            CHECK(got.data[i] == want.data[i]);
        }
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    const Matrix a(2, 3);
    const Matrix b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), DimensionMismatch);
}

TEST_CASE("transpose swaps indices") {
    const Matrix a = random_matrix(3, 5, 9);
    const Matrix t = transpose(a);
    REQUIRE(t.rows == 5);
    REQUIRE(t.cols == 3);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            CHECK(t.at(j, i) == a.at(i, j));
        }
    }
}

TEST_CASE("hadamard multiplies entrywise and checks shapes") {
    const Matrix a = random_matrix(4, 4, 2);
    const Matrix b = random_matrix(4, 4, 3);
    const Matrix h = hadamard(a, b);
    for (std::size_t i = 0; i < h.data.size(); ++i) {
        CHECK(h.data[i] == a.data[i] * b.data[i]);
    }
    const Matrix c(4, 5);
    CHECK_THROWS_AS(hadamard(a, c), DimensionMismatch);
}

TEST_CASE("row_sums adds left to right") {
    Matrix a(2, 3);
    a.at(0, 0) = 1.0;
    a.at(0, 1) = 2.0;
    a.at(0, 2) = 3.0;
    a.at(1, 0) = -1.0;
    a.at(1, 1) = 0.5;
    a.at(1, 2) = 0.25;
    const std::vector<double> s = row_sums(a);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == (1.0 + 2.0) + 3.0);
    CHECK(s[1] == (-1.0 + 0.5) + 0.25);
}

TEST_CASE("block extraction and insertion round-trip") {
    const Matrix a = random_matrix(6, 6, 5);
    const Matrix blk = a.block(2, 3, 3, 2);
    REQUIRE(blk.rows == 3);
    REQUIRE(blk.cols == 2);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(blk.at(i, j) == a.at(2 + i, 3 + j));
        }
    }
    Matrix b(6, 6);
    b.set_block(2, 3, blk);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(b.at(2 + i, 3 + j) == blk.at(i, j));
        }
    }
}

TEST_CASE("block_range covers a ragged split") {
    CHECK(block_count(10, 4) == 3);
    const BlockRange r0 = block_range(10, 4, 0);
    const BlockRange r1 = block_range(10, 4, 1);
    const BlockRange r2 = block_range(10, 4, 2);
    CHECK(r0.begin == 0);
    CHECK(r0.count == 4);
    CHECK(r1.begin == 4);
    CHECK(r1.count == 4);
    CHECK(r2.begin == 8);
    CHECK(r2.count == 2);
}
