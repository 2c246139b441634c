#include "attnio/problem_gen.hpp"

#include <cmath>
#include <random>

namespace attnio {

namespace {

constexpr double kScoreTarget = 20.0;

double unit_double(std::mt19937_64& eng) {
    // Top 53 bits to [0, 1); the engine's output sequence is pinned by the
    // standard, so this mapping is reproducible across platforms.
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& eng) {
    Matrix m(r, c);
    for (auto& x : m.data) {
        x = 2.0 * unit_double(eng) - 1.0;
    }
    return m;
}

}  // namespace

GeneratedProblem random_problem(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    GeneratedProblem out;
    out.prob.n = n;
    out.prob.d = d;
    out.prob.A1 = random_matrix(n, d, eng);
    out.prob.A2 = random_matrix(n, d, eng);
    out.prob.A3 = random_matrix(n, d, eng);
    out.prob.X = random_matrix(d, d, eng);
    out.prob.Y = random_matrix(d, d, eng);
    out.prob.dO = random_matrix(n, d, eng);

    const Matrix scores = matmul(matmul(out.prob.A1, out.prob.X), transpose(out.prob.A2));
    double max_abs = 0.0;
    for (double s : scores.data) {
        max_abs = std::max(max_abs, std::abs(s));
    }
    if (max_abs > kScoreTarget) {
        out.x_scale = kScoreTarget / max_abs;
        for (auto& x : out.prob.X.data) {
            x *= out.x_scale;
        }
    }
    return out;
}

}  // namespace attnio
