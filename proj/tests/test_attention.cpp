#include <doctest.h>

#include <cmath>

#include "attnio/attention.hpp"
#include "attnio/errors.hpp"
#include "attnio/problem_gen.hpp"

using namespace attnio;

namespace {

AttentionProblem worked_example() {
    AttentionProblem prob;
    prob.n = 2;
    prob.d = 1;
    prob.A1 = Matrix(2, 1);
    prob.A1.at(0, 0) = 1.0;
    prob.A1.at(1, 0) = 2.0;
    prob.A2 = Matrix(2, 1);
    prob.A2.at(0, 0) = 1.0;
    prob.A2.at(1, 0) = 0.0;
    prob.A3 = Matrix(2, 1);
    prob.A3.at(0, 0) = 1.0;
    prob.A3.at(1, 0) = 0.0;
    prob.X = Matrix(1, 1);
    prob.X.at(0, 0) = std::log(2.0);
    prob.Y = Matrix(1, 1);
    prob.Y.at(0, 0) = 1.0;
    prob.dO = Matrix(2, 1);
    prob.dO.at(0, 0) = 1.0;
    prob.dO.at(1, 0) = 0.0;
    return prob;
}

double max_rel_err(const Matrix& got, const Matrix& want) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < got.data.size(); ++i) {
        num = std::max(num, std::abs(got.data[i] - want.data[i]));
        den = std::max(den, std::abs(want.data[i]));
    }
    return den == 0.0 ? num : num / den;
}

}  // namespace

TEST_CASE("hand-computed two-by-two example matches every intermediate") {
    const AttentionProblem prob = worked_example();
    const ForwardArtifacts fwd = forward(prob);

    CHECK(fwd.A.at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fwd.A.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fwd.A.at(1, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(fwd.A.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(fwd.l[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fwd.l[1] == doctest::Approx(5.0).epsilon(1e-12));

    CHECK(fwd.f.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(fwd.f.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(fwd.f.at(1, 0) == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
    CHECK(fwd.f.at(1, 1) == doctest::Approx(1.0 / 5.0).epsilon(1e-12));

    CHECK(fwd.O.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(fwd.O.at(1, 0) == doctest::Approx(4.0 / 5.0).epsilon(1e-12));

    const BackwardArtifacts bwd = backward_reference(prob, fwd);
    CHECK(bwd.q.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bwd.q.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bwd.q.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bwd.q.at(1, 1) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK(std::abs(bwd.p.at(0, 0) - 2.0 / 9.0) < 1e-12);
    CHECK(std::abs(bwd.p.at(0, 1) + 2.0 / 9.0) < 1e-12);
    CHECK(std::abs(bwd.p.at(1, 0)) < 1e-12);
    CHECK(std::abs(bwd.p.at(1, 1)) < 1e-12);

    REQUIRE(bwd.g.rows == 1);
    REQUIRE(bwd.g.cols == 1);
    CHECK(std::abs(bwd.g.at(0, 0) - 2.0 / 9.0) < 1e-10);
}

TEST_CASE("finite differences confirm the analytic gradient") {
    const std::size_t shapes[][2] = {{4, 2}, {6, 3}, {8, 4}};
    std::uint64_t seed = 7;
    for (const auto& shape : shapes) {
        const GeneratedProblem gen = random_problem(shape[0], shape[1], seed++);
        const ForwardArtifacts fwd = forward(gen.prob);
        const BackwardArtifacts bwd = backward_reference(gen.prob, fwd);
        const FdResult fd = loss_and_fd_gradient(gen.prob, 1e-4);
        CHECK(max_rel_err(bwd.g, fd.g) < 1e-5);
    }
}

TEST_CASE("normalized weights and their gradient satisfy row identities") {
    const GeneratedProblem gen = random_problem(12, 4, 21);
    const ForwardArtifacts fwd = forward(gen.prob);
    const BackwardArtifacts bwd = backward_reference(gen.prob, fwd);

    for (std::size_t i = 0; i < fwd.f.rows; ++i) {
        double fsum = 0.0;
        double psum = 0.0;
        for (std::size_t j = 0; j < fwd.f.cols; ++j) {
            fsum += fwd.f.at(i, j);
            psum += bwd.p.at(i, j);
        }
        CHECK(std::abs(fsum - 1.0) < 1e-12);
        CHECK(std::abs(psum) < 1e-10);
    }

    const Matrix fq = hadamard(fwd.f, bwd.q);
    const Matrix odo = hadamard(fwd.O, gen.prob.dO);
    const std::vector<double> lhs = row_sums(fq);
    const std::vector<double> rhs = row_sums(odo);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        CHECK(std::abs(lhs[i] - rhs[i]) < 1e-10);
    }
}

TEST_CASE("score magnitudes beyond the guard raise NumericOverflow") {
    AttentionProblem prob = worked_example();
    prob.X.at(0, 0) = 30.0;
    CHECK_THROWS_AS(forward(prob), NumericOverflow);
}

TEST_CASE("forward rejects inconsistent shapes") {
    AttentionProblem prob = worked_example();
    prob.Y = Matrix(2, 1);
    CHECK_THROWS_AS(forward(prob), DimensionMismatch);
}

TEST_CASE("generated problems keep scores inside the target band") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const GeneratedProblem gen = random_problem(16, 4, seed);
        const Matrix scores = matmul(matmul(gen.prob.A1, gen.prob.X), transpose(gen.prob.A2));
        double max_abs = 0.0;
        for (const double s : scores.data) {
            max_abs = std::max(max_abs, std::abs(s));
        }
        CHECK(max_abs <= 20.0 + 1e-9);
        CHECK(gen.x_scale <= 1.0);
        CHECK(gen.x_scale > 0.0);
    }
}

TEST_CASE("the same seed reproduces the same problem") {
    const GeneratedProblem a = random_problem(8, 3, 42);
    const GeneratedProblem b = random_problem(8, 3, 42);
    CHECK(a.x_scale == b.x_scale);
    for (std::size_t i = 0; i < a.prob.X.data.size(); ++i) {
        CHECK(a.prob.X.data[i] == b.prob.X.data[i]);
    }
    for (std::size_t i = 0; i < a.prob.A1.data.size(); ++i) {
        CHECK(a.prob.A1.data[i] == b.prob.A1.data[i]);
    }
}
