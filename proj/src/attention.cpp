#include "attnio/attention.hpp"

#include <cmath>
#include <string>

namespace attnio {

namespace {

void check_shapes(const AttentionProblem& prob) {
    const std::size_t n = prob.n;
    const std::size_t d = prob.d;
    auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows != r || m.cols != c) {
            throw DimensionMismatch(std::string(name) + ": expected " + std::to_string(r) + "x" +
                                    std::to_string(c) + ", got " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols));
        }
    };
    expect(prob.A1, n, d, "A1");
    expect(prob.A2, n, d, "A2");
    expect(prob.A3, n, d, "A3");
    expect(prob.X, d, d, "X");
    expect(prob.Y, d, d, "Y");
    expect(prob.dO, n, d, "dO");
}

}  // namespace

ForwardArtifacts forward(const AttentionProblem& prob) {
    check_shapes(prob);
    ForwardArtifacts fwd;

    Matrix scores = matmul(matmul(prob.A1, prob.X), transpose(prob.A2));
    fwd.A = Matrix(prob.n, prob.n);
    for (std::size_t i = 0; i < prob.n; ++i) {
        for (std::size_t j = 0; j < prob.n; ++j) {
            const double s = scores.at(i, j);
            if (std::abs(s) > kScoreGuard) {
                throw NumericOverflow("score " + std::to_string(s) + " at (" + std::to_string(i) +
                                      "," + std::to_string(j) + ") exceeds guard " +
                                      std::to_string(kScoreGuard));
            }
            fwd.A.at(i, j) = std::exp(s);
        }
    }

    fwd.l = row_sums(fwd.A);
    fwd.f = Matrix(prob.n, prob.n);
    for (std::size_t i = 0; i < prob.n; ++i) {
        for (std::size_t j = 0; j < prob.n; ++j) {
            fwd.f.at(i, j) = fwd.A.at(i, j) / fwd.l[i];
        }
    }

    fwd.h = matmul(prob.A3, prob.Y);
    fwd.O = matmul(fwd.f, fwd.h);
    return fwd;
}

BackwardArtifacts backward_reference(const AttentionProblem& prob, const ForwardArtifacts& fwd) {
    BackwardArtifacts bwd;
    bwd.q = matmul(prob.dO, transpose(fwd.h));

    bwd.p = Matrix(prob.n, prob.n);
    for (std::size_t i = 0; i < prob.n; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < prob.n; ++j) {
            v += fwd.f.at(i, j) * bwd.q.at(i, j);
        }
        for (std::size_t j = 0; j < prob.n; ++j) {
            const double fq = fwd.f.at(i, j) * bwd.q.at(i, j);
            bwd.p.at(i, j) = fq - v * fwd.f.at(i, j);
        }
    }

    bwd.g = matmul(matmul(transpose(prob.A1), bwd.p), prob.A2);
    return bwd;
}

FdResult loss_and_fd_gradient(const AttentionProblem& prob, double step) {
    FdResult result;

    auto loss_at = [&prob](const Matrix& x) {
        AttentionProblem local = prob;
        local.X = x;
        const ForwardArtifacts fwd = forward(local);
        double loss = 0.0;
        for (std::size_t i = 0; i < fwd.O.data.size(); ++i) {
            loss += prob.dO.data[i] * fwd.O.data[i];
        }
        return loss;
    };

    result.loss = loss_at(prob.X);
    result.g = Matrix(prob.d, prob.d);
    for (std::size_t a = 0; a < prob.d; ++a) {
        for (std::size_t b = 0; b < prob.d; ++b) {
            Matrix x_plus = prob.X;
            Matrix x_minus = prob.X;
            x_plus.at(a, b) += step;
            x_minus.at(a, b) -= step;
            result.g.at(a, b) = (loss_at(x_plus) - loss_at(x_minus)) / (2.0 * step);
        }
    }
    return result;
}

}  // namespace attnio
