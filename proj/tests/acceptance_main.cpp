#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "attnio/attention.hpp"
#include "attnio/bounds.hpp"
#include "attnio/cache_sim.hpp"
#include "attnio/errors.hpp"
#include "attnio/kernels.hpp"
#include "attnio/pebble.hpp"
#include "attnio/problem_gen.hpp"

using namespace attnio;

namespace {

constexpr double kPairTol = 1e-8;
constexpr double kFdTol = 1e-5;
constexpr double kSlopeSmallLo = -0.6, kSlopeSmallHi = -0.4;
constexpr double kSlopeLargeLo = -1.15, kSlopeLargeHi = -0.85;
constexpr double kCrossoverFactor = 4.0;
constexpr double kWorkedTol = 1e-10;
constexpr double kRowStochTol = 1e-12;
constexpr double kRowZeroTol = 1e-10;
constexpr double kDiagTol = 1e-10;

double max_rel_err(const Matrix& got, const Matrix& want) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < got.data.size(); ++i) {
        num = std::max(num, std::abs(got.data[i] - want.data[i]));
        den = std::max(den, std::abs(want.data[i]));
    }
    return den == 0.0 ? num : num / den;
}

std::uint64_t large_floor(std::size_t d) {
    return std::max<std::uint64_t>(static_cast<std::uint64_t>(d) * d,
                                   large_cache_min_capacity(d));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool criterion_gradient_agreement(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t ns[] = {4, 8, 16, 32};
    const std::size_t ds[] = {2, 4, 8};
    double worst_pair = 0.0;
    double worst_fd = 0.0;
    for (int run = 0; run < 50; ++run) {
        const std::size_t n = ns[run % 4];
        const std::size_t d = ds[run % 3];
        const GeneratedProblem gen = random_problem(n, d, 1000 + run);
        const ForwardArtifacts fwd = forward(gen.prob);

        const KernelResult none = backward_no_cache(gen.prob);
        const KernelResult small = backward_small_cache(gen.prob, 16);
        const KernelResult large = backward_large_cache(gen.prob, fwd, large_floor(d));
        const FdResult fd = loss_and_fd_gradient(gen.prob, 1e-4);

        worst_pair = std::max(worst_pair, max_rel_err(small.g, none.g));
        worst_pair = std::max(worst_pair, max_rel_err(large.g, none.g));
        worst_pair = std::max(worst_pair, max_rel_err(small.g, large.g));
        worst_fd = std::max(worst_fd, max_rel_err(none.g, fd.g));
    }
    const double elapsed = seconds_since(start);
    std::ostringstream msg;
    msg << "50 problems, worst pairwise rel err " << worst_pair << " (tol " << kPairTol
        << "), worst FD rel err " << worst_fd << " (tol " << kFdTol << "), " << elapsed << " s";
    detail = msg.str();
    return worst_pair <= kPairTol && worst_fd <= kFdTol && elapsed < 30.0;
}

bool criterion_worked_value(std::string& detail) {
    AttentionProblem prob;
    prob.n = 2;
    prob.d = 1;
    prob.A1 = Matrix(2, 1);
    prob.A1.at(0, 0) = 1.0;
    prob.A1.at(1, 0) = 2.0;
    prob.A2 = Matrix(2, 1);
    prob.A2.at(0, 0) = 1.0;
    prob.A3 = Matrix(2, 1);
    prob.A3.at(0, 0) = 1.0;
    prob.X = Matrix(1, 1);
    prob.X.at(0, 0) = std::log(2.0);
    prob.Y = Matrix(1, 1);
    prob.Y.at(0, 0) = 1.0;
    prob.dO = Matrix(2, 1);
    prob.dO.at(0, 0) = 1.0;

    const double want = 2.0 / 9.0;
    const ForwardArtifacts fwd = forward(prob);

    CacheSim sim(no_cache_min_capacity(2, 1));
    const double g_none = backward_no_cache(prob, &sim).g.at(0, 0);
    const double g_small = backward_small_cache(prob, 4).g.at(0, 0);
    const double g_large = backward_large_cache(prob, fwd, large_floor(1)).g.at(0, 0);
    const double g_fd = loss_and_fd_gradient(prob, 1e-4).g.at(0, 0);

    const double worst = std::max({std::abs(g_none - want), std::abs(g_small - want),
                                   std::abs(g_large - want)});
    std::ostringstream msg;
    msg << "g = " << g_none << " / " << g_small << " / " << g_large
        << " vs 2/9, worst abs err " << worst << " (tol " << kWorkedTol << "), FD err "
        << std::abs(g_fd - want);
    detail = msg.str();
    return worst <= kWorkedTol && std::abs(g_fd - want) <= kFdTol;
}

bool criterion_small_cache_slope(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const GeneratedProblem gen = random_problem(64, 8, 64);
    std::vector<std::pair<double, double>> points;
    for (const std::uint64_t M : {8, 16, 32}) {
        const KernelResult r = backward_small_cache(gen.prob, M);
        points.push_back({static_cast<double>(M), static_cast<double>(r.io.total())});
    }
    const double slope = fit_exponent(points);
    const double elapsed = seconds_since(start);
    std::ostringstream msg;
    msg << "n=64 d=8, M in {8,16,32}, slope " << slope << " (window [" << kSlopeSmallLo << ", "
        << kSlopeSmallHi << "]), " << elapsed << " s";
    detail = msg.str();
    return slope >= kSlopeSmallLo && slope <= kSlopeSmallHi && elapsed < 60.0;
}

bool criterion_large_cache_slope(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const GeneratedProblem gen = random_problem(128, 4, 128);
    const ForwardArtifacts fwd = forward(gen.prob);
    std::vector<std::pair<double, double>> points;
    for (const std::uint64_t M : {16, 32, 64, 128, 256}) {
        const KernelResult r = backward_large_cache(gen.prob, fwd, M);
        points.push_back({static_cast<double>(M), static_cast<double>(r.io.total())});
    }
    const double slope = fit_exponent(points);
    const double elapsed = seconds_since(start);
    std::ostringstream msg;
    msg << "n=128 d=4, M in {16..256}, slope " << slope << " (window [" << kSlopeLargeLo << ", "
        << kSlopeLargeHi << "]), " << elapsed << " s";
    detail = msg.str();
    return slope >= kSlopeLargeLo && slope <= kSlopeLargeHi && elapsed < 60.0;
}

bool criterion_crossover(std::string& detail) {
    std::ostringstream msg;
    bool ok = true;
    const std::size_t configs[][2] = {{32, 4}, {64, 8}};
    for (const auto& cfg : configs) {
        const std::size_t n = cfg[0];
        const std::size_t d = cfg[1];
        const std::uint64_t M = static_cast<std::uint64_t>(d) * d;
        const GeneratedProblem gen = random_problem(n, d, 500 + n);
        const ForwardArtifacts fwd = forward(gen.prob);
        const KernelResult small = backward_small_cache(gen.prob, M);
        const KernelResult large = backward_large_cache(gen.prob, fwd, M);
        const double ratio = static_cast<double>(large.io.total()) / small.io.total();
        const BoundReport bounds = theoretical_bounds(n, d, M);
        const double cross = static_cast<double>(n) * n + static_cast<double>(n) * d;
        const bool branches_equal =
            bounds.small_branch == cross && bounds.large_branch == cross;
        const bool ratio_ok = ratio <= kCrossoverFactor && ratio >= 1.0 / kCrossoverFactor;
        ok = ok && branches_equal && ratio_ok;
        msg << "n=" << n << " d=" << d << ": ratio " << ratio << ", branches "
            << bounds.small_branch << "/" << bounds.large_branch << " vs " << cross << "; ";
    }
    detail = msg.str();
    return ok;
}

bool criterion_residency_fuzz(std::string& detail) {
    std::mt19937_64 eng(2024);
    std::uint64_t overflows = 0;
    std::uint64_t peak_violations = 0;
    for (int run = 0; run < 200; ++run) {
        const std::size_t n = 2 + eng() % 31;
        const std::size_t d = 1 + eng() % 8;
        const int kind = static_cast<int>(eng() % 3);
        const GeneratedProblem gen = random_problem(n, d, eng());
        try {
            IoCounter io;
            std::uint64_t M = 0;
            if (kind == 0) {
                M = no_cache_min_capacity(n, d) + eng() % 64;
                CacheSim sim(M);
                io = backward_no_cache(gen.prob, &sim).io;
            } else if (kind == 1) {
                M = 4 + eng() % 256;
                io = backward_small_cache(gen.prob, M).io;
            } else {
                M = large_floor(d) + eng() % 256;
                const ForwardArtifacts fwd = forward(gen.prob);
                io = backward_large_cache(gen.prob, fwd, M).io;
            }
            if (io.peak_residency > M) {
                ++peak_violations;
            }
        } catch (const CacheOverflow&) {
            ++overflows;
        }
    }
    std::ostringstream msg;
    msg << "200 runs, " << overflows << " overflows, " << peak_violations << " peak violations";
    detail = msg.str();
    return overflows == 0 && peak_violations == 0;
}

bool criterion_pebble_bridge(std::string& detail) {
    std::uint64_t cells = 0;
    std::uint64_t mismatches = 0;
    const std::size_t dims[] = {1, 2, 3, 4, 5, 8};
    const std::uint64_t tiles[] = {1, 2, 3};
    for (const std::size_t n1 : dims) {
        for (const std::size_t d : dims) {
            for (const std::size_t n2 : dims) {
                const std::size_t nodes = n1 * d + d * n2 + n1 * n2 * (2 * d - 1);
                if (nodes > 4096) {
                    continue;
                }
                const PebbleDag dag = build_matmul_dag(n1, d, n2);
                for (const std::uint64_t B : tiles) {
                    const std::uint64_t probe_budget = std::max<std::uint64_t>(nodes, 4 * B * B);
                    const std::vector<Move> trace =
                        lower_blocked_matmul_trace(n1, d, n2, B, probe_budget);
                    const GameState probe = run_trace(dag, trace, probe_budget);
                    const std::uint64_t M = std::max<std::uint64_t>(4 * B * B, probe.peak_red);
                    const std::uint64_t trace_io = validate_trace(
                        dag, lower_blocked_matmul_trace(n1, d, n2, B, M), M);
                    const std::uint64_t sim_io = blocked_matmul_io(n1, d, n2, B, M).total();
                    ++cells;
                    if (trace_io != sim_io) {
                        ++mismatches;
                    }
                }
            }
        }
    }

    // Budgets pinned at exactly four tile areas.
    bool pinned_ok = true;
    {
        const PebbleDag dag = build_matmul_dag(2, 2, 2);
        const std::uint64_t io = validate_trace(dag, lower_blocked_matmul_trace(2, 2, 2, 1, 4), 4);
        pinned_ok = pinned_ok && io == blocked_matmul_io(2, 2, 2, 1, 4).total();
    }
    {
        const PebbleDag dag = build_matmul_dag(4, 2, 4);
        const std::uint64_t io =
            validate_trace(dag, lower_blocked_matmul_trace(4, 2, 4, 2, 16), 16);
        pinned_ok = pinned_ok && io == blocked_matmul_io(4, 2, 4, 2, 16).total();
    }

    std::ostringstream msg;
    msg << cells << " grid cells plus 2 pinned budgets, " << mismatches << " mismatches, pinned "
        << (pinned_ok ? "ok" : "FAILED");
    detail = msg.str();
    return mismatches == 0 && pinned_ok;
}

bool criterion_dense_reduction(std::string& detail) {
    std::uint64_t checks = 0;
    std::uint64_t mismatches = 0;
    for (std::size_t n = 2; n <= 16; ++n) {
        for (std::size_t d = 1; d <= 8; ++d) {
            Matrix a1(n, d);
            Matrix x(d, d);
            Matrix a2(n, d);
            for (auto& v : a1.data) v = 1.0;
            for (auto& v : x.data) v = 1.0;
            for (auto& v : a2.data) v = 1.0;
            const SparseStats stats = sparse_stats(a1, x, a2);
            for (std::uint64_t M = 1; M <= 64; ++M) {
                ++checks;
                if (sparse_lower_bound(stats, M) != theoretical_bounds(n, d, M).backward_bound) {
                    ++mismatches;
                }
            }
        }
    }
    std::ostringstream msg;
    msg << checks << " grid points, " << mismatches << " inequalities";
    detail = msg.str();
    return mismatches == 0;
}

bool criterion_internal_identities(std::string& detail) {
    std::mt19937_64 eng(99);
    double worst_f = 0.0;
    double worst_p = 0.0;
    double worst_diag = 0.0;
    for (int run = 0; run < 50; ++run) {
        const std::size_t n = 2 + eng() % 31;
        const std::size_t d = 1 + eng() % 8;
        const GeneratedProblem gen = random_problem(n, d, eng());
        const ForwardArtifacts fwd = forward(gen.prob);
        const BackwardArtifacts bwd = backward_reference(gen.prob, fwd);

        const Matrix fq = hadamard(fwd.f, bwd.q);
        const Matrix odo = hadamard(fwd.O, gen.prob.dO);
        const std::vector<double> lhs = row_sums(fq);
        const std::vector<double> rhs = row_sums(odo);
        for (std::size_t i = 0; i < n; ++i) {
            double fsum = 0.0;
            double psum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                fsum += fwd.f.at(i, j);
                psum += bwd.p.at(i, j);
            }
            worst_f = std::max(worst_f, std::abs(fsum - 1.0));
            worst_p = std::max(worst_p, std::abs(psum));
            worst_diag = std::max(worst_diag, std::abs(lhs[i] - rhs[i]));
        }
    }
    std::ostringstream msg;
    msg << "50 problems; row sums of f off by " << worst_f << " (tol " << kRowStochTol
        << "), of p by " << worst_p << " (tol " << kRowZeroTol << "), diagnostic identity by "
        << worst_diag << " (tol " << kDiagTol << ")";
    detail = msg.str();
    return worst_f <= kRowStochTol && worst_p <= kRowZeroTol && worst_diag <= kDiagTol;
}

}  // namespace

int main() {
    const struct {
        const char* name;
        std::function<bool(std::string&)> run;
    } criteria[] = {
        {"criterion 1: three kernels and finite differences agree on 50 problems",
         criterion_gradient_agreement},
        {"criterion 2: hand-computed 2x1 example yields g = 2/9 on all kernels",
         criterion_worked_value},
        {"criterion 3: square-tile transfers scale like 1/sqrt(M)", criterion_small_cache_slope},
        {"criterion 4: panel transfers scale like 1/M", criterion_large_cache_slope},
        {"criterion 5: tiled kernels and bound branches meet at M = d*d", criterion_crossover},
        {"criterion 6: fuzzed runs never overflow or exceed peak residency",
         criterion_residency_fuzz},
        {"criterion 7: lowered pebble traces replay the simulator exactly",
         criterion_pebble_bridge},
        {"criterion 8: support bound equals the closed form on dense inputs",
         criterion_dense_reduction},
        {"criterion 9: row identities of f, p, and the diagnostic hold",
         criterion_internal_identities},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] %s (%s)\n", ok ? "PASS" : "FAIL", c.name, detail.c_str());
        if (!ok) {
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}
