#include "attnio/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace attnio {

namespace {

void validate_problem(const AttentionProblem& prob) {
    const std::size_t n = prob.n;
    const std::size_t d = prob.d;
    auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows != r || m.cols != c) {
            throw DimensionMismatch(std::string(name) + ": expected " + std::to_string(r) + "x" +
                                    std::to_string(c) + ", got " + std::to_string(m.rows) + "x" +
                                    std::to_string(m.cols));
        }
    };
    if (n == 0 || d == 0) {
        throw DimensionMismatch("problem dimensions must be positive");
    }
    expect(prob.A1, n, d, "A1");
    expect(prob.A2, n, d, "A2");
    expect(prob.A3, n, d, "A3");
    expect(prob.X, d, d, "X");
    expect(prob.Y, d, d, "Y");
    expect(prob.dO, n, d, "dO");
}

void check_score_guard(double s) {
    if (std::abs(s) > kScoreGuard) {
        throw NumericOverflow("score " + std::to_string(s) + " exceeds guard " +
                              std::to_string(kScoreGuard));
    }
}

/** Matrix read through an optional transpose, without materializing it. */
struct Operand {
    const Matrix* m;
    bool trans;

    std::size_t rows() const { return trans ? m->cols : m->rows; }
    std::size_t cols() const { return trans ? m->rows : m->cols; }
    double at(std::size_t i, std::size_t j) const { return trans ? m->at(j, i) : m->at(i, j); }
};

/**
 * out = a * b over B x B tiles, charged to sim. Per output tile: reserve an
 * accumulator, stream both operand tiles for every inner block, write the
 * accumulator out. Peak residency is 3B^2.
 */
void sim_blocked_matmul(CacheSim& sim, Matrix& out, const Operand& a, const Operand& b,
                        std::uint64_t B) {
    const std::size_t n1 = a.rows();
    const std::size_t kk = a.cols();
    const std::size_t n2 = b.cols();
    if (kk != b.rows() || out.rows != n1 || out.cols != n2) {
        throw DimensionMismatch("blocked matmul shapes");
    }
    const std::size_t bi_n = block_count(n1, B);
    const std::size_t bj_n = block_count(n2, B);
    const std::size_t bk_n = block_count(kk, B);

    for (std::size_t ib = 0; ib < bi_n; ++ib) {
        const BlockRange ri = block_range(n1, B, ib);
        for (std::size_t jb = 0; jb < bj_n; ++jb) {
            const BlockRange rj = block_range(n2, B, jb);
            sim.alloc("mm_acc", static_cast<std::uint64_t>(ri.count) * rj.count);
            Matrix acc(ri.count, rj.count);
            for (std::size_t kb = 0; kb < bk_n; ++kb) {
                const BlockRange rk = block_range(kk, B, kb);
                sim.load("mm_a", static_cast<std::uint64_t>(ri.count) * rk.count);
                sim.load("mm_b", static_cast<std::uint64_t>(rk.count) * rj.count);
                for (std::size_t i = 0; i < ri.count; ++i) {
                    for (std::size_t j = 0; j < rj.count; ++j) {
                        double s = acc.at(i, j);
                        for (std::size_t k = 0; k < rk.count; ++k) {
                            s += a.at(ri.begin + i, rk.begin + k) * b.at(rk.begin + k, rj.begin + j);
                        }
                        acc.at(i, j) = s;
                    }
                }
                sim.evict("mm_a");
                sim.evict("mm_b");
            }
            sim.store("mm_acc", static_cast<std::uint64_t>(ri.count) * rj.count);
            out.set_block(ri.begin, rj.begin, acc);
            sim.evict("mm_acc");
        }
    }
}

}  // namespace

BlockParams block_params_small(std::uint64_t M) {
    if (M < 4) {
        throw CacheTooSmall("square-tile kernel needs capacity of at least 4, got " +
                            std::to_string(M));
    }
    std::uint64_t B = 1;
    while ((B + 1) * (B + 1) * 4 <= M) {
        ++B;
    }
    BlockParams params;
    params.B = B;
    return params;
}

BlockParams block_params_large(std::uint64_t M, std::size_t d) {
    if (M == 0 || d == 0) {
        throw CacheTooSmall("panel kernel needs positive capacity and width");
    }
    BlockParams params;
    const std::uint64_t dd = static_cast<std::uint64_t>(d);
    params.Bc = (M + 4 * dd - 1) / (4 * dd);
    params.Br = std::min(params.Bc, dd);
    return params;
}

std::uint64_t no_cache_min_capacity(std::size_t n, std::size_t d) {
    const std::uint64_t nn = n;
    const std::uint64_t dd = d;
    return 3 * nn * nn + 2 * nn * dd + dd * dd;
}

std::uint64_t large_cache_min_capacity(std::size_t d) {
    const std::uint64_t dd = d;
    return std::max({dd * dd, dd + 4, 2 * dd + 1});
}

KernelResult backward_no_cache(const AttentionProblem& prob, CacheSim* sim) {
    validate_problem(prob);
    const std::size_t n = prob.n;
    const std::size_t d = prob.d;
    const std::uint64_t nd = static_cast<std::uint64_t>(n) * d;
    const std::uint64_t nn = static_cast<std::uint64_t>(n) * n;
    const std::uint64_t dd = static_cast<std::uint64_t>(d) * d;

    if (sim != nullptr && sim->capacity() < no_cache_min_capacity(n, d)) {
        throw CacheTooSmall("single-pass kernel needs capacity " +
                            std::to_string(no_cache_min_capacity(n, d)) + ", got " +
                            std::to_string(sim->capacity()));
    }
    auto load = [&](const char* tag, std::uint64_t size) { if (sim) sim->load(tag, size); };
    auto alloc = [&](const char* tag, std::uint64_t size) { if (sim) sim->alloc(tag, size); };
    auto store = [&](const char* tag, std::uint64_t size) { if (sim) sim->store(tag, size); };
    auto evict = [&](const char* tag) { if (sim) sim->evict(tag); };

    // h and q come first; their working sets are the smallest, and q is the
    // only piece of them the rest of the pass needs.
    load("A3", nd);
    load("Y", dd);
    alloc("h", nd);
    const Matrix h = matmul(prob.A3, prob.Y);
    evict("A3");
    evict("Y");

    load("dO", nd);
    alloc("q", nn);
    const Matrix q = matmul(prob.dO, transpose(h));
    evict("dO");
    evict("h");

    load("A1", nd);
    load("X", dd);
    alloc("S", nd);
    const Matrix S = matmul(prob.A1, prob.X);
    evict("X");

    load("A2", nd);
    alloc("A", nn);
    const Matrix scores = matmul(S, transpose(prob.A2));
    Matrix A(n, n);
    for (std::size_t i = 0; i < nn; ++i) {
        check_score_guard(scores.data[i]);
        A.data[i] = std::exp(scores.data[i]);
    }
    evict("S");

    alloc("f", nn);
    Matrix f(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        alloc("l", 1);
        double l = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            l += A.at(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) {
            f.at(i, j) = A.at(i, j) / l;
        }
        evict("l");
    }
    evict("A");

    alloc("p", nn);
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        alloc("v", 1);
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            v += f.at(i, j) * q.at(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double fq = f.at(i, j) * q.at(i, j);
            p.at(i, j) = fq - v * f.at(i, j);
        }
        evict("v");
    }
    evict("f");
    evict("q");

    alloc("T", nd);
    const Matrix T = matmul(transpose(prob.A1), p);
    evict("p");
    evict("A1");

    alloc("g", dd);
    KernelResult result;
    result.g = matmul(T, prob.A2);
    evict("T");
    evict("A2");
    store("g", dd);
    evict("g");

    if (sim) {
        result.io = sim->snapshot();
    }
    return result;
}

KernelResult backward_small_cache(const AttentionProblem& prob, std::uint64_t M) {
    validate_problem(prob);
    const std::size_t n = prob.n;
    const std::size_t d = prob.d;
    const std::uint64_t B = block_params_small(M).B;
    CacheSim sim(M);

    // Phase 1: S = A1*X, then A = exp(S*A2^T) with row sums l, then f.
    Matrix S(n, d);
    sim_blocked_matmul(sim, S, {&prob.A1, false}, {&prob.X, false}, B);

    Matrix A(n, n);
    Matrix f(n, n);
    const std::size_t bn = block_count(n, B);
    const std::size_t bd = block_count(d, B);
    for (std::size_t ib = 0; ib < bn; ++ib) {
        const BlockRange ri = block_range(n, B, ib);
        sim.alloc("l_i", ri.count);
        std::vector<double> l_i(ri.count, 0.0);
        for (std::size_t jb = 0; jb < bn; ++jb) {
            const BlockRange rj = block_range(n, B, jb);
            sim.alloc("A_blk", static_cast<std::uint64_t>(ri.count) * rj.count);
            Matrix blk(ri.count, rj.count);
            for (std::size_t kb = 0; kb < bd; ++kb) {
                const BlockRange rk = block_range(d, B, kb);
                sim.load("S_blk", static_cast<std::uint64_t>(ri.count) * rk.count);
                sim.load("A2t_blk", static_cast<std::uint64_t>(rk.count) * rj.count);
                for (std::size_t i = 0; i < ri.count; ++i) {
                    for (std::size_t j = 0; j < rj.count; ++j) {
                        double s = blk.at(i, j);
                        for (std::size_t k = 0; k < rk.count; ++k) {
                            s += S.at(ri.begin + i, rk.begin + k) *
                                 prob.A2.at(rj.begin + j, rk.begin + k);
                        }
                        blk.at(i, j) = s;
                    }
                }
                sim.evict("S_blk");
                sim.evict("A2t_blk");
            }
            for (std::size_t i = 0; i < ri.count; ++i) {
                for (std::size_t j = 0; j < rj.count; ++j) {
                    check_score_guard(blk.at(i, j));
                    blk.at(i, j) = std::exp(blk.at(i, j));
                    l_i[i] += blk.at(i, j);
                }
            }
            sim.store("A_blk", static_cast<std::uint64_t>(ri.count) * rj.count);
            A.set_block(ri.begin, rj.begin, blk);
            sim.evict("A_blk");
        }
        for (std::size_t jb = 0; jb < bn; ++jb) {
            const BlockRange rj = block_range(n, B, jb);
            const std::uint64_t blk_size = static_cast<std::uint64_t>(ri.count) * rj.count;
            sim.load("A_blk", blk_size);
            sim.alloc("f_blk", blk_size);
            Matrix blk(ri.count, rj.count);
            for (std::size_t i = 0; i < ri.count; ++i) {
                for (std::size_t j = 0; j < rj.count; ++j) {
                    blk.at(i, j) = A.at(ri.begin + i, rj.begin + j) / l_i[i];
                }
            }
            sim.store("f_blk", blk_size);
            f.set_block(ri.begin, rj.begin, blk);
            sim.evict("A_blk");
            sim.evict("f_blk");
        }
        sim.evict("l_i");
    }

    // Phase 2: h = A3*Y, then q = dO*h^T.
    Matrix h(n, d);
    sim_blocked_matmul(sim, h, {&prob.A3, false}, {&prob.Y, false}, B);
    Matrix q(n, n);
    sim_blocked_matmul(sim, q, {&prob.dO, false}, {&h, true}, B);

    // Phase 3: one pass for the row sums v, one pass for p.
    Matrix p(n, n);
    for (std::size_t ib = 0; ib < bn; ++ib) {
        const BlockRange ri = block_range(n, B, ib);
        sim.alloc("v_i", ri.count);
        std::vector<double> v_i(ri.count, 0.0);
        for (std::size_t jb = 0; jb < bn; ++jb) {
            const BlockRange rj = block_range(n, B, jb);
            const std::uint64_t blk_size = static_cast<std::uint64_t>(ri.count) * rj.count;
            sim.load("f_blk", blk_size);
            sim.load("q_blk", blk_size);
            for (std::size_t i = 0; i < ri.count; ++i) {
                for (std::size_t j = 0; j < rj.count; ++j) {
                    v_i[i] += f.at(ri.begin + i, rj.begin + j) * q.at(ri.begin + i, rj.begin + j);
                }
            }
            sim.evict("f_blk");
            sim.evict("q_blk");
        }
        for (std::size_t jb = 0; jb < bn; ++jb) {
            const BlockRange rj = block_range(n, B, jb);
            const std::uint64_t blk_size = static_cast<std::uint64_t>(ri.count) * rj.count;
            sim.load("f_blk", blk_size);
            sim.load("q_blk", blk_size);
            sim.alloc("p_blk", blk_size);
            Matrix blk(ri.count, rj.count);
            for (std::size_t i = 0; i < ri.count; ++i) {
                for (std::size_t j = 0; j < rj.count; ++j) {
                    const double fv = f.at(ri.begin + i, rj.begin + j);
                    const double qv = q.at(ri.begin + i, rj.begin + j);
                    blk.at(i, j) = fv * qv - v_i[i] * fv;
                }
            }
            sim.store("p_blk", blk_size);
            p.set_block(ri.begin, rj.begin, blk);
            sim.evict("f_blk");
            sim.evict("q_blk");
            sim.evict("p_blk");
        }
        sim.evict("v_i");
    }

    // Phase 4: T = A1^T*p, then g = T*A2.
    Matrix T(d, n);
    sim_blocked_matmul(sim, T, {&prob.A1, true}, {&p, false}, B);
    KernelResult result;
    result.g = Matrix(d, d);
    sim_blocked_matmul(sim, result.g, {&T, false}, {&prob.A2, false}, B);
    result.io = sim.snapshot();
    return result;
}

namespace {

std::uint64_t p1_cost(std::uint64_t n, std::uint64_t d, std::uint64_t M) {
    if (d * d + 2 * d + 1 <= M) {
        return 2 * (d * d + 2 * n * d);
    }
    return 2 * n * (d * d + 2 * d);
}

std::uint64_t v_pass_cost(std::uint64_t n, std::uint64_t d) { return n * (2 * d + 1); }

std::uint64_t peak_key_panel(std::uint64_t Bc, std::uint64_t d) {
    return 3 * Bc * d + d + 3 * Bc + 3;
}

std::uint64_t peak_query_row(std::uint64_t d) { return 4 * d + 5; }

std::uint64_t peak_key_column(std::uint64_t d) { return d + 4; }

std::uint64_t cost_key_panel(std::uint64_t n, std::uint64_t d, std::uint64_t Bc, bool g_cached,
                             std::uint64_t M) {
    const std::uint64_t Tc = (n + Bc - 1) / Bc;
    const std::uint64_t pairs = n * Tc * (3 * d + 2);
    const std::uint64_t key = 2 * n * d;
    const std::uint64_t g_io = g_cached ? d * d : d * d + 2 * d * d * Tc;
    return pairs + key + g_io + p1_cost(n, d, M) + v_pass_cost(n, d);
}

std::uint64_t cost_query_row(std::uint64_t n, std::uint64_t d, bool g_cached, std::uint64_t M) {
    const std::uint64_t rows = n * (3 * d + 2);
    const std::uint64_t keys = 2 * d * n * n;
    const std::uint64_t g_io = g_cached ? d * d : d * d + 2 * d * d * n;
    return rows + keys + g_io + p1_cost(n, d, M) + v_pass_cost(n, d);
}

std::uint64_t cost_key_column(std::uint64_t n, std::uint64_t d, std::uint64_t M) {
    const std::uint64_t pairs = n * n * (5 * d + 2);
    const std::uint64_t per_column = n * (d + 2 * d * d);
    return pairs + per_column + d * d + p1_cost(n, d, M) + v_pass_cost(n, d);
}

}  // namespace

Phase2Plan plan_large_phase2(std::size_t n_in, std::size_t d_in, std::uint64_t M) {
    const std::uint64_t n = n_in;
    const std::uint64_t d = d_in;

    Phase2Plan best;
    std::uint64_t best_cost = std::numeric_limits<std::uint64_t>::max();
    auto consider = [&](LargeVariant variant, std::uint64_t Bc, bool g_cached, std::uint64_t cost) {
        if (cost < best_cost) {
            best_cost = cost;
            best.variant = variant;
            best.Bc = Bc;
            best.g_in_cache = g_cached;
            best.predicted_io = cost;
        }
    };

    for (const bool g_cached : {true, false}) {
        const std::uint64_t reserve = g_cached ? d * d : 0;
        if (M >= reserve + peak_key_panel(1, d)) {
            std::uint64_t Bc = (M - reserve - d - 3) / (3 * d + 3);
            Bc = std::min<std::uint64_t>(std::max<std::uint64_t>(Bc, 1), n);
            consider(LargeVariant::KeyPanel, Bc, g_cached, cost_key_panel(n, d, Bc, g_cached, M));
        }
        if (M >= reserve + peak_query_row(d)) {
            consider(LargeVariant::QueryRow, 1, g_cached, cost_query_row(n, d, g_cached, M));
        }
    }
    if (M >= peak_key_column(d)) {
        consider(LargeVariant::KeyColumn, 1, false, cost_key_column(n, d, M));
    }

    if (best_cost == std::numeric_limits<std::uint64_t>::max()) {
        throw CacheTooSmall("panel kernel has no feasible schedule at capacity " + std::to_string(M));
    }
    return best;
}

namespace {

/** S = rows*square as one row at a time; the square factor stays resident when it fits. */
void p1_product(CacheSim& sim, Matrix& out, const Matrix& rows, const Matrix& square,
                std::uint64_t M) {
    const std::size_t n = rows.rows;
    const std::size_t d = rows.cols;
    const std::uint64_t dd = static_cast<std::uint64_t>(d) * d;
    if (dd + 2 * d + 1 <= M) {
        sim.load("p1_sq", dd);
        for (std::size_t r = 0; r < n; ++r) {
            sim.load("p1_row", d);
            sim.alloc("p1_out", d);
            for (std::size_t c = 0; c < d; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    acc += rows.at(r, k) * square.at(k, c);
                }
                out.at(r, c) = acc;
            }
            sim.store("p1_out", d);
            sim.evict("p1_row");
            sim.evict("p1_out");
        }
        sim.evict("p1_sq");
    } else {
        for (std::size_t r = 0; r < n; ++r) {
            sim.load("p1_row", d);
            sim.alloc("p1_out", d);
            for (std::size_t c = 0; c < d; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    sim.load("p1_el", 1);
                    acc += rows.at(r, k) * square.at(k, c);
                    sim.evict("p1_el");
                }
                out.at(r, c) = acc;
            }
            sim.store("p1_out", d);
            sim.evict("p1_row");
            sim.evict("p1_out");
        }
    }
}

struct LargeInputs {
    const AttentionProblem* prob;
    const Matrix* S;
    const Matrix* h;
    const std::vector<double>* l;
    const std::vector<double>* v;
};

/** Row r of p against key c, from resident scalars. Shared by all variants. */
double p_entry(const LargeInputs& in, std::size_t r, std::size_t c, double q_val) {
    const std::size_t d = in.prob->d;
    double a = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        a += in.S->at(r, k) * in.prob->A2.at(c, k);
    }
    check_score_guard(a);
    const double f = std::exp(a) / (*in.l)[r];
    return f * q_val - (*in.v)[r] * f;
}

void init_g_in_memory(CacheSim& sim, std::uint64_t dd) {
    sim.alloc("g", dd);
    sim.store("g", dd);
    sim.evict("g");
}

/** g += t_tile * A2[c_begin..c_begin+c_count), one read-modify-write row strip at a time. */
void add_tile_to_g_rows(CacheSim& sim, Matrix& g, const Matrix& t_tile, const Matrix& a2,
                        std::size_t c_begin, std::size_t c_count) {
    const std::size_t d = g.rows;
    for (std::size_t a = 0; a < d; ++a) {
        sim.load("g_row", d);
        for (std::size_t b = 0; b < d; ++b) {
            double add = 0.0;
            for (std::size_t c = 0; c < c_count; ++c) {
                add += t_tile.at(a, c) * a2.at(c_begin + c, b);
            }
            g.at(a, b) += add;
        }
        sim.store("g_row", d);
        sim.evict("g_row");
    }
}

/** g += scale (x) w_row, one read-modify-write row strip at a time. */
void add_outer_to_g_rows(CacheSim& sim, Matrix& g, const std::vector<double>& scale,
                         const std::vector<double>& w_row) {
    const std::size_t d = g.rows;
    for (std::size_t a = 0; a < d; ++a) {
        sim.load("g_row", d);
        for (std::size_t b = 0; b < d; ++b) {
            g.at(a, b) += scale[a] * w_row[b];
        }
        sim.store("g_row", d);
        sim.evict("g_row");
    }
}

Matrix phase2_key_panel(CacheSim& sim, const LargeInputs& in, std::uint64_t Bc, bool g_cached) {
    const std::size_t n = in.prob->n;
    const std::size_t d = in.prob->d;
    const std::uint64_t dd = static_cast<std::uint64_t>(d) * d;
    Matrix g(d, d);
    if (g_cached) {
        sim.alloc("g", dd);
    } else {
        init_g_in_memory(sim, dd);
    }

    const std::size_t blocks = block_count(n, Bc);
    for (std::size_t jb = 0; jb < blocks; ++jb) {
        const BlockRange rj = block_range(n, Bc, jb);
        const std::uint64_t panel = static_cast<std::uint64_t>(rj.count) * d;
        sim.load("h_j", panel);
        sim.load("A2_j", panel);
        sim.alloc("T_j", static_cast<std::uint64_t>(d) * rj.count);
        Matrix T_j(d, rj.count);

        for (std::size_t r = 0; r < n; ++r) {
            sim.load("dO_r", d);
            sim.alloc("q_r", rj.count);
            std::vector<double> q_row(rj.count, 0.0);
            for (std::size_t c = 0; c < rj.count; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    acc += in.prob->dO.at(r, k) * in.h->at(rj.begin + c, k);
                }
                q_row[c] = acc;
            }
            sim.evict("dO_r");

            sim.load("S_r", d);
            sim.alloc("a_r", rj.count);
            std::vector<double> f_row(rj.count, 0.0);
            for (std::size_t c = 0; c < rj.count; ++c) {
                double a = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    a += in.S->at(r, k) * in.prob->A2.at(rj.begin + c, k);
                }
                check_score_guard(a);
                f_row[c] = a;
            }
            sim.evict("S_r");
            sim.load("l_r", 1);
            for (std::size_t c = 0; c < rj.count; ++c) {
                f_row[c] = std::exp(f_row[c]) / (*in.l)[r];
            }
            sim.evict("l_r");

            sim.load("v_r", 1);
            sim.alloc("p_r", rj.count);
            std::vector<double> p_row(rj.count, 0.0);
            for (std::size_t c = 0; c < rj.count; ++c) {
                p_row[c] = f_row[c] * q_row[c] - (*in.v)[r] * f_row[c];
            }
            sim.evict("q_r");
            sim.evict("a_r");
            sim.evict("v_r");

            sim.load("A1_r", d);
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t c = 0; c < rj.count; ++c) {
                    T_j.at(a, c) += in.prob->A1.at(r, a) * p_row[c];
                }
            }
            sim.evict("A1_r");
            sim.evict("p_r");
        }

        if (g_cached) {
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = 0; b < d; ++b) {
                    double add = 0.0;
                    for (std::size_t c = 0; c < rj.count; ++c) {
                        add += T_j.at(a, c) * in.prob->A2.at(rj.begin + c, b);
                    }
                    g.at(a, b) += add;
                }
            }
        } else {
            add_tile_to_g_rows(sim, g, T_j, in.prob->A2, rj.begin, rj.count);
        }
        sim.evict("T_j");
        sim.evict("A2_j");
        sim.evict("h_j");
    }

    if (g_cached) {
        sim.store("g", dd);
        sim.evict("g");
    }
    return g;
}

Matrix phase2_query_row(CacheSim& sim, const LargeInputs& in, bool g_cached) {
    const std::size_t n = in.prob->n;
    const std::size_t d = in.prob->d;
    const std::uint64_t dd = static_cast<std::uint64_t>(d) * d;
    Matrix g(d, d);
    if (g_cached) {
        sim.alloc("g", dd);
    } else {
        init_g_in_memory(sim, dd);
    }

    for (std::size_t r = 0; r < n; ++r) {
        sim.load("dO_r", d);
        sim.load("S_r", d);
        sim.load("l_r", 1);
        sim.load("v_r", 1);
        sim.alloc("W_r", d);
        std::vector<double> w_row(d, 0.0);

        for (std::size_t c = 0; c < n; ++c) {
            sim.load("h_c", d);
            sim.alloc("q1", 1);
            double q_val = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                q_val += in.prob->dO.at(r, k) * in.h->at(c, k);
            }
            sim.evict("h_c");

            sim.load("A2_c", d);
            sim.alloc("a1", 1);
            sim.alloc("p1", 1);
            const double p_val = p_entry(in, r, c, q_val);
            for (std::size_t b = 0; b < d; ++b) {
                w_row[b] += p_val * in.prob->A2.at(c, b);
            }
            sim.evict("A2_c");
            sim.evict("q1");
            sim.evict("a1");
            sim.evict("p1");
        }
        sim.evict("dO_r");
        sim.evict("S_r");
        sim.evict("l_r");
        sim.evict("v_r");

        sim.load("A1_r", d);
        if (g_cached) {
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = 0; b < d; ++b) {
                    g.at(a, b) += in.prob->A1.at(r, a) * w_row[b];
                }
            }
        } else {
            std::vector<double> scale(d, 0.0);
            for (std::size_t a = 0; a < d; ++a) {
                scale[a] = in.prob->A1.at(r, a);
            }
            add_outer_to_g_rows(sim, g, scale, w_row);
        }
        sim.evict("A1_r");
        sim.evict("W_r");
    }

    if (g_cached) {
        sim.store("g", dd);
        sim.evict("g");
    }
    return g;
}

Matrix phase2_key_column(CacheSim& sim, const LargeInputs& in) {
    const std::size_t n = in.prob->n;
    const std::size_t d = in.prob->d;
    const std::uint64_t dd = static_cast<std::uint64_t>(d) * d;
    Matrix g(d, d);
    init_g_in_memory(sim, dd);

    for (std::size_t c = 0; c < n; ++c) {
        sim.alloc("T_c", d);
        std::vector<double> t_col(d, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            sim.alloc("q1", 1);
            double q_val = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                sim.load("e1", 1);
                sim.load("e2", 1);
                q_val += in.prob->dO.at(r, k) * in.h->at(c, k);
                sim.evict("e1");
                sim.evict("e2");
            }

            sim.alloc("a1", 1);
            double a = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                sim.load("e1", 1);
                sim.load("e2", 1);
                a += in.S->at(r, k) * in.prob->A2.at(c, k);
                sim.evict("e1");
                sim.evict("e2");
            }
            check_score_guard(a);
            sim.load("l_el", 1);
            const double f = std::exp(a) / (*in.l)[r];
            sim.evict("l_el");

            sim.load("v_el", 1);
            sim.alloc("p1", 1);
            const double p_val = f * q_val - (*in.v)[r] * f;
            sim.evict("q1");
            sim.evict("a1");
            sim.evict("v_el");

            for (std::size_t t = 0; t < d; ++t) {
                sim.load("e1", 1);
                t_col[t] += in.prob->A1.at(r, t) * p_val;
                sim.evict("e1");
            }
            sim.evict("p1");
        }

        for (std::size_t b = 0; b < d; ++b) {
            sim.load("a2_el", 1);
            for (std::size_t t = 0; t < d; ++t) {
                sim.load("g_el", 1);
                g.at(t, b) += t_col[t] * in.prob->A2.at(c, b);
                sim.store("g_el", 1);
                sim.evict("g_el");
            }
            sim.evict("a2_el");
        }
        sim.evict("T_c");
    }
    return g;
}

}  // namespace

KernelResult backward_large_cache(const AttentionProblem& prob, const ForwardArtifacts& fwd,
                                  std::uint64_t M) {
    validate_problem(prob);
    const std::size_t n = prob.n;
    const std::size_t d = prob.d;
    if (fwd.l.size() != n || fwd.O.rows != n || fwd.O.cols != d) {
        throw DimensionMismatch("forward artifacts do not match the problem");
    }
    const std::uint64_t dd = static_cast<std::uint64_t>(d) * d;
    if (M < dd || M < large_cache_min_capacity(d)) {
        throw CacheTooSmall("panel kernel needs capacity " +
                            std::to_string(std::max(dd, large_cache_min_capacity(d))) + ", got " +
                            std::to_string(M));
    }

    const Phase2Plan plan = plan_large_phase2(n, d, M);
    CacheSim sim(M);

    // Phase 1: S and h as n x d arrays in memory.
    Matrix S(n, d);
    p1_product(sim, S, prob.A1, prob.X, M);
    Matrix h(n, d);
    p1_product(sim, h, prob.A3, prob.Y, M);

    // Diagnostic row sums v = (dO o O)*1, one scalar per row.
    std::vector<double> v(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        sim.load("v_dO", d);
        sim.load("v_O", d);
        sim.alloc("v_acc", 1);
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            acc += prob.dO.at(r, k) * fwd.O.at(r, k);
        }
        v[r] = acc;
        sim.store("v_acc", 1);
        sim.evict("v_dO");
        sim.evict("v_O");
        sim.evict("v_acc");
    }

    LargeInputs in{&prob, &S, &h, &fwd.l, &v};
    KernelResult result;
    switch (plan.variant) {
        case LargeVariant::KeyPanel:
            result.g = phase2_key_panel(sim, in, plan.Bc, plan.g_in_cache);
            break;
        case LargeVariant::QueryRow:
            result.g = phase2_query_row(sim, in, plan.g_in_cache);
            break;
        case LargeVariant::KeyColumn:
            result.g = phase2_key_column(sim, in);
            break;
    }
    result.io = sim.snapshot();
    return result;
}

IoCounter blocked_matmul_io(std::size_t n1, std::size_t d, std::size_t n2, std::uint64_t B,
                            std::uint64_t M) {
    CacheSim sim(M);
    Matrix a(n1, d);
    Matrix b(d, n2);
    Matrix out(n1, n2);
    sim_blocked_matmul(sim, out, {&a, false}, {&b, false}, B);
    return sim.snapshot();
}

}  // namespace attnio
