#include "attnio/pebble.hpp"

#include <string>

#include "attnio/errors.hpp"

namespace attnio {

PebbleDag build_matmul_dag(std::size_t n1, std::size_t d, std::size_t n2, std::size_t cap) {
    if (n1 == 0 || d == 0 || n2 == 0) {
        throw DimensionMismatch("matmul DAG dimensions must be positive");
    }
    const std::size_t total = n1 * d + d * n2 + n1 * n2 * (2 * d - 1);
    if (total > cap) {
        throw SizeLimit("matmul DAG would have " + std::to_string(total) + " nodes, cap is " +
                        std::to_string(cap));
    }

    PebbleDag dag;
    dag.n1 = n1;
    dag.d = d;
    dag.n2 = n2;
    dag.operands.assign(total, {});

    const std::size_t inputs = n1 * d + d * n2;
    for (std::size_t v = 0; v < inputs; ++v) {
        dag.input_nodes.push_back(v);
    }

    dag.products.resize(n1 * n2 * d);
    dag.sums_ready_after.assign(n1 * n2 * d, {});
    dag.entry_root.resize(n1 * n2);

    std::size_t next = inputs;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            const std::size_t entry = i * n2 + j;

            std::vector<std::size_t> level(d);
            for (std::size_t k = 0; k < d; ++k) {
                const std::size_t prod = next++;
                dag.operands[prod] = {dag.a_node(i, k), dag.b_node(k, j)};
                dag.products[entry * d + k] = prod;
                level[k] = prod;
            }

            // Pairwise balanced reduction; an odd trailing node is promoted.
            // parent/is_right drive the ready-after chains below.
            std::vector<std::size_t> parent(total, static_cast<std::size_t>(-1));
            std::vector<bool> is_right(total, false);
            while (level.size() > 1) {
                std::vector<std::size_t> above;
                for (std::size_t t = 0; t + 1 < level.size(); t += 2) {
                    const std::size_t sum = next++;
                    dag.operands[sum] = {level[t], level[t + 1]};
                    parent[level[t]] = sum;
                    parent[level[t + 1]] = sum;
                    is_right[level[t + 1]] = true;
                    above.push_back(sum);
                }
                if (level.size() % 2 == 1) {
                    above.push_back(level.back());
                }
                level = std::move(above);
            }
            dag.entry_root[entry] = level[0];

            // Leaves complete left to right, so a sum becomes computable the
            // moment its right child does.
            for (std::size_t k = 0; k < d; ++k) {
                std::size_t cur = dag.products[entry * d + k];
                while (parent[cur] != static_cast<std::size_t>(-1) && is_right[cur]) {
                    cur = parent[cur];
                    dag.sums_ready_after[entry * d + k].push_back(cur);
                }
            }
        }
    }

    dag.output_nodes = dag.entry_root;
    return dag;
}

GameState run_trace(const PebbleDag& dag, const std::vector<Move>& moves, std::uint64_t M) {
    const std::size_t total = dag.node_count();
    GameState st;
    st.red.assign(total, false);
    st.blue.assign(total, false);
    for (std::size_t v : dag.input_nodes) {
        st.blue[v] = true;
    }

    for (std::size_t idx = 0; idx < moves.size(); ++idx) {
        const Move& mv = moves[idx];
        if (mv.node >= total) {
            throw IllegalMove(idx, "unknown node " + std::to_string(mv.node));
        }
        switch (mv.kind) {
            case MoveKind::Input:
                if (!st.blue[mv.node]) {
                    throw IllegalMove(idx, "input of node " + std::to_string(mv.node) +
                                               " without a blue pebble");
                }
                if (st.red[mv.node]) {
                    throw IllegalMove(idx, "input of node " + std::to_string(mv.node) +
                                               " that is already red");
                }
                st.red[mv.node] = true;
                ++st.red_count;
                ++st.io;
                break;
            case MoveKind::Compute: {
                if (dag.operands[mv.node].empty()) {
                    throw IllegalMove(idx, "compute of input node " + std::to_string(mv.node));
                }
                if (st.red[mv.node]) {
                    throw IllegalMove(idx, "compute of node " + std::to_string(mv.node) +
                                               " that is already red");
                }
                for (std::size_t op : dag.operands[mv.node]) {
                    if (!st.red[op]) {
                        throw IllegalMove(idx, "compute of node " + std::to_string(mv.node) +
                                                   " with operand " + std::to_string(op) +
                                                   " not red");
                    }
                }
                st.red[mv.node] = true;
                ++st.red_count;
                break;
            }
            case MoveKind::Output:
                if (!st.red[mv.node]) {
                    throw IllegalMove(idx, "output of node " + std::to_string(mv.node) +
                                               " that is not red");
                }
                st.blue[mv.node] = true;
                ++st.io;
                break;
            case MoveKind::Delete:
                if (!st.red[mv.node]) {
                    throw IllegalMove(idx, "delete of node " + std::to_string(mv.node) +
                                               " that is not red");
                }
                st.red[mv.node] = false;
                --st.red_count;
                break;
        }
        if (st.red_count > M) {
            throw IllegalMove(idx, "red budget exceeded: " + std::to_string(st.red_count) +
                                       " of " + std::to_string(M));
        }
        st.peak_red = std::max(st.peak_red, st.red_count);
    }

    for (std::size_t v : dag.output_nodes) {
        if (!st.blue[v]) {
            throw IncompleteGame("output node " + std::to_string(v) + " has no blue pebble");
        }
    }
    return st;
}

std::uint64_t validate_trace(const PebbleDag& dag, const std::vector<Move>& moves,
                             std::uint64_t M) {
    return run_trace(dag, moves, M).io;
}

std::vector<Move> lower_blocked_matmul_trace(std::size_t n1, std::size_t d, std::size_t n2,
                                             std::uint64_t B, std::uint64_t M) {
    if (B == 0) {
        throw std::invalid_argument("tile size must be positive");
    }
    if (4 * B * B > M) {
        throw CacheTooSmall("tile size " + std::to_string(B) + " needs a red budget of at least " +
                            std::to_string(4 * B * B) + ", got " + std::to_string(M));
    }
    const PebbleDag dag = build_matmul_dag(n1, d, n2);
    std::vector<Move> moves;

    const std::size_t bi_n = block_count(n1, B);
    const std::size_t bj_n = block_count(n2, B);
    const std::size_t bk_n = block_count(d, B);

    for (std::size_t ib = 0; ib < bi_n; ++ib) {
        const BlockRange ri = block_range(n1, B, ib);
        for (std::size_t jb = 0; jb < bj_n; ++jb) {
            const BlockRange rj = block_range(n2, B, jb);
            for (std::size_t kb = 0; kb < bk_n; ++kb) {
                const BlockRange rk = block_range(d, B, kb);
                for (std::size_t i = 0; i < ri.count; ++i) {
                    for (std::size_t k = 0; k < rk.count; ++k) {
                        moves.push_back({MoveKind::Input, dag.a_node(ri.begin + i, rk.begin + k)});
                    }
                }
                for (std::size_t k = 0; k < rk.count; ++k) {
                    for (std::size_t j = 0; j < rj.count; ++j) {
                        moves.push_back({MoveKind::Input, dag.b_node(rk.begin + k, rj.begin + j)});
                    }
                }

                // The last entry's merges run after the operand tiles are
                // deleted, which keeps the B = 1 working set at 4 pebbles.
                auto merge_chain = [&](std::size_t kk) {
                    for (std::size_t sum : dag.sums_ready_after[kk]) {
                        moves.push_back({MoveKind::Compute, sum});
                        moves.push_back({MoveKind::Delete, dag.operands[sum][0]});
                        moves.push_back({MoveKind::Delete, dag.operands[sum][1]});
                    }
                };
                auto delete_tiles = [&]() {
                    for (std::size_t i = 0; i < ri.count; ++i) {
                        for (std::size_t k = 0; k < rk.count; ++k) {
                            moves.push_back(
                                {MoveKind::Delete, dag.a_node(ri.begin + i, rk.begin + k)});
                        }
                    }
                    for (std::size_t k = 0; k < rk.count; ++k) {
                        for (std::size_t j = 0; j < rj.count; ++j) {
                            moves.push_back(
                                {MoveKind::Delete, dag.b_node(rk.begin + k, rj.begin + j)});
                        }
                    }
                };

                for (std::size_t i = 0; i < ri.count; ++i) {
                    for (std::size_t j = 0; j < rj.count; ++j) {
                        const std::size_t entry = (ri.begin + i) * n2 + (rj.begin + j);
                        const bool last = i + 1 == ri.count && j + 1 == rj.count;
                        for (std::size_t k = 0; k < rk.count; ++k) {
                            const std::size_t kk = entry * d + (rk.begin + k);
                            moves.push_back({MoveKind::Compute, dag.products[kk]});
                            if (!last) {
                                merge_chain(kk);
                            }
                        }
                        if (last) {
                            delete_tiles();
                            for (std::size_t k = 0; k < rk.count; ++k) {
                                merge_chain(entry * d + (rk.begin + k));
                            }
                        }
                    }
                }
            }

            for (std::size_t i = 0; i < ri.count; ++i) {
                for (std::size_t j = 0; j < rj.count; ++j) {
                    const std::size_t root = dag.entry_root[(ri.begin + i) * n2 + (rj.begin + j)];
                    moves.push_back({MoveKind::Output, root});
                    moves.push_back({MoveKind::Delete, root});
                }
            }
        }
    }
    return moves;
}

}  // namespace attnio
