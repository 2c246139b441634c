#pragma once

#include <cstdint>
#include <vector>

#include "attnio/cache_sim.hpp"
#include "attnio/matrix.hpp"

namespace attnio {

enum class MoveKind { Input, Output, Compute, Delete };

/** One red-blue pebble move on a DAG node. */
struct Move {
    MoveKind kind;
    std::size_t node;
};

/**
 * Computation DAG of the product (n1 x d) * (d x n2): one node per input
 * entry, one per scalar product, and a balanced pairwise summation tree per
 * output entry (odd nodes promoted unchanged). Edges run from operands to
 * results; operands[v] lists what a Compute of v needs red.
 */
struct PebbleDag {
    std::size_t n1 = 0, d = 0, n2 = 0;
    std::vector<std::vector<std::size_t>> operands;
    std::vector<std::size_t> input_nodes;
    std::vector<std::size_t> output_nodes;

    std::size_t node_count() const { return operands.size(); }
    std::size_t a_node(std::size_t i, std::size_t k) const { return i * d + k; }
    std::size_t b_node(std::size_t k, std::size_t j) const { return n1 * d + k * n2 + j; }

    /** Product node for output entry (i,j) and inner index k. */
    std::size_t product_node(std::size_t i, std::size_t j, std::size_t k) const {
        return products[(i * n2 + j) * d + k];
    }

    // Lowering metadata: per entry, the product ids, the sums that become
    // computable right after each product (bottom-up), and the tree root.
    std::vector<std::size_t> products;
    std::vector<std::vector<std::size_t>> sums_ready_after;
    std::vector<std::size_t> entry_root;
};

/** Builds the DAG; throws SizeLimit when the node count exceeds cap. */
PebbleDag build_matmul_dag(std::size_t n1, std::size_t d, std::size_t n2,
                           std::size_t cap = 4096);

/** Pebble positions and counters after running a trace. */
struct GameState {
    std::vector<bool> red;
    std::vector<bool> blue;
    std::uint64_t red_count = 0;
    std::uint64_t peak_red = 0;
    std::uint64_t io = 0;
};

/**
 * Plays the trace move by move: Input needs blue and places red, Compute
 * needs every operand red and places red, Output needs red and places blue,
 * Delete removes red. The red count is checked against M after every move.
 * Throws IllegalMove (with the move index) on any violation and
 * IncompleteGame when the final state lacks blue on some output.
 */
GameState run_trace(const PebbleDag& dag, const std::vector<Move>& moves, std::uint64_t M);

/** run_trace, returning only the Input+Output count. */
std::uint64_t validate_trace(const PebbleDag& dag, const std::vector<Move>& moves,
                             std::uint64_t M);

/**
 * Trace of the B x B blocked product schedule: per output tile, inputs of
 * both operand tiles for each inner block, products and greedy summation-tree
 * merges per accumulator entry, operand deletes at block end, and one Output
 * per finished entry. Requires 4*B*B <= M, else CacheTooSmall. Its
 * Input+Output count equals blocked_matmul_io for the same (n1, d, n2, B)
 * exactly.
 */
std::vector<Move> lower_blocked_matmul_trace(std::size_t n1, std::size_t d, std::size_t n2,
                                             std::uint64_t B, std::uint64_t M);

}  // namespace attnio
