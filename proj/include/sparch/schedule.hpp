#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <random>
#include <vector>

#include "sparch/csr.hpp"

namespace sparch {

struct NodeWeight {
    std::uint64_t node = 0;
    std::uint64_t weight = 0;
};

// One merge round: `inputs` (leaf ids or earlier outputs) are merged into
// node `output`. output_weight is the no-collision size estimate (sum of
// input weights); actual merged streams can only be smaller.
struct MergeRound {
    std::vector<std::uint64_t> inputs;
    std::uint64_t output = 0;
    std::uint64_t output_weight = 0;
};

struct MergePlan {
    std::uint64_t num_leaves = 0;
    std::uint32_t way = 2;
    std::vector<MergeRound> rounds;
};

// First-round input count that makes every later round use the full merger
// width, so no round is left ragged at the end.
inline std::uint32_t k_init(std::uint64_t num_condensed_col, std::uint32_t merger_way) {
    if (num_condensed_col < 2)
        throw ContractViolation("k_init: need at least two columns to merge");
    if (merger_way < 2) throw ContractViolation("k_init: merger way must be >= 2");
    return static_cast<std::uint32_t>((num_condensed_col - 2) % (merger_way - 1)) + 2;
}

// Weight of condensed column j: total size of the partial matrix it
// multiplies into, i.e. the sum over rows r with more than j entries of
// nnz(b row a.col_idx[row_ptr[r] + j]).
inline std::vector<NodeWeight> leaf_weights(const CsrMatrix& a, const CsrMatrix& b) {
    if (a.num_cols != b.num_rows)
        throw ContractViolation("leaf_weights: inner dimensions must match");
    std::vector<NodeWeight> w(max_row_nnz(a));
    for (std::size_t j = 0; j < w.size(); ++j) w[j].node = j;
    for (std::uint32_t r = 0; r < a.num_rows; ++r)
        for (std::uint64_t i = a.row_ptr[r]; i < a.row_ptr[r + 1]; ++i)
            w[i - a.row_ptr[r]].weight += b.row_nnz(a.col_idx[i]);
    return w;
}

inline std::uint64_t plan_cost(const MergePlan& plan) {
    std::uint64_t cost = 0;
    for (const MergeRound& r : plan.rounds) cost += r.output_weight;
    return cost;
}

namespace detail {

struct HeapEntry {
    std::uint64_t weight;
    std::uint64_t node;
    // min-heap on weight, ties broken toward the smaller node id
    friend bool operator>(const HeapEntry& x, const HeapEntry& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        return x.node > y.node;
    }
};

}  // namespace detail

// Huffman-style plan: each round merges the k lightest available nodes
// (k_init in the first round, the full way afterwards), minimising the sum
// of internal node weights and hence the partial-result traffic.
inline MergePlan huffman_schedule(const std::vector<NodeWeight>& weights, std::uint32_t way) {
    MergePlan plan;
    plan.num_leaves = weights.size();
    plan.way = way;
    if (weights.size() <= 1) return plan;  // zero or one leaf: nothing to merge

    std::priority_queue<detail::HeapEntry, std::vector<detail::HeapEntry>, std::greater<>> heap;
    for (const NodeWeight& w : weights) heap.push({w.weight, w.node});
    std::uint64_t next_id = weights.size();
    std::uint32_t take = k_init(weights.size(), way);
    while (heap.size() > 1) {
        MergeRound round;
        round.output = next_id++;
        for (std::uint32_t i = 0; i < take && !heap.empty(); ++i) {
            round.inputs.push_back(heap.top().node);
            round.output_weight += heap.top().weight;
            heap.pop();
        }
        heap.push({round.output_weight, round.output});
        plan.rounds.push_back(std::move(round));
        take = way;
    }
    return plan;
}

// Baseline: consume leaves in index order, folding the running partial
// result into every round after the first.
inline MergePlan sequential_schedule(const std::vector<NodeWeight>& weights, std::uint32_t way) {
    MergePlan plan;
    plan.num_leaves = weights.size();
    plan.way = way;
    if (weights.size() <= 1) return plan;

    std::uint64_t next_id = weights.size();
    std::uint32_t take = k_init(weights.size(), way);
    std::size_t cursor = 0;
    std::uint64_t running = 0, running_weight = 0;
    bool have_running = false;
    while (cursor < weights.size()) {
        MergeRound round;
        round.output = next_id++;
        if (have_running) {
            round.inputs.push_back(running);
            round.output_weight += running_weight;
        }
        while (round.inputs.size() < take && cursor < weights.size()) {
            round.inputs.push_back(weights[cursor].node);
            round.output_weight += weights[cursor].weight;
            ++cursor;
        }
        running = round.output;
        running_weight = round.output_weight;
        have_running = true;
        plan.rounds.push_back(std::move(round));
        take = way;
    }
    return plan;
}

// Baseline: uniformly random eligible choice each round (deterministic for
// a fixed seed); same round-size structure as the other schedulers.
inline MergePlan random_schedule(const std::vector<NodeWeight>& weights, std::uint32_t way,
                                 std::uint64_t seed) {
    MergePlan plan;
    plan.num_leaves = weights.size();
    plan.way = way;
    if (weights.size() <= 1) return plan;

    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pool;  // (node, weight)
    pool.reserve(weights.size());
    for (const NodeWeight& w : weights) pool.emplace_back(w.node, w.weight);
    std::uint64_t next_id = weights.size();
    std::uint32_t take = k_init(weights.size(), way);
    while (pool.size() > 1) {
        MergeRound round;
        round.output = next_id++;
        for (std::uint32_t i = 0; i < take && !pool.empty(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            std::size_t at = pick(rng);
            round.inputs.push_back(pool[at].first);
            round.output_weight += pool[at].second;
            pool[at] = pool.back();
            pool.pop_back();
        }
        pool.emplace_back(round.output, round.output_weight);
        plan.rounds.push_back(std::move(round));
        take = way;
    }
    return plan;
}

// Structural checks: every node consumed at most once, every round input
// exists (leaf or earlier output), rounds after the first use the full
// way, and exactly one node (the last output) remains unconsumed.
inline void validate_plan(const MergePlan& plan) {
    if (plan.way < 2) throw ContractViolation("plan: way must be >= 2");
    if (plan.num_leaves <= 1) {
        if (!plan.rounds.empty()) throw ContractViolation("plan: trivial input needs empty plan");
        return;
    }
    std::vector<std::uint8_t> available(plan.num_leaves + plan.rounds.size(), 0);
    for (std::uint64_t i = 0; i < plan.num_leaves; ++i) available[i] = 1;
    std::uint64_t next_id = plan.num_leaves;
    std::size_t consumed = 0;
    for (std::size_t r = 0; r < plan.rounds.size(); ++r) {
        const MergeRound& round = plan.rounds[r];
        if (round.output != next_id++) throw ContractViolation("plan: outputs must be dense ids");
        std::uint32_t expected = r == 0 ? k_init(plan.num_leaves, plan.way) : plan.way;
        if (round.inputs.size() != expected)
            throw ContractViolation("plan: wrong round size at round " + std::to_string(r));
        for (std::uint64_t id : round.inputs) {
            if (id >= round.output || !available[id])
                throw ContractViolation("plan: input not available at round " + std::to_string(r));
            available[id] = 0;
            ++consumed;
        }
        available[round.output] = 1;
    }
    if (consumed != plan.num_leaves + plan.rounds.size() - 1)
        throw ContractViolation("plan: must consume everything except the final root");
}

}  // namespace sparch
