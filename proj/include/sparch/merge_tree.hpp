#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "sparch/coo.hpp"
#include "sparch/csr.hpp"
#include "sparch/merger.hpp"

namespace sparch {

struct TreeConfig {
    std::uint32_t layers = 6;       // 2^layers leaf ports
    std::uint32_t fifo_depth = 64;  // per-node FIFO bound, >= 2x merger window
    MergerGeometry geometry = MergerGeometry::two_level(4, 4);
};

// Accumulates a key-sorted element stream, folding equal-key neighbours by
// summing into the already-emitted element (the final duplicate fold for
// streams leaving the tree's root).
struct FoldingSink {
    std::vector<CooElement> out;
    std::uint64_t adds = 0;
    void push(const CooElement& e) {
        if (!out.empty() && out.back().key == e.key) {
            out.back().value += e.value;
            ++adds;
        } else {
            out.push_back(e);
        }
    }
};

// Full binary tree of bounded FIFOs with one shared merger per layer.
// Each tick, every layer performs at most one merge step on one eligible
// child pair (chosen round-robin); all pops/pushes computed against the
// pre-tick state and applied atomically at the end of the tick. Equal-key
// neighbours are folded where they meet; any duplicate that straddles a
// consumed FIFO tail re-converges upstream and is folded at the latest by
// the root drain (FoldingSink).
class MergeTree {
  public:
    explicit MergeTree(TreeConfig cfg) : cfg_(cfg) {
        if (cfg_.layers < 1 || cfg_.layers > 8)
            throw ContractViolation("merge tree: layers must be in [1, 8]");
        // A node must hold one full output window while accepting another,
        // or a mid-stream residue shorter than a window can neither grow
        // (no room for a worst-case step) nor drain (not ready): deadlock.
        if (cfg_.fifo_depth < 2 * cfg_.geometry.window_n)
            throw ContractViolation("merge tree: FIFO depth must double-buffer the merger window");
        nodes_.resize((std::size_t{2} << cfg_.layers) - 1);
        rr_.assign(cfg_.layers, 0);
    }

    std::uint32_t num_ports() const { return 1u << cfg_.layers; }
    std::size_t node_count() const { return nodes_.size(); }
    const TreeConfig& config() const { return cfg_; }

    std::size_t port_free(std::uint32_t port) const {
        return cfg_.fifo_depth - nodes_[leaf_index(port)].fifo.size();
    }
    bool port_ended(std::uint32_t port) const { return nodes_[leaf_index(port)].ended; }

    // External fill, applied between ticks. Returns false when the leaf
    // FIFO is full.
    bool offer(std::uint32_t port, const CooElement& e) {
        Node& n = nodes_[leaf_index(port)];
        if (n.ended) throw ContractViolation("merge tree: offer on ended port");
        if (n.fifo.size() >= cfg_.fifo_depth) return false;
        push_checked(n, e);
        return true;
    }

    void set_port_ended(std::uint32_t port) { nodes_[leaf_index(port)].ended = true; }

    std::size_t root_size() const { return nodes_[0].fifo.size(); }
    CooElement pop_root() {
        Node& n = nodes_[0];
        if (n.fifo.empty()) throw ContractViolation("merge tree: pop from empty root");
        CooElement e = n.fifo.front();
        n.fifo.pop_front();
        return e;
    }

    bool done() const { return nodes_[0].ended && nodes_[0].fifo.empty(); }

    std::uint64_t adds() const { return adds_; }
    std::uint64_t merge_steps() const { return merge_steps_; }

    void tick() {
        struct Action {
            std::size_t parent;
            MergeStepResult step;
        };
        std::vector<Action> actions;
        actions.reserve(cfg_.layers);
        const std::uint32_t n = cfg_.geometry.window_n;

        for (std::uint32_t layer = 0; layer < cfg_.layers; ++layer) {
            std::size_t first = (std::size_t{1} << layer) - 1;
            std::size_t count = std::size_t{1} << layer;
            for (std::size_t k = 0; k < count; ++k) {
                std::size_t p = first + (rr_[layer] + k) % count;
                Node& parent = nodes_[p];
                if (parent.ended) continue;
                Node& l = nodes_[2 * p + 1];
                Node& r = nodes_[2 * p + 2];
                bool ready_l = l.fifo.size() >= n || l.ended;
                bool ready_r = r.fifo.size() >= n || r.ended;
                std::size_t avail = l.fifo.size() + r.fifo.size();
                if (!ready_l || !ready_r || avail == 0) continue;
                std::size_t commit = std::min<std::size_t>(n, avail);
                if (cfg_.fifo_depth - parent.fifo.size() < commit) continue;
                std::vector<CooElement> wa(l.fifo.begin(),
                                           l.fifo.begin() + std::min<std::size_t>(n, l.fifo.size()));
                std::vector<CooElement> wb(r.fifo.begin(),
                                           r.fifo.begin() + std::min<std::size_t>(n, r.fifo.size()));
                actions.push_back({p, merge_step(wa, wb, cfg_.geometry)});
                rr_[layer] = (p - first + 1) % count;
                break;
            }
        }

        for (Action& act : actions) {
            Node& parent = nodes_[act.parent];
            Node& l = nodes_[2 * act.parent + 1];
            Node& r = nodes_[2 * act.parent + 2];
            for (std::uint32_t i = 0; i < act.step.take_a; ++i) l.fifo.pop_front();
            for (std::uint32_t i = 0; i < act.step.take_b; ++i) r.fifo.pop_front();
            ++merge_steps_;
            // Fold equal keys inside the committed block, then against the
            // surviving parent tail.
            for (std::size_t i = 0; i < act.step.committed.size(); ++i) {
                const CooElement& e = act.step.committed[i];
                if (!parent.fifo.empty() && parent.fifo.back().key == e.key) {
                    parent.fifo.back().value += e.value;
                    ++adds_;
                } else {
                    push_checked(parent, e);
                }
            }
            if (parent.fifo.size() > cfg_.fifo_depth)
                throw ContractViolation("merge tree: FIFO overflow");
        }

        // Propagate end-of-stream from drained children (deepest first so a
        // chain of empty nodes settles in one tick).
        for (std::size_t p = (node_count() - 1) / 2; p-- > 0;) propagate_end(p);
        propagate_end_root();
    }

  private:
    struct Node {
        std::deque<CooElement> fifo;
        bool ended = false;  // no further input will ever arrive
        std::uint64_t last_key = 0;
        bool any_pushed = false;
    };

    std::size_t leaf_index(std::uint32_t port) const {
        if (port >= num_ports()) throw ContractViolation("merge tree: port out of range");
        return (std::size_t{1} << cfg_.layers) - 1 + port;
    }

    void push_checked(Node& n, const CooElement& e) {
        if (n.any_pushed && e.key < n.last_key)
            throw ContractViolation("merge tree: unsorted push into FIFO");
        n.fifo.push_back(e);
        n.last_key = e.key;
        n.any_pushed = true;
    }

    void propagate_end(std::size_t p) {
        Node& parent = nodes_[p];
        if (parent.ended) return;
        const Node& l = nodes_[2 * p + 1];
        const Node& r = nodes_[2 * p + 2];
        if (l.ended && r.ended && l.fifo.empty() && r.fifo.empty()) parent.ended = true;
    }
    void propagate_end_root() { propagate_end(0); }

    TreeConfig cfg_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> rr_;  // per-layer round-robin cursor
    std::uint64_t adds_ = 0;
    std::uint64_t merge_steps_ = 0;
};

struct MergeArraysResult {
    std::vector<CooElement> merged;
    std::uint64_t cycles = 0;
    std::uint64_t adds = 0;
};

// Feeds k key-sorted arrays into the leaf ports (unused ports see empty,
// already-ended streams) and ticks until the root drains.
inline MergeArraysResult merge_arrays(std::span<const std::vector<CooElement>> arrays,
                                      const TreeConfig& cfg) {
    MergeTree tree(cfg);
    if (arrays.size() > tree.num_ports())
        throw ContractViolation("merge_arrays: more input arrays than leaf ports");

    std::size_t total = 0;
    for (const auto& arr : arrays) {
        for (std::size_t i = 1; i < arr.size(); ++i)
            if (arr[i].key < arr[i - 1].key)
                throw ContractViolation("merge_arrays: input array not key-sorted");
        total += arr.size();
    }

    std::vector<std::size_t> cursor(arrays.size(), 0);
    for (std::uint32_t p = 0; p < tree.num_ports(); ++p)
        if (p >= arrays.size() || arrays[p].empty()) tree.set_port_ended(p);

    FoldingSink sink;
    sink.out.reserve(total);
    MergeArraysResult res;
    const std::uint64_t guard = 8 * (static_cast<std::uint64_t>(total) + tree.node_count() + 16);
    while (!tree.done()) {
        for (std::size_t p = 0; p < arrays.size(); ++p) {
            if (tree.port_ended(static_cast<std::uint32_t>(p))) continue;
            while (cursor[p] < arrays[p].size() &&
                   tree.offer(static_cast<std::uint32_t>(p), arrays[p][cursor[p]]))
                ++cursor[p];
            if (cursor[p] == arrays[p].size()) tree.set_port_ended(static_cast<std::uint32_t>(p));
        }
        tree.tick();
        ++res.cycles;
        while (tree.root_size() > 0) sink.push(tree.pop_root());
        if (res.cycles > guard) throw ContractViolation("merge_arrays: tree stalled");
    }
    res.adds = tree.adds() + sink.adds;
    res.merged = std::move(sink.out);
    return res;
}

}  // namespace sparch
