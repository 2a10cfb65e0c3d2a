#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "sparch/analysis.hpp"
#include "sparch/csr.hpp"
#include "sparch/dram.hpp"
#include "sparch/hw_config.hpp"
#include "sparch/merge_tree.hpp"
#include "sparch/prefetch.hpp"
#include "sparch/reference.hpp"
#include "sparch/schedule.hpp"

namespace sparch {

struct SimStats {
    std::uint64_t cycles = 0;
    double seconds = 0;
    double gflops = 0;
    TrafficCounters traffic;
    std::uint64_t multiplies = 0;
    std::uint64_t adds = 0;
    std::uint64_t partial_matrices = 0;  // streams produced by the multiplier stage
    std::uint64_t rounds = 0;
    std::optional<double> hit_rate;  // empty when the buffer saw no accesses
    double bandwidth_utilization = 0;
    std::uint64_t result_nnz = 0;
};

// Per-round byte/cycle ledger, in execution order.
struct RoundTraffic {
    std::uint64_t round_index = 0;
    std::uint64_t left_bytes_read = 0;
    std::uint64_t right_bytes_read = 0;
    std::uint64_t partial_bytes_read = 0;
    std::uint64_t partial_bytes_written = 0;
    std::uint64_t final_bytes_written = 0;
    std::uint64_t cycles = 0;
};

struct SimResult {
    CsrMatrix result;
    MergePlan plan;
    SimStats stats;
    std::vector<RoundTraffic> round_traffic;
};

namespace detail {

// One left-matrix element routed to a multiplier port: it multiplies the
// whole right-matrix row `b_row`, producing results in output row `out_row`.
struct LeafElem {
    std::uint32_t out_row;
    std::uint32_t b_row;
    double value;
};
using LeafStream = std::vector<LeafElem>;

// With condensing on, stream j holds the j-th nonzero of every left row
// (rows ascending). Off, each non-empty original column becomes a stream.
// Either way the product keys within one stream are strictly increasing.
inline std::vector<LeafStream> build_leaf_streams(const CsrMatrix& a, bool condense) {
    std::vector<LeafStream> streams;
    if (condense) {
        streams.resize(max_row_nnz(a));
        for (std::uint32_t r = 0; r < a.num_rows; ++r)
            for (std::uint64_t i = a.row_ptr[r]; i < a.row_ptr[r + 1]; ++i)
                streams[i - a.row_ptr[r]].push_back({r, a.col_idx[i], a.values[i]});
    } else {
        CscIndex csc = build_csc(a);
        for (std::uint32_t c = 0; c < a.num_cols; ++c) {
            if (csc.col_ptr[c] == csc.col_ptr[c + 1]) continue;
            LeafStream s;
            s.reserve(csc.col_ptr[c + 1] - csc.col_ptr[c]);
            for (std::uint64_t i = csc.col_ptr[c]; i < csc.col_ptr[c + 1]; ++i)
                s.push_back({csc.row_idx[i], c, csc.values[i]});
            streams.push_back(std::move(s));
        }
    }
    return streams;
}

// Size estimate per stream: products it will emit (collisions ignored).
inline std::vector<NodeWeight> stream_weights(const std::vector<LeafStream>& streams,
                                              const CsrMatrix& b) {
    std::vector<NodeWeight> w(streams.size());
    for (std::size_t i = 0; i < streams.size(); ++i) {
        w[i].node = i;
        for (const LeafElem& e : streams[i]) w[i].weight += b.row_nnz(e.b_row);
    }
    return w;
}

class Engine {
  public:
    Engine(const CsrMatrix& a, const CsrMatrix& b, const HardwareConfig& hw,
           const AblationFlags& flags)
        : a_(a), b_(b), hw_(hw), flags_(flags), dram_(hw.dram), buffer_(hw.buffer) {
        hw_.validate();
        if (a_.num_cols != b_.num_rows)
            throw ContractViolation("spgemm: inner dimensions must match");
    }

    SimResult run(const MergePlan& plan) {
        streams_ = build_leaf_streams(a_, flags_.condense);
        validate_plan(plan);
        if (plan.num_leaves != streams_.size())
            throw ContractViolation("plan leaf count does not match the matrix");
        for (const MergeRound& r : plan.rounds)
            if (r.inputs.size() > (std::size_t{1} << hw_.tree_layers))
                throw ContractViolation("merge round is wider than the tree");

        SimResult res;
        res.plan = plan;

        std::vector<CooElement> final_stream;
        if (!streams_.empty()) {
            // Row-extent arrays are read once to set up streaming.
            traffic_.add_read(TrafficCategory::LeftMatrix, 4ull * (a_.num_rows + 1));
            traffic_.add_read(TrafficCategory::RightMatrix, 4ull * (b_.num_rows + 1));
            if (plan.rounds.empty()) {
                // One stream: it passes through the tree unmerged.
                final_stream = run_round(res, {0}, true);
            } else {
                for (std::size_t r = 0; r < plan.rounds.size(); ++r) {
                    const MergeRound& round = plan.rounds[r];
                    bool is_final = r + 1 == plan.rounds.size();
                    std::vector<CooElement> out = run_round(res, round.inputs, is_final);
                    if (is_final)
                        final_stream = std::move(out);
                    else
                        stored_[round.output] = std::move(out);
                }
            }
        }
        res.result = csr_from_sorted_coo(a_.num_rows, b_.num_cols, final_stream);

        SimStats& st = res.stats;
        st.cycles = cycles_;
        st.seconds = static_cast<double>(cycles_) / (hw_.clock_ghz * 1e9);
        st.traffic = traffic_;
        st.multiplies = multiplies_;
        st.adds = adds_;
        st.partial_matrices = streams_.size();
        st.rounds = res.round_traffic.size();
        st.hit_rate = hit_rate(traffic_);
        st.result_nnz = res.result.nnz();
        if (cycles_ > 0) {
            st.gflops = static_cast<double>(count_flops(a_, b_)) / st.seconds / 1e9;
            st.bandwidth_utilization =
                static_cast<double>(traffic_.total()) /
                (static_cast<double>(cycles_) * hw_.dram.aggregate_bytes_per_cycle());
        }
        return res;
    }

  private:
    struct PortState {
        const LeafStream* leaf = nullptr;      // set for multiplier ports
        std::vector<std::uint64_t> next_use;   // per leaf element, next same-row ordinal
        std::vector<CooElement> partial;       // set for partial-matrix ports
        std::size_t cursor = 0;                // next element to fetch / refill
        bool busy = false;                     // a left element is in flight
        std::uint32_t job_row = 0;
        double job_value = 0;
        std::uint64_t job_pos = 0;
        std::uint64_t job_end = 0;
        std::uint64_t ready_at = 0;            // cycle its right-row data arrives
        bool ended = false;
    };

    static std::uint64_t ceil_div(std::uint64_t n, std::uint64_t d) { return (n + d - 1) / d; }

    // The per-cycle loop models the engine pipeline; afterwards the round is
    // stretched to the DRAM floor: cycles = max(loop, total bytes / aggregate
    // bandwidth, busiest channel) plus one access latency of startup.
    std::vector<CooElement> run_round(SimResult& res, const std::vector<std::uint64_t>& inputs,
                                      bool is_final) {
        MergeTree tree(TreeConfig{hw_.tree_layers, hw_.fifo_depth, hw_.merger});
        for (std::uint32_t pi = static_cast<std::uint32_t>(inputs.size()); pi < tree.num_ports();
             ++pi)
            tree.set_port_ended(pi);

        std::vector<PortState> ports(inputs.size());
        std::uint64_t a_elems = 0, products = 0, partial_elems = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            std::uint64_t id = inputs[i];
            if (id < streams_.size()) {
                ports[i].leaf = &streams_[id];
                a_elems += ports[i].leaf->size();
                for (const LeafElem& e : *ports[i].leaf) products += b_.row_nnz(e.b_row);
            } else {
                auto it = stored_.find(id);
                if (it == stored_.end())
                    throw ContractViolation("round consumes a stream that was never produced");
                ports[i].partial = std::move(it->second);
                partial_elems += ports[i].partial.size();
                stored_.erase(it);
            }
        }

        // Canonical access order for look-ahead: the ports' left elements
        // interleaved round-robin by position.
        std::size_t max_len = 0;
        for (const PortState& p : ports)
            if (p.leaf) max_len = std::max(max_len, p.leaf->size());
        std::vector<std::uint32_t> trace;
        trace.reserve(a_elems);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> owner;
        owner.reserve(a_elems);
        for (std::size_t pos = 0; pos < max_len; ++pos)
            for (std::size_t pi = 0; pi < ports.size(); ++pi)
                if (ports[pi].leaf && pos < ports[pi].leaf->size()) {
                    trace.push_back((*ports[pi].leaf)[pos].b_row);
                    owner.emplace_back(static_cast<std::uint32_t>(pi),
                                       static_cast<std::uint32_t>(pos));
                }
        std::vector<std::uint64_t> nu = next_use_distances(trace, hw_.lookahead_elements);
        for (PortState& p : ports)
            if (p.leaf) p.next_use.resize(p.leaf->size());
        for (std::size_t t = 0; t < owner.size(); ++t)
            ports[owner[t].first].next_use[owner[t].second] = nu[t];

        TrafficCounters before = traffic_;
        std::vector<std::uint64_t> busy_before(hw_.dram.channels);
        for (std::uint32_t ch = 0; ch < hw_.dram.channels; ++ch)
            busy_before[ch] = dram_.busy_cycles(ch);

        FoldingSink sink;
        std::deque<CooElement> writer;
        const std::uint64_t writer_cap = hw_.writer_fifo_elements;
        const std::uint32_t flush_rate = std::max<std::uint32_t>(1, hw_.merger.window_n);
        const std::uint64_t line_bytes = hw_.buffer.line_bytes();

        // Generous progress bound: element moves through the tree plus the
        // worst-case serialized DRAM backlog. Exceeding it means a livelock.
        const std::uint64_t work = a_elems + products + partial_elems + 16;
        const std::uint64_t line_upper =
            a_elems + products / std::max<std::uint32_t>(1, hw_.buffer.elements_per_line) + 1;
        const std::uint64_t hard_cap = 4096 + 2ull * hw_.dram.latency_cycles +
                                       work * (hw_.tree_layers + 6) +
                                       line_upper * line_bytes / hw_.dram.bytes_per_cycle_per_channel;
        const std::uint64_t idle_limit = tree.node_count() + hw_.fifo_depth + 64;

        std::uint64_t loop_cycles = 0;
        std::uint64_t idle_cycles = 0;

        while (!(tree.done() && writer.empty())) {
            std::uint64_t events = 0;

            // Result writer: drain up to flush_rate queued elements. The
            // writeback adder folds an equal key into the element still in
            // its buffer, so only keys that displace it reach memory.
            for (std::uint32_t f = 0; f < flush_rate && !writer.empty(); ++f) {
                const std::size_t stored_before = sink.out.size();
                sink.push(writer.front());
                writer.pop_front();
                if (!is_final && sink.out.size() > stored_before)
                    traffic_.add_write(TrafficCategory::PartialResults, 16);
                ++events;
            }
            while (tree.root_size() > 0 && writer.size() < writer_cap) {
                writer.push_back(tree.pop_root());
                ++events;
            }

            // A fetcher is occupied while a right row is in flight from memory;
            // ports beyond that budget wait their turn to issue.
            const std::uint64_t fetch_now = loop_cycles_base_ + loop_cycles;
            std::uint32_t fetching = 0;
            for (const PortState& p : ports)
                if (p.leaf && p.busy && p.ready_at > fetch_now) ++fetching;
            for (std::size_t pi = 0; pi < ports.size(); ++pi) {
                PortState& p = ports[pi];
                if (p.leaf) {
                    if (!p.busy && p.cursor < p.leaf->size() && fetching < hw_.column_fetchers) {
                        const LeafElem& e = (*p.leaf)[p.cursor];
                        traffic_.add_read(TrafficCategory::LeftMatrix, 12);
                        start_job(p, e, fetch_now, line_bytes);
                        p.cursor++;
                        if (p.busy && p.ready_at > fetch_now) ++fetching;
                        ++events;
                    }
                    if (!p.busy && p.cursor == p.leaf->size() && !p.ended) {
                        tree.set_port_ended(static_cast<std::uint32_t>(pi));
                        p.ended = true;
                    }
                } else {
                    // Partial streams refill their FIFO as far as it allows.
                    while (p.cursor < p.partial.size() &&
                           tree.offer(static_cast<std::uint32_t>(pi), p.partial[p.cursor])) {
                        traffic_.add_read(TrafficCategory::PartialResults, 16);
                        p.cursor++;
                        ++events;
                    }
                    if (p.cursor == p.partial.size() && !p.ended) {
                        tree.set_port_ended(static_cast<std::uint32_t>(pi));
                        p.ended = true;
                    }
                }
            }

            // Multiplier arbitration: each of the slots goes to the ready
            // port with the most FIFO headroom (ties to the lowest port).
            std::vector<std::size_t> free(ports.size());
            for (std::size_t pi = 0; pi < ports.size(); ++pi)
                free[pi] = tree.port_free(static_cast<std::uint32_t>(pi));
            const std::uint64_t now = loop_cycles_base_ + loop_cycles;
            for (std::uint32_t slot = 0; slot < hw_.multipliers; ++slot) {
                std::size_t pick = ports.size();
                for (std::size_t pi = 0; pi < ports.size(); ++pi) {
                    PortState& p = ports[pi];
                    if (!p.leaf || !p.busy || p.ready_at > now || free[pi] == 0) continue;
                    if (pick == ports.size() || free[pi] > free[pick]) pick = pi;
                }
                if (pick == ports.size()) break;
                PortState& p = ports[pick];
                CooElement prod = CooElement::make(p.job_row, b_.col_idx[p.job_pos],
                                                   p.job_value * b_.values[p.job_pos]);
                tree.offer(static_cast<std::uint32_t>(pick), prod);
                --free[pick];
                ++p.job_pos;
                ++multiplies_;
                ++events;
                if (p.job_pos == p.job_end) p.busy = false;
            }

            std::uint64_t steps_before = tree.merge_steps();
            tree.tick();
            events += tree.merge_steps() - steps_before;

            bool waiting = false;
            for (const PortState& p : ports)
                if (p.leaf && p.busy && p.ready_at > now) waiting = true;

            ++loop_cycles;
            if (events > 0 || waiting)
                idle_cycles = 0;
            else if (++idle_cycles > idle_limit)
                throw ContractViolation("merge round deadlocked");
            if (loop_cycles > hard_cap) throw ContractViolation("merge round livelocked");
        }

        adds_ += tree.adds() + sink.adds;
        if (is_final)
            traffic_.add_write(TrafficCategory::FinalResults,
                               12ull * sink.out.size() + 4ull * (a_.num_rows + 1));

        std::uint64_t round_bytes = traffic_.total() - before.total();
        std::uint64_t busy_max = 0;
        for (std::uint32_t ch = 0; ch < hw_.dram.channels; ++ch)
            busy_max = std::max(busy_max, dram_.busy_cycles(ch) - busy_before[ch]);
        std::uint64_t floor_bw = ceil_div(round_bytes, hw_.dram.aggregate_bytes_per_cycle());
        std::uint64_t round_cycles =
            std::max({loop_cycles, floor_bw, busy_max}) + hw_.dram.latency_cycles;
        cycles_ += round_cycles;
        loop_cycles_base_ += round_cycles;

        RoundTraffic rt;
        rt.round_index = res.round_traffic.size();
        rt.left_bytes_read = traffic_.read_left - before.read_left;
        rt.right_bytes_read = traffic_.read_right - before.read_right;
        rt.partial_bytes_read = traffic_.read_partial - before.read_partial;
        rt.partial_bytes_written = traffic_.write_partial - before.write_partial;
        rt.final_bytes_written = traffic_.write_final - before.write_final;
        rt.cycles = round_cycles;
        res.round_traffic.push_back(rt);

        return std::move(sink.out);
    }

    // Issue the right-row fetch for one left element. With prefetching the
    // look-ahead hides the access latency, so data lands when the transfer
    // completes; without it every line pays full latency and nothing is kept.
    void start_job(PortState& p, const LeafElem& e, std::uint64_t now, std::uint64_t line_bytes) {
        p.job_row = e.out_row;
        p.job_value = e.value;
        p.job_pos = b_.row_ptr[e.b_row];
        p.job_end = b_.row_ptr[e.b_row + 1];
        p.ready_at = now;
        std::uint64_t blen = p.job_end - p.job_pos;
        if (blen == 0) return;  // nothing to multiply; the slot is spent anyway
        p.busy = true;
        if (flags_.prefetch) {
            AccessResult ar = buffer_.access_row(e.b_row, blen, p.next_use[p.cursor]);
            traffic_.hit_lines += ar.hit_lines;
            traffic_.miss_lines += ar.miss_lines;
            traffic_.add_read(TrafficCategory::RightMatrix,
                              static_cast<std::uint64_t>(ar.miss_lines) * line_bytes);
            for (std::uint32_t seg : ar.missed_segments) {
                std::uint32_t ch = map_address_to_channel(e.b_row, seg, hw_.dram);
                std::uint64_t done = dram_.submit(now, ch, line_bytes);
                p.ready_at = std::max(p.ready_at, done - hw_.dram.latency_cycles);
            }
        } else {
            std::uint32_t need = hw_.buffer.lines_for(blen);
            traffic_.miss_lines += need;
            traffic_.add_read(TrafficCategory::RightMatrix,
                              static_cast<std::uint64_t>(need) * line_bytes);
            for (std::uint32_t seg = 0; seg < need; ++seg) {
                std::uint32_t ch = map_address_to_channel(e.b_row, seg, hw_.dram);
                p.ready_at = std::max(p.ready_at, dram_.submit(now, ch, line_bytes));
            }
        }
    }

    const CsrMatrix& a_;
    const CsrMatrix& b_;
    HardwareConfig hw_;
    AblationFlags flags_;
    DramModel dram_;
    PrefetchBuffer buffer_;
    TrafficCounters traffic_;
    std::vector<LeafStream> streams_;
    std::map<std::uint64_t, std::vector<CooElement>> stored_;
    std::uint64_t cycles_ = 0;
    std::uint64_t loop_cycles_base_ = 0;  // global clock offset for DRAM timestamps
    std::uint64_t multiplies_ = 0;
    std::uint64_t adds_ = 0;
};

}  // namespace detail

// Build the merge plan the flags ask for and execute it.
inline SimResult simulate(const CsrMatrix& a, const CsrMatrix& b, const HardwareConfig& hw,
                          const AblationFlags& flags = {}, std::uint64_t seed = 1) {
    detail::Engine eng(a, b, hw, flags);
    std::vector<detail::LeafStream> streams = detail::build_leaf_streams(a, flags.condense);
    std::vector<NodeWeight> weights = detail::stream_weights(streams, b);
    MergePlan plan;
    switch (flags.schedule) {
        case ScheduleKind::Huffman: plan = huffman_schedule(weights, hw.merge_way()); break;
        case ScheduleKind::Sequential: plan = sequential_schedule(weights, hw.merge_way()); break;
        case ScheduleKind::Random: plan = random_schedule(weights, hw.merge_way(), seed); break;
    }
    return eng.run(plan);
}

// Execute a caller-supplied plan (it must address this matrix's streams).
inline SimResult run_plan(const CsrMatrix& a, const CsrMatrix& b, const HardwareConfig& hw,
                          const MergePlan& plan, const AblationFlags& flags = {}) {
    detail::Engine eng(a, b, hw, flags);
    return eng.run(plan);
}

// Place a finished run on the roofline: intensity counts only compulsory
// traffic (read both operands once, write the result once).
inline RooflinePoint roofline(const SimStats& stats, const HardwareConfig& hw, const CsrMatrix& a,
                              const CsrMatrix& b, const CsrMatrix& result) {
    RooflinePoint p;
    p.intensity =
        operational_intensity(static_cast<double>(count_flops(a, b)), csr_bytes(a) + csr_bytes(b),
                              csr_bytes(result));
    p.compute_roof_gflops = hw.compute_roof_gflops();
    p.memory_roof_gflops =
        p.intensity * static_cast<double>(hw.dram.aggregate_bytes_per_cycle()) * hw.clock_ghz;
    p.achieved_gflops = stats.gflops;
    return p;
}

}  // namespace sparch
