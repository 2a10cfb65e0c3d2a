#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "sparch/rmat.hpp"
#include "sparch/simulator.hpp"
#include "sparch/stats_json.hpp"

using namespace sparch;

namespace {

std::vector<AblationFlags> all_flag_combos() {
    std::vector<AblationFlags> out;
    for (bool condense : {true, false})
        for (ScheduleKind s :
             {ScheduleKind::Huffman, ScheduleKind::Sequential, ScheduleKind::Random})
            for (bool prefetch : {true, false}) out.push_back({condense, s, prefetch});
    return out;
}

std::uint64_t nonempty_cols(const CsrMatrix& m) {
    std::set<std::uint32_t> cols(m.col_idx.begin(), m.col_idx.end());
    return cols.size();
}

}  // namespace

TEST_CASE("identity times identity stays on chip") {
    CsrMatrix eye = identity_matrix(64);
    HardwareConfig hw;
    SimResult r = simulate(eye, eye, hw);
    REQUIRE(r.result == eye);
    CHECK(r.stats.rounds == 1);
    CHECK(r.stats.traffic.write_partial == 0);
    CHECK(r.stats.traffic.read_partial == 0);
    CHECK(r.stats.multiplies == 64);
    CHECK(r.stats.result_nnz == 64);
    CHECK(r.stats.cycles > 0);
}

TEST_CASE("every ablation combination reproduces the reference product") {
    RmatParams p;
    p.scale = 8;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 101);
    CsrMatrix b = rmat_generate(p, 202);
    CsrMatrix want = reference_spgemm(a, b);
    HardwareConfig hw;
    for (const AblationFlags& flags : all_flag_combos()) {
        SimResult r = simulate(a, b, hw, flags, 7);
        REQUIRE(r.result == want);
        CHECK(r.stats.bandwidth_utilization >= 0.0);
        CHECK(r.stats.bandwidth_utilization <= 1.0);
        CHECK(r.stats.cycles * 16 >= r.stats.result_nnz);  // root commits <= 16/cycle
    }
}

TEST_CASE("partial-matrix count follows the condensing mode") {
    RmatParams p;
    p.scale = 7;
    p.edge_factor = 6;
    CsrMatrix a = rmat_generate(p, 33);
    HardwareConfig hw;
    AblationFlags on;
    AblationFlags off;
    off.condense = false;
    SimResult with = simulate(a, a, hw, on);
    SimResult without = simulate(a, a, hw, off);
    CHECK(with.stats.partial_matrices == max_row_nnz(a));
    CHECK(without.stats.partial_matrices == nonempty_cols(a));
    CHECK(with.stats.partial_matrices <= without.stats.partial_matrices);
    REQUIRE(with.result == without.result);
}

TEST_CASE("mismatched dimensions and oversized rounds are rejected") {
    CsrMatrix a = identity_matrix(8);
    CsrMatrix b = identity_matrix(9);
    HardwareConfig hw;
    REQUIRE_THROWS_AS(simulate(a, b, hw), ContractViolation);

    // A plan whose round is wider than the tree cannot run.
    RmatParams p;
    p.scale = 6;
    p.edge_factor = 8;
    CsrMatrix m = rmat_generate(p, 5);
    std::vector<NodeWeight> w = leaf_weights(m, m);
    REQUIRE(w.size() > 4);  // ensures a >4-way round exists below
    MergePlan wide = huffman_schedule(w, 64);
    HardwareConfig tiny;
    tiny.tree_layers = 2;
    REQUIRE_THROWS_AS(run_plan(m, m, tiny, wide), ContractViolation);

    MergePlan wrong = huffman_schedule(std::vector<NodeWeight>(3, NodeWeight{0, 1}), 64);
    REQUIRE_THROWS_AS(run_plan(m, m, hw, wrong), ContractViolation);
}

TEST_CASE("starved resources slow the engine but never wedge it") {
    RmatParams p;
    p.scale = 7;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 44);
    CsrMatrix want = reference_spgemm(a, a);
    HardwareConfig base;
    SimResult easy = simulate(a, a, base);
    REQUIRE(easy.result == want);

    // One row in flight, one multiplier, minimal FIFOs: every stage
    // back-pressures, which would deadlock if a fetcher stayed occupied
    // until its products fully drained instead of until the data lands.
    HardwareConfig starved;
    starved.column_fetchers = 1;
    starved.multipliers = 1;
    starved.writer_fifo_elements = 1;
    starved.fifo_depth = 2 * starved.merger.window_n;
    starved.validate();
    SimResult hard = simulate(a, a, starved);
    REQUIRE(hard.result == want);
    CHECK(hard.stats.cycles > easy.stats.cycles);
}

TEST_CASE("one-round plans never touch partial storage") {
    RmatParams p;
    p.scale = 7;
    p.edge_factor = 4;
    CsrMatrix a = rmat_generate(p, 55);
    HardwareConfig hw;
    REQUIRE(max_row_nnz(a) <= 64);
    SimResult r = simulate(a, a, hw);
    REQUIRE(r.plan.rounds.size() <= 1);
    CHECK(r.stats.traffic.read_partial == 0);
    CHECK(r.stats.traffic.write_partial == 0);
}

TEST_CASE("per-round ledger accounts for every partial byte") {
    RmatParams p;
    p.scale = 8;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 77);
    HardwareConfig hw;
    hw.tree_layers = 3;  // 8-way merger forces several rounds
    SimResult r = simulate(a, a, hw);
    REQUIRE(r.plan.rounds.size() > 1);
    REQUIRE(r.round_traffic.size() == r.stats.rounds);

    std::uint64_t written = 0, read = 0, final_bytes = 0;
    for (const RoundTraffic& rt : r.round_traffic) {
        written += rt.partial_bytes_written;
        read += rt.partial_bytes_read;
        final_bytes += rt.final_bytes_written;
    }
    CHECK(written == r.stats.traffic.write_partial);
    CHECK(read == r.stats.traffic.read_partial);
    CHECK(final_bytes == r.stats.traffic.write_final);
    // Every stored element is written once and read back once.
    CHECK(written == read);
    // The schedule estimate is an upper bound at 16 bytes per element.
    CHECK(written <= plan_cost(r.plan) * 16);
}

TEST_CASE("schedule estimates bound measured partial traffic") {
    std::mt19937_64 rng(103);
    HardwareConfig hw;
    hw.tree_layers = 2;  // 4-way: most matrices need several rounds
    int rounds_seen = 0;
    for (int rep = 0; rep < 100; ++rep) {
        CsrMatrix a = oracles::random_csr(rng, 48, 48, 0.15, false);
        std::vector<NodeWeight> w = leaf_weights(a, a);
        if (w.size() < 2) continue;
        MergePlan plan = huffman_schedule(w, 4);
        SimResult r = run_plan(a, a, hw, plan);
        REQUIRE(r.result == reference_spgemm(a, a));
        CHECK(r.stats.traffic.write_partial <= plan_cost(plan) * 16);
        if (plan.rounds.size() > 1) ++rounds_seen;
    }
    REQUIRE(rounds_seen > 50);  // the bound was exercised, not vacuous
}

TEST_CASE("lightest-first scheduling saves partial traffic") {
    RmatParams p;
    p.scale = 9;
    p.edge_factor = 8;
    HardwareConfig hw;
    hw.tree_layers = 3;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        CsrMatrix a = rmat_generate(p, seed);
        AblationFlags hf, sf, rf;
        sf.schedule = ScheduleKind::Sequential;
        rf.schedule = ScheduleKind::Random;
        std::uint64_t h = simulate(a, a, hw, hf).stats.traffic.write_partial;
        std::uint64_t s = simulate(a, a, hw, sf).stats.traffic.write_partial;
        std::uint64_t r = simulate(a, a, hw, rf, seed).stats.traffic.write_partial;
        CHECK(h <= s);
        CHECK(h <= r);
    }
}

TEST_CASE("prefetching never reads more of the right matrix") {
    RmatParams p;
    p.scale = 9;
    p.edge_factor = 8;
    HardwareConfig hw;
    for (std::uint64_t seed : {11ull, 12ull}) {
        CsrMatrix a = rmat_generate(p, seed);
        AblationFlags on, off;
        off.prefetch = false;
        SimResult with = simulate(a, a, hw, on);
        SimResult without = simulate(a, a, hw, off);
        CHECK(with.stats.traffic.read_right <= without.stats.traffic.read_right);
        CHECK(with.stats.cycles <= without.stats.cycles);
        REQUIRE(with.result == without.result);
        // Right-matrix reads are whole buffer lines.
        std::uint64_t line = hw.buffer.line_bytes();
        std::uint64_t header = 4ull * (a.num_rows + 1);
        CHECK((with.stats.traffic.read_right - header) % line == 0);
        CHECK(with.stats.traffic.read_right - header ==
              with.stats.traffic.miss_lines * line);
    }
}

TEST_CASE("repeated runs are bit-identical") {
    RmatParams p;
    p.scale = 8;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 909);
    HardwareConfig hw;
    AblationFlags f;
    f.schedule = ScheduleKind::Random;
    SimResult r1 = simulate(a, a, hw, f, 5);
    SimResult r2 = simulate(a, a, hw, f, 5);
    REQUIRE(r1.result == r2.result);
    CHECK(stats_to_json(r1.stats).dump() == stats_to_json(r2.stats).dump());
    CHECK(plan_to_json(r1.plan).dump() == plan_to_json(r2.plan).dump());
}

TEST_CASE("stats serialize with the full fixed field set") {
    CsrMatrix eye = identity_matrix(16);
    HardwareConfig hw;
    SimResult r = simulate(eye, eye, hw);
    nlohmann::json j = stats_to_json(r.stats);
    for (const char* key : {"cycles", "seconds", "gflops", "dram_read_bytes", "dram_write_bytes",
                            "multiplies", "adds", "partial_matrices", "rounds", "hit_rate",
                            "bandwidth_utilization", "result_nnz"})
        REQUIRE(j.contains(key));
    for (const char* key : {"left", "right", "partial", "final"})
        REQUIRE(j["dram_read_bytes"].contains(key));
    for (const char* key : {"partial", "final"}) REQUIRE(j["dram_write_bytes"].contains(key));
    CHECK(j["cycles"].get<std::uint64_t>() == r.stats.cycles);
    CHECK(j["hit_rate"].is_number());

    // Derived quantities recompute from their parts.
    CHECK(r.stats.seconds == Catch::Approx(r.stats.cycles / (hw.clock_ghz * 1e9)));
    CHECK(r.stats.gflops ==
          Catch::Approx(count_flops(eye, eye) / r.stats.seconds / 1e9));
}

TEST_CASE("plan serialization carries the scheduling cost") {
    RmatParams p;
    p.scale = 8;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 31);
    HardwareConfig hw;
    hw.tree_layers = 3;
    SimResult r = simulate(a, a, hw);
    nlohmann::json j = plan_to_json(r.plan);
    CHECK(j["cost"].get<std::uint64_t>() == plan_cost(r.plan));
    CHECK(j["num_leaves"].get<std::uint64_t>() == r.plan.num_leaves);
    CHECK(j["rounds"].size() == r.plan.rounds.size());
}

TEST_CASE("traffic decomposes exactly into its categories") {
    RmatParams p;
    p.scale = 8;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 41);
    HardwareConfig hw;
    hw.tree_layers = 3;
    SimResult r = simulate(a, a, hw);
    const TrafficCounters& t = r.stats.traffic;
    CHECK(t.total() == t.read_left + t.read_right + t.read_partial + t.read_final +
                           t.write_partial + t.write_final);
    // Left stream: 12 bytes per element plus one row-extent array.
    CHECK(t.read_left == 12 * a.nnz() + 4ull * (a.num_rows + 1));
    // Final output: element data plus the row-extent array.
    CHECK(t.write_final == 12 * r.stats.result_nnz + 4ull * (a.num_rows + 1));
}

TEST_CASE("runs sit on or under the roofline") {
    RmatParams p;
    p.scale = 9;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 71);
    HardwareConfig hw;
    SimResult r = simulate(a, a, hw);
    RooflinePoint pt = roofline(r.stats, hw, a, a, r.result);
    CHECK(pt.compute_roof_gflops == 32.0);
    CHECK(pt.memory_roof_gflops == Catch::Approx(pt.intensity * 128.0));
    CHECK(pt.achieved_gflops <=
          std::min(pt.compute_roof_gflops, pt.memory_roof_gflops) * 1.01);
    CHECK(pt.intensity > 0.0);
}

TEST_CASE("empty and degenerate inputs still simulate") {
    CsrMatrix empty;
    empty.num_rows = empty.num_cols = 8;
    empty.row_ptr.assign(9, 0);
    HardwareConfig hw;
    SimResult r = simulate(empty, empty, hw);
    CHECK(r.result.nnz() == 0);
    CHECK(r.stats.cycles == 0);
    CHECK(r.stats.rounds == 0);
    CHECK(!r.stats.hit_rate.has_value());

    // One column of one element.
    CsrMatrix tiny;
    tiny.num_rows = tiny.num_cols = 1;
    tiny.row_ptr = {0, 1};
    tiny.col_idx = {0};
    tiny.values = {2.5};
    SimResult t = simulate(tiny, tiny, hw);
    REQUIRE(t.result.nnz() == 1);
    CHECK(t.result.values[0] == 6.25);
}
