#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparch/sparch.hpp"

using namespace sparch;
using nlohmann::json;

namespace {

std::string bin() {
    const char* b = std::getenv("SPARCHSIM_BIN");
#ifdef SPARCHSIM_BIN
    if (!b) b = SPARCHSIM_BIN;
#endif
    REQUIRE(b != nullptr);
    return std::string("\"") + b + "\"";
}

struct CmdResult {
    int code = -1;
    std::string out;  // stdout and stderr interleaved
};

CmdResult run_cmd(const std::string& args, const std::string& env_prefix = "") {
    std::string full = env_prefix + bin() + " " + args + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        static int counter = 0;
        dir = std::filesystem::temp_directory_path() /
              ("sparch_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

json jload(const std::string& path) { return json::parse(slurp(path)); }

std::map<std::string, double> parse_model(const std::string& text) {
    std::map<std::string, double> kv;
    std::istringstream in(text);
    std::string key, value;
    while (in >> key >> value) kv[key] = std::stod(value);
    return kv;
}

struct SweepRow {
    std::string matrix;
    std::string parameter;
    std::uint64_t value = 0;
    double gflops = 0;
    std::uint64_t dram_bytes = 0;
    std::string hit_rate;
    std::uint64_t cycles = 0;
};

// The matrix label may be CSV-quoted (rMAT specs contain commas), so split
// the six fixed-format fields off the right-hand side.
std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.push_back(line);
    REQUIRE(!lines.empty());
    REQUIRE(lines[0] == "matrix,parameter,value,gflops,dram_bytes,hit_rate,cycles");
    std::vector<SweepRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::string rest = lines[i];
        std::vector<std::string> tail;
        for (int f = 0; f < 6; ++f) {
            std::size_t pos = rest.rfind(',');
            REQUIRE(pos != std::string::npos);
            tail.push_back(rest.substr(pos + 1));
            rest.erase(pos);
        }
        SweepRow r;
        r.matrix = rest;
        r.cycles = std::stoull(tail[0]);
        r.hit_rate = tail[1];
        r.dram_bytes = std::stoull(tail[2]);
        r.gflops = std::stod(tail[3]);
        r.value = std::stoull(tail[4]);
        r.parameter = tail[5];
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST_CASE("run writes the full statistics schema deterministically") {
    TempDir tmp;
    std::string stats = tmp.path("stats.json");
    CmdResult r =
        run_cmd("run --rmat scale=12,ef=8 --seed 1 --out " + stats);
    REQUIRE(r.code == 0);
    json j = jload(stats);
    for (const char* key : {"cycles", "seconds", "gflops", "dram_read_bytes", "dram_write_bytes",
                            "multiplies", "adds", "partial_matrices", "rounds", "hit_rate",
                            "bandwidth_utilization", "result_nnz"})
        REQUIRE(j.contains(key));
    for (const char* key : {"left", "right", "partial", "final"})
        REQUIRE(j["dram_read_bytes"].contains(key));
    for (const char* key : {"partial", "final"}) REQUIRE(j["dram_write_bytes"].contains(key));
    CHECK(j["cycles"].get<std::uint64_t>() > 0);

    std::string again = tmp.path("again.json");
    REQUIRE(run_cmd("run --rmat scale=12,ef=8 --seed 1 --out " + again).code == 0);
    CHECK(slurp(stats) == slurp(again));

    // Without --out the stats land on stdout.
    CmdResult piped = run_cmd("run --rmat scale=5,ef=4 --seed 2");
    REQUIRE(piped.code == 0);
    CHECK(json::parse(piped.out).contains("cycles"));
}

TEST_CASE("run result and plan files agree with the library") {
    TempDir tmp;
    std::string result = tmp.path("result.mtx");
    std::string plan = tmp.path("plan.json");
    CmdResult r = run_cmd("run --rmat scale=8,ef=8 --seed 4 --result " + result +
                          " --dump-plan " + plan + " --out " + tmp.path("s.json"));
    REQUIRE(r.code == 0);

    RmatParams p;
    p.scale = 8;
    p.edge_factor = 8;
    CsrMatrix a = rmat_generate(p, 4);
    CsrMatrix want = reference_spgemm(a, a);
    CsrMatrix got = load_matrix_market(result);
    REQUIRE(got == want);

    json pj = jload(plan);
    MergePlan lib = huffman_schedule(leaf_weights(a, a), HardwareConfig{}.merge_way());
    CHECK(pj["cost"].get<std::uint64_t>() == plan_cost(lib));
    CHECK(pj["num_leaves"].get<std::uint64_t>() == lib.num_leaves);
    CHECK(pj["rounds"].size() == lib.rounds.size());
}

TEST_CASE("disabling prefetch only adds right-matrix traffic") {
    TempDir tmp;
    std::string m = tmp.path("m.mtx");
    REQUIRE(run_cmd("gen --rmat scale=9,ef=8,seed=6 --out " + m).code == 0);
    std::string on = tmp.path("on.json");
    std::string off = tmp.path("off.json");
    REQUIRE(run_cmd("run --a " + m + " --out " + on).code == 0);
    REQUIRE(run_cmd("run --a " + m + " --flags no-prefetch --out " + off).code == 0);
    std::uint64_t right_on = jload(on)["dram_read_bytes"]["right"].get<std::uint64_t>();
    std::uint64_t right_off = jload(off)["dram_read_bytes"]["right"].get<std::uint64_t>();
    CHECK(right_off > right_on);
    CHECK(jload(on)["dram_read_bytes"]["left"] == jload(off)["dram_read_bytes"]["left"]);
}

TEST_CASE("verify accepts correct products and reports corrupted ones") {
    TempDir tmp;
    std::string id = tmp.path("id.mtx");
    write_matrix_market(identity_matrix(32), id);
    CmdResult ok = run_cmd("verify --a " + id);
    REQUIRE(ok.code == 0);
    CHECK(ok.out.find("ok") == 0);

    CmdResult bad = run_cmd("verify --rmat scale=7,ef=8 --seed 3 --corrupt-result");
    REQUIRE(bad.code == 3);
    CHECK(bad.out.find("mismatch at (") != std::string::npos);
}

TEST_CASE("verify passes a hundred synthetic products") {
    for (int seed = 1; seed <= 100; ++seed) {
        CmdResult r = run_cmd("verify --rmat scale=7,ef=8 --seed " + std::to_string(seed));
        INFO("seed " << seed << ": " << r.out);
        REQUIRE(r.code == 0);
    }
}

TEST_CASE("mismatched operand shapes exit with the contract code") {
    TempDir tmp;
    std::string a = tmp.path("a.mtx");
    std::string b = tmp.path("b.mtx");
    write_matrix_market(identity_matrix(8), a);
    write_matrix_market(identity_matrix(9), b);
    CmdResult r = run_cmd("run --a " + a + " --b " + b);
    REQUIRE(r.code == 2);
    CHECK(r.out.find("contract violation") != std::string::npos);
}

TEST_CASE("invalid configurations exit with the config code") {
    TempDir tmp;
    std::string id = tmp.path("id.mtx");
    write_matrix_market(identity_matrix(4), id);

    CHECK(run_cmd("run").code == 1);                                   // no input source
    CHECK(run_cmd("run --a " + id + " --rmat scale=4").code == 1);     // two input sources
    CHECK(run_cmd("run --rmat scale=4 --flags bogus").code == 1);      // unknown ablation
    CHECK(run_cmd("run --rmat scale=4 --hw nonsense=1").code == 1);    // unknown override
    CHECK(run_cmd("run --rmat scale=4 --hw tree_layers=9").code == 1); // out of range
    CHECK(run_cmd("run --rmat ef=8").code == 1);                       // rmat needs scale
    CHECK(run_cmd("run --rmat scale=4 --badflag").code == 1);          // unknown option
    CHECK(run_cmd("model --n 1 --way 64").code == 1);                  // n below range
    CHECK(run_cmd("model --n 140000").code == 1);                      // missing required
    CHECK(run_cmd("sweep --values 4 --rmat scale=4").code == 1);       // empty axis
    CHECK(run_cmd("sweep --axis bogus --rmat scale=4").code == 1);     // unknown axis
    CHECK(run_cmd("sweep --axis tree_layers").code == 1);              // empty corpus
    CHECK(run_cmd("sweep --axis lines --values 100 --rmat scale=4").code == 1);
    CHECK(run_cmd("sweep --axis line_elements --values 30 --rmat scale=4").code == 1);
    CHECK(run_cmd("sweep --axis tree_layers --rmat scale=4 --format xml").code == 1);

    std::string bad = tmp.path("bad.mtx");
    spit(bad, "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1\n");
    CmdResult r = run_cmd("run --a " + bad);
    REQUIRE(r.code == 1);
    CHECK(r.out.find("parse error") != std::string::npos);
    CHECK(run_cmd("run --a " + tmp.path("missing.mtx")).code == 1);
}

TEST_CASE("gen produces deterministic loadable matrices") {
    TempDir tmp;
    std::string g1 = tmp.path("g1.mtx");
    std::string g2 = tmp.path("g2.mtx");
    std::string g3 = tmp.path("g3.mtx");
    REQUIRE(run_cmd("gen --rmat scale=6,ef=4,seed=9 --out " + g1).code == 0);
    REQUIRE(run_cmd("gen --rmat scale=6,ef=4,seed=9 --out " + g2).code == 0);
    CHECK(slurp(g1) == slurp(g2));

    // --seed fills in when the spec itself has no seed.
    REQUIRE(run_cmd("gen --rmat scale=6,ef=4 --seed 9 --out " + g3).code == 0);
    CHECK(slurp(g1) == slurp(g3));

    RmatParams p;
    p.scale = 6;
    p.edge_factor = 4;
    CHECK(load_matrix_market(g1) == rmat_generate(p, 9));
}

TEST_CASE("model reports the analytical traffic picture") {
    CmdResult r = run_cmd("model --n 140000 --way 64");
    REQUIRE(r.code == 0);
    std::map<std::string, double> kv = parse_model(r.out);
    CHECK(kv.at("n") == 140000);
    CHECK(kv.at("way") == 64);
    CHECK(kv.at("condensed") == 127);  // default: exactly two merge rounds
    CHECK(std::abs(kv.at("rereads_log") - 1.0 - 6.7) <= 0.15);
    CHECK(std::abs(kv.at("multiple_uncondensed") - 13.9) <= 0.05 * 13.9);
    CHECK(kv.at("multiple_outerspace") == 2.5);
    CHECK(std::abs(kv.at("multiple_condensed") - 1.5) <= 0.05 * 1.5);

    // Fewer streams than the merge way → a single round, nothing re-read.
    CmdResult small = run_cmd("model --n 64 --way 64");
    REQUIRE(small.code == 0);
    std::map<std::string, double> skv = parse_model(small.out);
    CHECK(skv.at("rounds") == 0);
    CHECK(skv.at("rereads_exact") == 0);
}

TEST_CASE("sweep emits a stable deterministic report") {
    TempDir tmp;
    const std::string corpus =
        " --rmat scale=6,ef=8,seed=1 --rmat scale=6,ef=8,seed=2";
    const std::string args = "sweep --axis tree_layers --values 4,6" + corpus;
    std::string c1 = tmp.path("s1.csv");
    std::string c2 = tmp.path("s2.csv");
    std::string c3 = tmp.path("s3.csv");
    REQUIRE(run_cmd(args + " --out " + c1).code == 0);
    REQUIRE(run_cmd(args + " --out " + c2).code == 0);
    REQUIRE(run_cmd(args + " --out " + c3, "SPARCHSIM_THREADS=2 ").code == 0);
    CHECK(slurp(c1) == slurp(c2));
    CHECK(slurp(c1) == slurp(c3));  // worker count cannot leak into the report

    std::vector<SweepRow> rows = parse_sweep_csv(slurp(c1));
    REQUIRE(rows.size() == 4);  // 2 matrices x 2 values, matrix-major
    CHECK(rows[0].matrix == rows[1].matrix);
    CHECK(rows[2].matrix == rows[3].matrix);
    CHECK(rows[0].matrix != rows[2].matrix);
    CHECK(rows[0].value == 4);
    CHECK(rows[1].value == 6);
    for (const SweepRow& row : rows) {
        CHECK(row.parameter == "tree_layers");
        CHECK(row.cycles > 0);
        CHECK(row.matrix.find("seed=") != std::string::npos);
    }

    CmdResult j = run_cmd(args + " --format json");
    REQUIRE(j.code == 0);
    json arr = json::parse(j.out);
    REQUIRE(arr.is_array());
    REQUIRE(arr.size() == 4);
    CHECK(arr[0]["parameter"] == "tree_layers");
    CHECK(arr[0]["value"] == 4);
}

TEST_CASE("deeper trees stop paying off once they swallow the schedule") {
    // Corpus picked so the merge schedule needs several rounds at 4 layers
    // (16-way) but exactly one at 6 layers (64-way): the step to 8 layers
    // then has nothing left to save.
    const char* specs[] = {"scale=10,ef=16,a=0.25,b=0.25,c=0.25,d=0.25,seed=3",
                           "scale=10,ef=16,a=0.25,b=0.25,c=0.25,d=0.25,seed=4"};
    for (std::uint64_t seed : {3ull, 4ull}) {
        RmatParams p;
        p.scale = 10;
        p.edge_factor = 16;
        p.a = p.b = p.c = p.d = 0.25;
        std::uint64_t width = max_row_nnz(rmat_generate(p, seed));
        REQUIRE(width > 16);
        REQUIRE(width <= 64);
    }

    TempDir tmp;
    std::string out = tmp.path("layers.csv");
    std::string args = "sweep --axis tree_layers --values 4,6,8";
    for (const char* s : specs) args += std::string(" --rmat ") + s;
    REQUIRE(run_cmd(args + " --out " + out).code == 0);

    std::map<std::uint64_t, double> agg;
    for (const SweepRow& r : parse_sweep_csv(slurp(out))) agg[r.value] += r.gflops;
    REQUIRE(agg.size() == 3);
    double gain_4_6 = agg[6] - agg[4];
    double gain_6_8 = agg[8] - agg[6];
    CHECK(agg[6] > agg[4]);
    CHECK(gain_6_8 < gain_4_6);
}

TEST_CASE("larger buffer lines cut traffic on a thrashing workload") {
    // The right matrix is a few times larger than the buffer, so capacity
    // misses dominate and extra line capacity beats the coarser granularity.
    TempDir tmp;
    std::string out = tmp.path("lines.csv");
    CmdResult r = run_cmd("sweep --axis line_elements --rmat scale=11,ef=32,seed=5 --out " + out);
    REQUIRE(r.code == 0);
    std::vector<SweepRow> rows = parse_sweep_csv(slurp(out));
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        REQUIRE(rows[i].value < rows[i + 1].value);
        INFO("line elements " << rows[i].value << " -> " << rows[i + 1].value);
        CHECK(rows[i].dram_bytes >= rows[i + 1].dram_bytes);
    }
}

TEST_CASE("configuration files yield to explicit command-line settings") {
    TempDir tmp;
    std::string cfg = tmp.path("cfg.json");
    spit(cfg, "{\"seed\": 7, \"flags\": \"no-prefetch\", \"tree_layers\": 4}\n");

    std::string a = tmp.path("a.json");
    std::string b = tmp.path("b.json");
    REQUIRE(run_cmd("run --rmat scale=7,ef=8 --config " + cfg + " --out " + a).code == 0);
    REQUIRE(run_cmd("run --rmat scale=7,ef=8 --seed 7 --flags no-prefetch"
                    " --hw tree_layers=4 --out " + b)
                .code == 0);
    CHECK(slurp(a) == slurp(b));  // config file == spelled-out equivalent

    std::string c = tmp.path("c.json");
    std::string d = tmp.path("d.json");
    REQUIRE(run_cmd("run --rmat scale=7,ef=8 --config " + cfg +
                    " --seed 9 --flags '' --out " + c)
                .code == 0);
    REQUIRE(run_cmd("run --rmat scale=7,ef=8 --seed 9 --hw tree_layers=4 --out " + d).code == 0);
    CHECK(slurp(c) == slurp(d));  // CLI seed and flags override the file
    CHECK(slurp(c) != slurp(a));

    CHECK(run_cmd("run --rmat scale=4 --config " + tmp.path("nope.json")).code == 1);
    spit(tmp.path("junk.json"), "not json");
    CHECK(run_cmd("run --rmat scale=4 --config " + tmp.path("junk.json")).code == 1);
}
