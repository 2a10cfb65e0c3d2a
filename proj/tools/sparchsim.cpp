#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparch/sparch.hpp"
#include "sparch/stats_json.hpp"

namespace {

using namespace sparch;
using nlohmann::json;

std::vector<std::pair<std::string, std::string>> parse_kv_list(const std::string& s) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(pos, comma - pos);
        pos = comma + 1;
        if (item.empty()) continue;
        std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key=value, got '" + item + "'");
        out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return out;
}

std::uint64_t num_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        std::uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

double num_d(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

struct RmatSpec {
    RmatParams params;
    std::optional<std::uint64_t> seed;  // seed= inside the spec wins over --seed
};

RmatSpec parse_rmat(const std::string& spec) {
    RmatSpec r;
    bool have_scale = false;
    for (const auto& [k, v] : parse_kv_list(spec)) {
        if (k == "scale") {
            r.params.scale = static_cast<std::uint32_t>(num_u64(k, v));
            have_scale = true;
        } else if (k == "ef" || k == "edge_factor") {
            r.params.edge_factor = static_cast<std::uint32_t>(num_u64(k, v));
        } else if (k == "a") {
            r.params.a = num_d(k, v);
        } else if (k == "b") {
            r.params.b = num_d(k, v);
        } else if (k == "c") {
            r.params.c = num_d(k, v);
        } else if (k == "d") {
            r.params.d = num_d(k, v);
        } else if (k == "seed") {
            r.seed = num_u64(k, v);
        } else {
            throw ConfigError("unknown rmat key '" + k + "'");
        }
    }
    if (!have_scale) throw ConfigError("rmat spec needs scale=<n>");
    return r;
}

// Shared run/verify/sweep options. Exactly one left-matrix source.
struct CommonOpts {
    std::string a_path;
    std::string b_path;
    std::string rmat_spec;
    std::string flags_csv;
    std::string config_path;
    std::vector<std::string> hw_kv;
    std::uint64_t seed = 1;
    bool flags_on_cli = false;
    bool seed_on_cli = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_b) {
    cmd->add_option("--a", o.a_path, "left matrix file (Matrix Market)");
    if (with_b) cmd->add_option("--b", o.b_path, "right matrix file (defaults to the left one)");
    cmd->add_option("--rmat", o.rmat_spec,
                    "synthesize the left matrix: scale=S[,ef=E,a=..,b=..,c=..,d=..,seed=N]");
    cmd->add_option("--seed", o.seed, "seed for synthesis and randomized scheduling");
    cmd->add_option("--flags", o.flags_csv,
                    "ablations: no-condense|no-prefetch|schedule=huffman|sequential|random");
    cmd->add_option("--hw", o.hw_kv, "hardware override key=value (repeatable)");
    cmd->add_option("--config", o.config_path, "JSON config file (defaults < config < flags)");
}

// Returns (hw, flags) after applying config file then command-line overrides.
std::pair<HardwareConfig, AblationFlags> resolve_config(CommonOpts& o) {
    HardwareConfig hw;
    std::string flags_csv;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ConfigError("cannot open config file '" + o.config_path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        for (const auto& [k, v] : j.items()) {
            if (k == "flags") {
                flags_csv = v.get<std::string>();
            } else if (k == "seed") {
                if (!o.seed_on_cli) o.seed = v.get<std::uint64_t>();
            } else {
                hw.apply_override(k, v.is_string() ? v.get<std::string>() : v.dump());
            }
        }
    }
    if (o.flags_on_cli) flags_csv = o.flags_csv;
    for (const std::string& kv : o.hw_kv)
        for (const auto& [k, v] : parse_kv_list(kv)) hw.apply_override(k, v);
    hw.validate();
    return {hw, parse_flags(flags_csv)};
}

CsrMatrix load_left(const CommonOpts& o, std::string* label = nullptr) {
    if (o.a_path.empty() == o.rmat_spec.empty())
        throw ConfigError("need exactly one input source: --a or --rmat");
    if (!o.a_path.empty()) {
        if (label) *label = o.a_path;
        return load_matrix_market(o.a_path);
    }
    RmatSpec r = parse_rmat(o.rmat_spec);
    if (label) *label = "rmat:" + o.rmat_spec;
    return rmat_generate(r.params, r.seed.value_or(o.seed));
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    out << text;
}

bool all_integral(const CsrMatrix& m) {
    for (double v : m.values)
        if (std::nearbyint(v) != v) return false;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"outer-product SpGEMM accelerator simulator"};
    app.require_subcommand(1);

    CommonOpts run_o, verify_o, sweep_o;
    std::string run_out, run_result, run_plan;
    CLI::App* cmd_run = app.add_subcommand("run", "simulate a product and report statistics");
    add_common(cmd_run, run_o, true);
    cmd_run->add_option("--out", run_out, "stats JSON path (default stdout)");
    cmd_run->add_option("--result", run_result, "write the result matrix (Matrix Market)");
    cmd_run->add_option("--dump-plan", run_plan, "write the merge plan as JSON");

    bool corrupt = false;
    CLI::App* cmd_verify =
        app.add_subcommand("verify", "simulate and compare against the reference product");
    add_common(cmd_verify, verify_o, true);
    cmd_verify->add_flag("--corrupt-result", corrupt,
                         "flip one output value first (forces a mismatch report)");

    std::string axis_name, sweep_out, sweep_format = "csv";
    std::vector<std::uint64_t> axis_values;
    std::vector<std::string> sweep_a, sweep_rmat;
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "sweep one hardware axis over a corpus");
    cmd_sweep->add_option("--axis", axis_name,
                          "line_elements|lines|merger_width|lookahead|tree_layers");
    cmd_sweep->add_option("--values", axis_values, "axis values (default: canonical list)")
        ->delimiter(',');
    cmd_sweep->add_option("--a", sweep_a, "matrix file (repeatable)");
    cmd_sweep->add_option("--rmat", sweep_rmat, "synthetic matrix spec (repeatable)");
    cmd_sweep->add_option("--seed", sweep_o.seed, "seed for synthesis and randomized scheduling");
    cmd_sweep->add_option("--flags", sweep_o.flags_csv, "ablation flags for every run");
    cmd_sweep->add_option("--hw", sweep_o.hw_kv, "base hardware override key=value (repeatable)");
    cmd_sweep->add_option("--config", sweep_o.config_path, "JSON config file");
    cmd_sweep->add_option("--out", sweep_out, "report path (default stdout)");
    cmd_sweep->add_option("--format", sweep_format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));

    std::string gen_rmat, gen_out;
    std::uint64_t gen_seed = 1;
    CLI::App* cmd_gen = app.add_subcommand("gen", "generate a synthetic matrix file");
    cmd_gen->add_option("--rmat", gen_rmat, "scale=S[,ef=E,a=..,b=..,c=..,d=..,seed=N]")
        ->required();
    cmd_gen->add_option("--seed", gen_seed, "seed (spec seed= wins)");
    cmd_gen->add_option("--out", gen_out, "output Matrix Market path")->required();

    std::uint64_t model_n = 0, model_way = 0, model_condensed = 0;
    CLI::App* cmd_model =
        app.add_subcommand("model", "analytical re-read and traffic estimates");
    cmd_model->add_option("--n", model_n, "streams to merge before condensing")->required();
    cmd_model->add_option("--way", model_way, "merger way (tree leaf count)")->required();
    cmd_model->add_option("--condensed", model_condensed,
                          "condensed stream count (default: two merge rounds)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    run_o.flags_on_cli = cmd_run->count("--flags") > 0;
    run_o.seed_on_cli = cmd_run->count("--seed") > 0;
    verify_o.flags_on_cli = cmd_verify->count("--flags") > 0;
    verify_o.seed_on_cli = cmd_verify->count("--seed") > 0;
    sweep_o.flags_on_cli = cmd_sweep->count("--flags") > 0;
    sweep_o.seed_on_cli = cmd_sweep->count("--seed") > 0;

    try {
        if (cmd_run->parsed()) {
            auto [hw, flags] = resolve_config(run_o);
            CsrMatrix a = load_left(run_o);
            CsrMatrix b = run_o.b_path.empty() ? a : load_matrix_market(run_o.b_path);
            SimResult res = simulate(a, b, hw, flags, run_o.seed);
            write_text(run_out, stats_to_json(res.stats).dump(2) + "\n");
            if (!run_result.empty()) write_matrix_market(res.result, run_result);
            if (!run_plan.empty()) write_text(run_plan, plan_to_json(res.plan).dump(2) + "\n");
            return 0;
        }

        if (cmd_verify->parsed()) {
            auto [hw, flags] = resolve_config(verify_o);
            CsrMatrix a = load_left(verify_o);
            CsrMatrix b = verify_o.b_path.empty() ? a : load_matrix_market(verify_o.b_path);
            SimResult res = simulate(a, b, hw, flags, verify_o.seed);
            if (corrupt && res.result.nnz() > 0) res.result.values[0] += 1.0;
            CsrMatrix ref = reference_spgemm(a, b);
            double tol = (all_integral(a) && all_integral(b)) ? 0.0 : 1e-12;
            CsrMismatch mm = csr_compare(res.result, ref, tol);
            if (!mm.ok) {
                std::cout << "mismatch at (" << mm.row << ", " << mm.col << "): " << mm.what
                          << ": simulated " << detail::format_value(mm.lhs) << " expected "
                          << detail::format_value(mm.rhs) << "\n";
                return 3;
            }
            std::cout << "ok: " << ref.num_rows << "x" << ref.num_cols << ", nnz " << ref.nnz()
                      << "\n";
            return 0;
        }

        if (cmd_sweep->parsed()) {
            struct AxisDef {
                const char* name;
                const char* hw_key;
                std::vector<std::uint64_t> canonical;
                std::uint64_t lo, hi;
                bool exact_set;
            };
            static const std::vector<AxisDef> kAxes = {
                {"line_elements", "buffer_line_elements", {24, 36, 48, 60}, 24, 60, true},
                {"lines", "buffer_lines", {256, 512, 1024, 2048, 4096}, 256, 4096, false},
                {"merger_width", "merger_width", {2, 4, 8, 16, 32}, 2, 32, false},
                {"lookahead", "lookahead", {1024, 4096, 16384, 65536}, 1024, 65536, false},
                {"tree_layers", "tree_layers", {3, 4, 5, 6, 7, 8}, 3, 8, false},
            };
            const AxisDef* axis = nullptr;
            for (const AxisDef& ax : kAxes)
                if (axis_name == ax.name) axis = &ax;
            if (!axis) throw ConfigError("unknown or missing sweep axis '" + axis_name + "'");
            std::vector<std::uint64_t> values =
                axis_values.empty() ? axis->canonical : axis_values;
            for (std::uint64_t v : values) {
                bool ok = axis->exact_set
                              ? std::find(axis->canonical.begin(), axis->canonical.end(), v) !=
                                    axis->canonical.end()
                              : (v >= axis->lo && v <= axis->hi);
                if (!ok)
                    throw ConfigError("value " + std::to_string(v) + " outside the " +
                                      axis->name + " axis range");
            }

            auto [base_hw, flags] = resolve_config(sweep_o);
            struct Entry {
                std::string label;
                CsrMatrix m;
            };
            std::vector<Entry> corpus;
            for (const std::string& p : sweep_a) corpus.push_back({p, load_matrix_market(p)});
            for (const std::string& spec : sweep_rmat) {
                RmatSpec r = parse_rmat(spec);
                corpus.push_back(
                    {"rmat:" + spec, rmat_generate(r.params, r.seed.value_or(sweep_o.seed))});
            }
            if (corpus.empty()) throw ConfigError("sweep needs at least one --a or --rmat input");

            struct Row {
                std::string matrix;
                std::uint64_t value = 0;
                double gflops = 0;
                std::uint64_t dram_bytes = 0;
                std::optional<double> hit_rate;
                std::uint64_t cycles = 0;
            };
            const std::size_t tasks = corpus.size() * values.size();
            std::vector<Row> rows(tasks);

            unsigned threads = std::thread::hardware_concurrency();
            if (threads == 0) threads = 1;
            if (const char* env = std::getenv("SPARCHSIM_THREADS")) {
                threads = static_cast<unsigned>(num_u64("SPARCHSIM_THREADS", env));
                if (threads == 0) threads = 1;
            }
            threads = static_cast<unsigned>(
                std::min<std::size_t>(threads, tasks == 0 ? 1 : tasks));

            std::atomic<std::size_t> next{0};
            std::mutex err_mu;
            std::exception_ptr err;
            auto worker = [&] {
                for (std::size_t i; (i = next.fetch_add(1)) < tasks;) {
                    try {
                        const Entry& e = corpus[i / values.size()];
                        std::uint64_t v = values[i % values.size()];
                        HardwareConfig hw = base_hw;
                        hw.apply_override(axis->hw_key, std::to_string(v));
                        hw.validate();
                        SimResult res = simulate(e.m, e.m, hw, flags, sweep_o.seed);
                        rows[i] = {e.label,
                                   v,
                                   res.stats.gflops,
                                   res.stats.traffic.total(),
                                   res.stats.hit_rate,
                                   res.stats.cycles};
                    } catch (...) {
                        std::lock_guard<std::mutex> lk(err_mu);
                        if (!err) err = std::current_exception();
                    }
                }
            };
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
            if (err) std::rethrow_exception(err);

            std::string text;
            if (sweep_format == "csv") {
                auto csv_field = [](const std::string& s) {
                    if (s.find_first_of(",\"\n") == std::string::npos) return s;
                    std::string q = "\"";
                    for (char c : s) {
                        if (c == '"') q += '"';
                        q += c;
                    }
                    q += '"';
                    return q;
                };
                std::ostringstream os;
                os << "matrix,parameter,value,gflops,dram_bytes,hit_rate,cycles\n";
                for (const Row& r : rows) {
                    os << csv_field(r.matrix) << ',' << axis->name << ',' << r.value << ','
                       << detail::format_value(r.gflops) << ',' << r.dram_bytes << ','
                       << (r.hit_rate ? detail::format_value(*r.hit_rate) : std::string()) << ','
                       << r.cycles << '\n';
                }
                text = os.str();
            } else {
                json arr = json::array();
                for (const Row& r : rows) {
                    json jr = {{"matrix", r.matrix},     {"parameter", axis->name},
                               {"value", r.value},       {"gflops", r.gflops},
                               {"dram_bytes", r.dram_bytes}, {"cycles", r.cycles}};
                    if (r.hit_rate)
                        jr["hit_rate"] = *r.hit_rate;
                    else
                        jr["hit_rate"] = nullptr;
                    arr.push_back(jr);
                }
                text = arr.dump(2) + "\n";
            }
            write_text(sweep_out, text);
            return 0;
        }

        if (cmd_gen->parsed()) {
            RmatSpec r = parse_rmat(gen_rmat);
            CsrMatrix m = rmat_generate(r.params, r.seed.value_or(gen_seed));
            write_matrix_market(m, gen_out);
            return 0;
        }

        if (cmd_model->parsed()) {
            if (model_n < 2 || model_way < 2)
                throw ConfigError("model needs --n >= 2 and --way >= 2");
            std::uint64_t condensed =
                model_condensed ? model_condensed : 2ull * (model_way - 1) + 1;
            RereadEstimate big = expected_rereads(model_n, static_cast<std::uint32_t>(model_way));
            RereadEstimate small =
                expected_rereads(condensed, static_cast<std::uint32_t>(model_way));
            TrafficMultiples tm = traffic_multiples(model_n, condensed,
                                                    static_cast<std::uint32_t>(model_way));
            std::ostringstream os;
            os << "n " << model_n << "\n"
               << "way " << model_way << "\n"
               << "condensed " << condensed << "\n"
               << "rounds " << detail::format_value(big.rounds) << "\n"
               << "rereads_exact " << detail::format_value(big.exact_sum) << "\n"
               << "rereads_log " << detail::format_value(big.log_approx) << "\n"
               << "condensed_rounds " << detail::format_value(small.rounds) << "\n"
               << "condensed_rereads_exact " << detail::format_value(small.exact_sum) << "\n"
               << "multiple_uncondensed " << detail::format_value(tm.uncondensed) << "\n"
               << "multiple_outerspace " << detail::format_value(tm.outerspace) << "\n"
               << "multiple_condensed " << detail::format_value(tm.condensed) << "\n";
            std::cout << os.str();
            return 0;
        }
    } catch (const ContractViolation& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
