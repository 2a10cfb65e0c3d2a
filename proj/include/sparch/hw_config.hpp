#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "sparch/dram.hpp"
#include "sparch/merger.hpp"
#include "sparch/prefetch.hpp"

namespace sparch {

// Bad user-supplied configuration (CLI maps this to exit code 1).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ScheduleKind { Huffman, Sequential, Random };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Huffman: return "huffman";
        case ScheduleKind::Sequential: return "sequential";
        case ScheduleKind::Random: return "random";
    }
    return "?";
}

// Ablation switches: matrix condensing, merge-order scheduling, and the
// row prefetch buffer can each be disabled/degraded independently.
struct AblationFlags {
    bool condense = true;
    ScheduleKind schedule = ScheduleKind::Huffman;
    bool prefetch = true;
};

inline AblationFlags parse_flags(const std::string& csv) {
    AblationFlags f;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t end = csv.find(',', pos);
        if (end == std::string::npos) end = csv.size();
        std::string tok = csv.substr(pos, end - pos);
        pos = end + 1;
        if (tok.empty()) continue;
        if (tok == "no-condense")
            f.condense = false;
        else if (tok == "no-prefetch")
            f.prefetch = false;
        else if (tok == "schedule=huffman")
            f.schedule = ScheduleKind::Huffman;
        else if (tok == "schedule=sequential")
            f.schedule = ScheduleKind::Sequential;
        else if (tok == "schedule=random")
            f.schedule = ScheduleKind::Random;
        else
            throw ConfigError("unknown ablation flag '" + tok + "'");
    }
    return f;
}

struct HardwareConfig {
    MergerGeometry merger = MergerGeometry::two_level(4, 4);
    std::uint32_t tree_layers = 6;
    std::uint32_t fifo_depth = 64;
    std::uint32_t multipliers = 16;
    std::uint32_t column_fetchers = 64;  // concurrent right-row fetch streams
    PrefetchConfig buffer;               // 1024 lines x 48 elements x 12 B
    std::uint64_t lookahead_elements = 8192;
    std::uint32_t writer_fifo_elements = 1024;
    DramConfig dram;
    double clock_ghz = 1.0;

    std::uint32_t merge_way() const { return 1u << tree_layers; }
    double compute_roof_gflops() const { return 2.0 * multipliers * clock_ghz; }

    void validate() const {
        if (tree_layers < 1 || tree_layers > 8) throw ConfigError("tree_layers must be in [1, 8]");
        if (fifo_depth < 2 * merger.window_n)
            throw ConfigError("fifo_depth must cover two merger windows (double buffering)");
        if (multipliers == 0) throw ConfigError("multipliers must be >= 1");
        if (column_fetchers == 0) throw ConfigError("column_fetchers must be >= 1");
        if (buffer.lines == 0 || buffer.elements_per_line == 0)
            throw ConfigError("prefetch buffer must have lines and line size >= 1");
        if (lookahead_elements == 0) throw ConfigError("lookahead must be >= 1");
        if (writer_fifo_elements == 0) throw ConfigError("writer FIFO must be >= 1");
        if (dram.channels == 0 || dram.bytes_per_cycle_per_channel == 0)
            throw ConfigError("dram channels and bandwidth must be >= 1");
        if (clock_ghz <= 0) throw ConfigError("clock must be positive");
    }

    // `key=value` overrides used by --hw and by sweep axes.
    void apply_override(const std::string& key, const std::string& value) {
        auto as_u64 = [&]() -> std::uint64_t {
            try {
                std::size_t used = 0;
                std::uint64_t v = std::stoull(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::exception&) {
                throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
            }
        };
        auto as_u32 = [&]() { return static_cast<std::uint32_t>(as_u64()); };
        if (key == "tree_layers")
            tree_layers = as_u32();
        else if (key == "fifo_depth")
            fifo_depth = as_u32();
        else if (key == "multipliers")
            multipliers = as_u32();
        else if (key == "column_fetchers")
            column_fetchers = as_u32();
        else if (key == "merger_width")
            merger = MergerGeometry::flat(as_u32());
        else if (key == "merger_top")
            merger = MergerGeometry::two_level(as_u32(), merger.hierarchical ? merger.low_n : 4);
        else if (key == "merger_low")
            merger = MergerGeometry::two_level(merger.hierarchical ? merger.top_n : 4, as_u32());
        else if (key == "buffer_lines")
            buffer.lines = as_u32();
        else if (key == "buffer_line_elements")
            buffer.elements_per_line = as_u32();
        else if (key == "lookahead")
            lookahead_elements = as_u64();
        else if (key == "writer_fifo")
            writer_fifo_elements = as_u32();
        else if (key == "channels")
            dram.channels = as_u32();
        else if (key == "channel_bytes_per_cycle")
            dram.bytes_per_cycle_per_channel = as_u32();
        else if (key == "dram_latency")
            dram.latency_cycles = as_u32();
        else if (key == "clock_ghz") {
            try {
                clock_ghz = std::stod(value);
            } catch (const std::exception&) {
                throw ConfigError("bad numeric value for clock_ghz: '" + value + "'");
            }
        } else {
            throw ConfigError("unknown hardware key '" + key + "'");
        }
    }
};

}  // namespace sparch
