#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sparch/csr.hpp"

namespace sparch {

struct DramConfig {
    std::uint32_t channels = 16;
    std::uint32_t bytes_per_cycle_per_channel = 8;  // 8 GB/s per channel at 1 GHz
    std::uint32_t latency_cycles = 64;
    std::uint64_t aggregate_bytes_per_cycle() const {
        return static_cast<std::uint64_t>(channels) * bytes_per_cycle_per_channel;
    }
};

enum class TrafficCategory { LeftMatrix, RightMatrix, PartialResults, FinalResults };

struct TrafficCounters {
    std::uint64_t read_left = 0;
    std::uint64_t read_right = 0;
    std::uint64_t read_partial = 0;
    std::uint64_t read_final = 0;
    std::uint64_t write_partial = 0;
    std::uint64_t write_final = 0;
    std::uint64_t hit_lines = 0;
    std::uint64_t miss_lines = 0;

    std::uint64_t total_read() const { return read_left + read_right + read_partial + read_final; }
    std::uint64_t total_write() const { return write_partial + write_final; }
    std::uint64_t total() const { return total_read() + total_write(); }

    void add_read(TrafficCategory c, std::uint64_t bytes) {
        switch (c) {
            case TrafficCategory::LeftMatrix: read_left += bytes; break;
            case TrafficCategory::RightMatrix: read_right += bytes; break;
            case TrafficCategory::PartialResults: read_partial += bytes; break;
            case TrafficCategory::FinalResults: read_final += bytes; break;
        }
    }
    void add_write(TrafficCategory c, std::uint64_t bytes) {
        switch (c) {
            case TrafficCategory::PartialResults: write_partial += bytes; break;
            case TrafficCategory::FinalResults: write_final += bytes; break;
            default: throw ContractViolation("traffic: writes are partial or final only");
        }
    }
};

// Fraction of prefetch-buffer line lookups that hit; absent when the run
// performed no lookups at all.
inline std::optional<double> hit_rate(const TrafficCounters& c) {
    std::uint64_t total = c.hit_lines + c.miss_lines;
    if (total == 0) return std::nullopt;
    return static_cast<double>(c.hit_lines) / static_cast<double>(total);
}

// Interleave row segments across channels so consecutive segments of one
// row land on different channels.
inline std::uint32_t map_address_to_channel(std::uint32_t row_id, std::uint32_t segment,
                                            const DramConfig& cfg) {
    return (row_id + segment) % cfg.channels;
}

// Per-channel queueing model: a request occupies its channel for the
// transfer cycles only; the fixed latency overlaps with other requests.
class DramModel {
  public:
    explicit DramModel(DramConfig cfg) : cfg_(cfg), free_at_(cfg.channels, 0), busy_(cfg.channels, 0) {
        if (cfg.channels == 0 || cfg.bytes_per_cycle_per_channel == 0)
            throw ContractViolation("dram: channels and per-channel bandwidth must be positive");
    }

    const DramConfig& config() const { return cfg_; }

    // Returns the cycle at which the requested bytes are available
    // (start + latency + transfer). Advances the channel's busy window by
    // the transfer cycles.
    std::uint64_t submit(std::uint64_t now, std::uint32_t channel, std::uint64_t bytes) {
        if (channel >= cfg_.channels) throw ContractViolation("dram: channel out of range");
        std::uint64_t transfer =
            (bytes + cfg_.bytes_per_cycle_per_channel - 1) / cfg_.bytes_per_cycle_per_channel;
        std::uint64_t start = std::max(now, free_at_[channel]);
        free_at_[channel] = start + transfer;
        busy_[channel] += transfer;
        return start + cfg_.latency_cycles + transfer;
    }

    std::uint64_t channel_free_at(std::uint32_t channel) const { return free_at_[channel]; }
    std::uint64_t busy_cycles(std::uint32_t channel) const { return busy_[channel]; }
    std::uint64_t max_busy_cycles() const {
        std::uint64_t best = 0;
        for (std::uint64_t b : busy_) best = std::max(best, b);
        return best;
    }

  private:
    DramConfig cfg_;
    std::vector<std::uint64_t> free_at_;
    std::vector<std::uint64_t> busy_;
};

}  // namespace sparch
