#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "sparch/csr.hpp"

namespace sparch {

inline constexpr std::uint64_t kNoNextUse = std::numeric_limits<std::uint64_t>::max();

struct PrefetchConfig {
    std::uint32_t lines = 1024;
    std::uint32_t elements_per_line = 48;
    std::uint32_t bytes_per_element = 12;  // 4 B column index + 8 B value
    std::uint64_t line_bytes() const {
        return static_cast<std::uint64_t>(elements_per_line) * bytes_per_element;
    }
    std::uint32_t lines_for(std::uint64_t row_elems) const {
        return static_cast<std::uint32_t>((row_elems + elements_per_line - 1) / elements_per_line);
    }
};

// For each trace position, the ordinal of the next access to the same row,
// or kNoNextUse when none lies within `horizon` upcoming positions (the
// look-ahead window).
inline std::vector<std::uint64_t> next_use_distances(std::span<const std::uint32_t> trace,
                                                     std::uint64_t horizon) {
    std::vector<std::uint64_t> next(trace.size(), kNoNextUse);
    std::unordered_map<std::uint32_t, std::uint64_t> last_seen;
    last_seen.reserve(trace.size());
    for (std::size_t i = trace.size(); i-- > 0;) {
        auto it = last_seen.find(trace[i]);
        if (it != last_seen.end() && it->second - i <= horizon) next[i] = it->second;
        last_seen[trace[i]] = i;
    }
    return next;
}

struct LineTag {
    std::uint32_t row = 0;
    std::uint32_t segment = 0;
    friend constexpr bool operator==(const LineTag&, const LineTag&) = default;
};

struct AccessResult {
    std::uint32_t hit_lines = 0;
    std::uint32_t miss_lines = 0;
    std::vector<LineTag> victims;                // evictions, in the order they happened
    std::vector<std::uint32_t> missed_segments;  // segments that must be fetched
};

// Line-granular buffer for right-matrix rows. On a miss with a full buffer
// the incoming line replaces the resident line whose next use lies furthest
// in the future; ties evict the least-recently-used line, then the lowest
// slot index. Lines of the row currently streaming in are being consumed
// this very access, so they are pinned: a row never evicts itself while it
// loads (unless nothing else is resident). Rows larger than the whole
// buffer stream through without retention so they cannot flush everything
// else.
class PrefetchBuffer {
  public:
    explicit PrefetchBuffer(PrefetchConfig cfg) : cfg_(cfg), slots_(cfg.lines) {
        if (cfg.lines == 0 || cfg.elements_per_line == 0)
            throw ContractViolation("prefetch: lines and line size must be positive");
    }

    const PrefetchConfig& config() const { return cfg_; }
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }

    // One access to `row` (all of its lines at once). next_use is the trace
    // ordinal of the row's next access, or kNoNextUse outside the horizon.
    AccessResult access_row(std::uint32_t row, std::uint64_t row_elems, std::uint64_t next_use) {
        AccessResult res;
        std::uint32_t need = cfg_.lines_for(row_elems);
        if (need == 0) return res;
        ++stamp_;

        if (need > cfg_.lines) {  // stream through, no retention
            res.miss_lines = need;
            misses_ += need;
            res.missed_segments.resize(need);
            std::iota(res.missed_segments.begin(), res.missed_segments.end(), 0u);
            return res;
        }
        for (std::uint32_t seg = 0; seg < need; ++seg) {
            auto it = index_.find(pack(row, seg));
            if (it != index_.end()) {
                Slot& s = slots_[it->second];
                s.next_use = next_use;
                s.stamp = stamp_;
                ++res.hit_lines;
                ++hits_;
                continue;
            }
            ++res.miss_lines;
            ++misses_;
            res.missed_segments.push_back(seg);
            std::uint32_t slot = 0;
            if (occupied_ < cfg_.lines) {
                while (slots_[free_scan_].valid) ++free_scan_;
                slot = free_scan_;
            } else {
                std::uint32_t victim = pick_victim(row);
                res.victims.push_back(slots_[victim].tag);
                index_.erase(pack(slots_[victim].tag.row, slots_[victim].tag.segment));
                slots_[victim].valid = false;
                --occupied_;
                slot = victim;
            }
            slots_[slot] = {LineTag{row, seg}, next_use, stamp_, true};
            index_.emplace(pack(row, seg), slot);
            ++occupied_;
        }
        return res;
    }

    bool resident(std::uint32_t row, std::uint32_t seg) const {
        return index_.count(pack(row, seg)) != 0;
    }
    std::uint32_t occupied() const { return occupied_; }

  private:
    struct Slot {
        LineTag tag;
        std::uint64_t next_use = kNoNextUse;
        std::uint64_t stamp = 0;
        bool valid = false;
    };

    static std::uint64_t pack(std::uint32_t row, std::uint32_t seg) {
        return (static_cast<std::uint64_t>(row) << 32) | seg;
    }

    std::uint32_t pick_victim(std::uint32_t current_row) const {
        const std::uint32_t none = cfg_.lines;
        std::uint32_t best = none;
        auto consider = [&](std::uint32_t i) {
            if (best == none) {
                best = i;
                return;
            }
            const Slot& s = slots_[i];
            const Slot& b = slots_[best];
            if (s.next_use != b.next_use) {
                if (s.next_use > b.next_use) best = i;
            } else if (s.stamp < b.stamp) {
                best = i;
            }
        };
        for (std::uint32_t i = 0; i < cfg_.lines; ++i)
            if (slots_[i].valid && slots_[i].tag.row != current_row) consider(i);
        if (best == none)  // only the current row is resident; evict within it
            for (std::uint32_t i = 0; i < cfg_.lines; ++i)
                if (slots_[i].valid) consider(i);
        return best;
    }

    PrefetchConfig cfg_;
    std::vector<Slot> slots_;
    std::unordered_map<std::uint64_t, std::uint32_t> index_;
    std::uint32_t occupied_ = 0;
    std::uint32_t free_scan_ = 0;
    std::uint64_t stamp_ = 0;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

}  // namespace sparch
