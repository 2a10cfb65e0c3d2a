#pragma once

#include <bit>
#include <cassert>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sparch/coo.hpp"
#include "sparch/csr.hpp"

namespace sparch {

// Geometry of one comparator-array merger. A flat array of width N uses
// N*N comparators. The two-level variant splits each N = top_n * low_n
// window into top_n chunks of low_n: a top_n x top_n array pairs up chunks
// by comparing chunk maxima, and 2*top_n - 1 low_n x low_n arrays merge the
// paired chunks, so the comparator count drops to
// (2*top_n - 1)*low_n^2 + top_n^2.
struct MergerGeometry {
    std::uint32_t window_n = 16;
    std::uint32_t top_n = 4;  // 0 for flat geometry
    std::uint32_t low_n = 4;
    bool hierarchical = true;

    static MergerGeometry flat(std::uint32_t n) {
        if (n < 2) throw ContractViolation("merger: window must be >= 2");
        return {n, 0, 0, false};
    }
    static MergerGeometry two_level(std::uint32_t top, std::uint32_t low) {
        if (top < 2 || low < 1) throw ContractViolation("merger: two-level geometry needs top >= 2, low >= 1");
        return {top * low, top, low, true};
    }

    std::uint64_t comparator_count() const {
        if (!hierarchical) return static_cast<std::uint64_t>(window_n) * window_n;
        return (2ull * top_n - 1) * low_n * low_n + static_cast<std::uint64_t>(top_n) * top_n;
    }
};

// One combinational merge cycle: the N smallest elements of the two input
// windows, in key order, with equal keys taking the a-side element first.
struct MergeStepResult {
    std::vector<CooElement> committed;  // <= window_n elements
    std::uint32_t take_a = 0;           // consumed from a; take_a + take_b == committed.size()
    std::uint32_t take_b = 0;
};

namespace detail {

inline void check_window_sorted(std::span<const CooElement> w, const char* side) {
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w[i].key < w[i - 1].key)
            throw ContractViolation(std::string("merge_step: unsorted ") + side + " window");
}

}  // namespace detail

// pre: each window is a sorted prefix of its stream and holds at most N
// elements; a window shorter than N means that stream is exhausted, so all
// of its elements may commit.
inline MergeStepResult merge_step(std::span<const CooElement> a, std::span<const CooElement> b,
                                  const MergerGeometry& g) {
    if (a.size() > g.window_n || b.size() > g.window_n)
        throw ContractViolation("merge_step: window longer than merger width");
    detail::check_window_sorted(a, "a");
    detail::check_window_sorted(b, "b");

    MergeStepResult r;
    std::size_t commit = std::min<std::size_t>(g.window_n, a.size() + b.size());
    r.committed.reserve(commit);
    std::size_t ia = 0, ib = 0;
    while (r.committed.size() < commit) {
        bool from_a = ib >= b.size() || (ia < a.size() && a[ia].key <= b[ib].key);
        r.committed.push_back(from_a ? a[ia++] : b[ib++]);
    }
    r.take_a = static_cast<std::uint32_t>(ia);
    r.take_b = static_cast<std::uint32_t>(ib);
    return r;
}

namespace detail {

// Total order used by the two-level merger's chunk pairing and min/max
// bounds: key, then a-side before b-side, then stream position. This is
// exactly the order in which the flat array commits elements.
struct ElemRef {
    std::uint64_t key;
    std::uint8_t side;  // 0 = a, 1 = b
    std::uint32_t idx;
    friend constexpr bool operator<(const ElemRef& x, const ElemRef& y) {
        if (x.key != y.key) return x.key < y.key;
        if (x.side != y.side) return x.side < y.side;
        return x.idx < y.idx;
    }
};

}  // namespace detail

// Chunk-paired implementation of the same merge cycle. The top-level array
// compares chunk maxima to select boundary chunk pairs; each pair is merged
// by a low-level array whose output is clipped to a half-open [min, max)
// bound so that no element is emitted twice. Identical output contract to
// merge_step.
inline MergeStepResult hierarchical_merge_step(std::span<const CooElement> a,
                                               std::span<const CooElement> b,
                                               const MergerGeometry& g) {
    if (!g.hierarchical)
        throw ContractViolation("hierarchical_merge_step: geometry is flat");
    if (a.size() > g.window_n || b.size() > g.window_n)
        throw ContractViolation("merge_step: window longer than merger width");
    detail::check_window_sorted(a, "a");
    detail::check_window_sorted(b, "b");

    using detail::ElemRef;
    auto ref = [&](std::uint8_t side, std::uint32_t idx) {
        return ElemRef{side == 0 ? a[idx].key : b[idx].key, side, idx};
    };

    MergeStepResult r;
    std::size_t commit = std::min<std::size_t>(g.window_n, a.size() + b.size());
    if (a.empty() || b.empty()) {
        auto src = a.empty() ? b : a;
        r.committed.assign(src.begin(), src.begin() + commit);
        (a.empty() ? r.take_b : r.take_a) = static_cast<std::uint32_t>(commit);
        return r;
    }

    const std::uint32_t low = g.low_n;
    const std::uint32_t ca = static_cast<std::uint32_t>((a.size() + low - 1) / low);
    const std::uint32_t cb = static_cast<std::uint32_t>((b.size() + low - 1) / low);
    auto chunk_last = [&](std::uint8_t side, std::uint32_t chunk) {
        std::uint32_t len = static_cast<std::uint32_t>(side == 0 ? a.size() : b.size());
        return ref(side, std::min((chunk + 1) * low, len) - 1);
    };
    auto chunk_first = [&](std::uint8_t side, std::uint32_t chunk) { return ref(side, chunk * low); };

    // Staircase of boundary chunk pairs plus the min bound each new pair
    // starts at (the first element of the chunk just entered). The bounds
    // are a half-open [lo, hi) range; the extreme refs mean "unbounded".
    constexpr ElemRef kMinRef{0, 0, 0};
    constexpr ElemRef kMaxRef{~0ull, 0xff, ~0u};
    struct Pair {
        std::uint32_t i, j;
        ElemRef min_bound;
    };
    std::vector<Pair> pairs;
    pairs.push_back({0, 0, kMinRef});
    std::uint32_t i = 0, j = 0;
    while (i + 1 < ca || j + 1 < cb) {
        bool advance_a;
        if (i + 1 >= ca)
            advance_a = false;
        else if (j + 1 >= cb)
            advance_a = true;
        else
            advance_a = chunk_last(0, i) < chunk_last(1, j);
        if (advance_a)
            pairs.push_back({++i, j, chunk_first(0, i)});
        else
            pairs.push_back({i, ++j, chunk_first(1, j)});
    }

    std::vector<CooElement> merged;
    merged.reserve(a.size() + b.size());
    std::uint32_t take_a = 0, take_b = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const ElemRef lo = pairs[k].min_bound;
        const ElemRef hi = k + 1 < pairs.size() ? pairs[k + 1].min_bound : kMaxRef;
        std::uint32_t a0 = pairs[k].i * low, a1 = std::min<std::uint32_t>((pairs[k].i + 1) * low,
                                                                          static_cast<std::uint32_t>(a.size()));
        std::uint32_t b0 = pairs[k].j * low, b1 = std::min<std::uint32_t>((pairs[k].j + 1) * low,
                                                                          static_cast<std::uint32_t>(b.size()));
        std::uint32_t pa = a0, pb = b0;
        while (pa < a1 || pb < b1) {
            ElemRef cand = pb >= b1 || (pa < a1 && ref(0, pa) < ref(1, pb)) ? ref(0, pa) : ref(1, pb);
            if (cand.side == 0)
                ++pa;
            else
                ++pb;
            if (cand < lo) continue;    // below this array's min bound
            if (!(cand < hi)) continue;  // at or above the next array's bound
            merged.push_back(cand.side == 0 ? a[cand.idx] : b[cand.idx]);
            if (merged.size() <= commit) (cand.side == 0 ? take_a : take_b)++;
        }
    }
    assert(merged.size() == a.size() + b.size());
    merged.resize(commit);
    r.committed = std::move(merged);
    r.take_a = take_a;
    r.take_b = take_b;
    return r;
}

// Output of one adder cycle over a committed block: slots where a duplicate
// was folded into its successor are marked null, and the final element is
// withheld as carry so a duplicate spanning the next block can still fold.
struct AdderResult {
    std::vector<std::optional<CooElement>> slots;
    std::optional<CooElement> carry;
    std::uint64_t adds = 0;
};

// pre: block is key-sorted and carry (when present) has key <= block[0].key.
inline AdderResult adder_stage(std::span<const CooElement> block, std::optional<CooElement> carry) {
    AdderResult r;
    if (block.empty()) {
        r.carry = carry;
        return r;
    }
    detail::check_window_sorted(block, "adder block");
    if (carry && carry->key > block.front().key)
        throw ContractViolation("adder_stage: carry key exceeds block front");
    r.slots.reserve(block.size());
    CooElement cur = carry ? *carry : block.front();
    for (std::size_t i = carry ? 0 : 1; i < block.size(); ++i) {
        if (block[i].key == cur.key) {
            cur.value += block[i].value;
            ++r.adds;
            r.slots.push_back(std::nullopt);
        } else {
            r.slots.push_back(cur);
            cur = block[i];
        }
    }
    r.carry = cur;
    return r;
}

// Stable compaction of non-null slots, modelling a prefix-sum driven
// log-stage shifter: latency is ceil(log2(width)) regardless of content.
// Numeric zeros that are not null-marked are kept.
inline std::pair<std::vector<CooElement>, std::uint32_t> zero_eliminate(
    std::span<const std::optional<CooElement>> block, std::uint32_t width_n) {
    if (width_n == 0) throw ContractViolation("zero_eliminate: width must be >= 1");
    if (block.size() > width_n)
        throw ContractViolation("zero_eliminate: block longer than eliminator width");
    std::vector<CooElement> kept;
    kept.reserve(block.size());
    for (const auto& s : block)
        if (s) kept.push_back(*s);
    std::uint32_t latency = width_n <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(width_n - 1));
    return {std::move(kept), latency};
}

// Full two-stream merge through the merge_step / adder / zero-eliminator
// pipeline. steps counts merge_step invocations (ceil((|a|+|b|)/N));
// cycles adds the pipeline fill latency of the adder and shifter stages.
struct StreamingMergeResult {
    std::vector<CooElement> merged;
    std::uint64_t steps = 0;
    std::uint64_t cycles = 0;
    std::uint64_t adds = 0;
};

inline StreamingMergeResult streaming_merge(std::span<const CooElement> a,
                                            std::span<const CooElement> b,
                                            const MergerGeometry& g) {
    StreamingMergeResult out;
    out.merged.reserve(a.size() + b.size());
    std::size_t pa = 0, pb = 0;
    std::optional<CooElement> carry;
    const std::uint32_t n = g.window_n;
    while (pa < a.size() || pb < b.size()) {
        auto wa = a.subspan(pa, std::min<std::size_t>(n, a.size() - pa));
        auto wb = b.subspan(pb, std::min<std::size_t>(n, b.size() - pb));
        MergeStepResult step = merge_step(wa, wb, g);
        ++out.steps;
        pa += step.take_a;
        pb += step.take_b;
        AdderResult added = adder_stage(step.committed, carry);
        carry = added.carry;
        out.adds += added.adds;
        auto [kept, lat] = zero_eliminate(added.slots, n);
        (void)lat;
        out.merged.insert(out.merged.end(), kept.begin(), kept.end());
    }
    if (carry) out.merged.push_back(*carry);
    std::uint32_t fill = 1 + (n <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(n - 1)));
    out.cycles = out.steps == 0 ? 0 : out.steps + fill;
    return out;
}

}  // namespace sparch
