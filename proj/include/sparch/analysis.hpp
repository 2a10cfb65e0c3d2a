#pragma once

#include <cmath>
#include <cstdint>

#include "sparch/csr.hpp"

namespace sparch {

// Expected number of times a partial element travels to DRAM and back when
// n sorted streams are reduced by a w-way merger. Rounds t = (n-1)/(w-1);
// a uniformly random element survives into round i with probability
// (w/(w-1)) / (1/(w-1) + i), giving
//   E = (w/(w-1)) * sum_{i=1..t} 1/(1/(w-1) + i)  ~=  (w/(w-1)) * ln t.
// E counts DRAM round trips including the final write, so the re-read
// factor relative to one compulsory pass is E - 1.
struct RereadEstimate {
    double rounds = 0;      // (n-1)/(w-1), real-valued
    double exact_sum = 0;   // E via the shifted harmonic sum over ceil(rounds) terms
    double log_approx = 0;  // E via the logarithm form
};

inline RereadEstimate expected_rereads(std::uint64_t n, std::uint32_t way) {
    if (way < 2) throw ContractViolation("expected_rereads: way must be >= 2");
    RereadEstimate e;
    if (n <= way) return e;  // single round: nothing is ever re-read
    const double w = static_cast<double>(way);
    e.rounds = static_cast<double>(n - 1) / (w - 1);
    const std::uint64_t t = static_cast<std::uint64_t>(std::ceil(e.rounds - 1e-12));
    const double shift = 1.0 / (w - 1);
    double sum = 0;
    for (std::uint64_t i = 1; i <= t; ++i) sum += 1.0 / (shift + static_cast<double>(i));
    e.exact_sum = (w / (w - 1)) * sum;
    e.log_approx = (w / (w - 1)) * std::log(e.rounds);
    return e;
}

// DRAM traffic of the whole multiply-merge pipeline expressed as multiples
// of M, the number of multiplied partial elements (final output ~ 0.5 M).
// Partial results cost one write and one read per re-read round trip.
struct TrafficMultiples {
    double uncondensed = 0;  // merge every original column's partial matrix
    double outerspace = 2.5;  // write + read each partial element once, plus final
    double condensed = 0;    // merge only the condensed columns
};

inline TrafficMultiples traffic_multiples(std::uint64_t uncondensed_cols,
                                          std::uint64_t condensed_cols, std::uint32_t way) {
    TrafficMultiples t;
    // Huge round counts: the log form of E (the harmonic-sum constant is
    // dropped exactly as in the estimate this reproduces).
    RereadEstimate big = expected_rereads(uncondensed_cols, way);
    double factor_big = big.rounds > 0 ? big.log_approx - 1.0 : 0.0;
    t.uncondensed = 2.0 * std::max(factor_big, 0.0) + 0.5;
    // Few rounds: the exact sum is the honest value.
    RereadEstimate small = expected_rereads(condensed_cols, way);
    double factor_small = small.rounds > 0 ? small.exact_sum - 1.0 : 0.0;
    t.condensed = 2.0 * std::max(factor_small, 0.0) + 0.5;
    return t;
}

inline double csr_bytes(const CsrMatrix& m) {
    return 12.0 * static_cast<double>(m.nnz()) + 4.0 * (static_cast<double>(m.num_rows) + 1);
}

inline double operational_intensity(double flops, double input_bytes, double output_bytes) {
    return flops / (input_bytes + output_bytes);
}

struct RooflinePoint {
    double intensity = 0;           // useful flops per compulsory byte
    double compute_roof_gflops = 0;  // 2 flops per multiplier per cycle
    double memory_roof_gflops = 0;   // intensity * aggregate bandwidth
    double achieved_gflops = 0;
};

}  // namespace sparch
