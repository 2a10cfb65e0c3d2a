#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "sparch/csr.hpp"

namespace sparch {

// Recursive-quadrant random matrix parameters. Dimension is 2^scale square,
// edge_factor is the average targeted nnz per row; quadrant probabilities
// must sum to 1.
struct RmatParams {
    std::uint32_t scale = 10;
    std::uint32_t edge_factor = 8;
    double a = 0.57, b = 0.19, c = 0.19, d = 0.05;
};

inline void validate(const RmatParams& p) {
    if (p.scale > 30) throw std::invalid_argument("rmat: scale must be <= 30");
    if (std::abs(p.a + p.b + p.c + p.d - 1.0) > 1e-9)
        throw std::invalid_argument("rmat: quadrant probabilities must sum to 1");
    if (p.a < 0 || p.b < 0 || p.c < 0 || p.d < 0)
        throw std::invalid_argument("rmat: quadrant probabilities must be non-negative");
}

// Deterministic for a fixed (params, seed). Duplicate samples collapse to a
// single entry; values are drawn uniformly from {1,2,3,4} so that products
// and sums downstream stay integer-exact.
inline CsrMatrix rmat_generate(const RmatParams& p, std::uint64_t seed) {
    validate(p);
    const std::uint32_t n = 1u << p.scale;
    const std::uint64_t edges = static_cast<std::uint64_t>(p.edge_factor) << p.scale;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<std::uint64_t> keys;
    keys.reserve(edges);
    for (std::uint64_t e = 0; e < edges; ++e) {
        std::uint32_t r = 0, c = 0;
        for (std::uint32_t level = 0; level < p.scale; ++level) {
            double x = uni(rng);
            r <<= 1;
            c <<= 1;
            if (x < p.a) {
            } else if (x < p.a + p.b) {
                c |= 1;
            } else if (x < p.a + p.b + p.c) {
                r |= 1;
            } else {
                r |= 1;
                c |= 1;
            }
        }
        keys.push_back((static_cast<std::uint64_t>(r) << 32) | c);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    std::uniform_int_distribution<int> val(1, 4);
    std::vector<CooElement> coo;
    coo.reserve(keys.size());
    for (std::uint64_t k : keys) coo.push_back({k, static_cast<double>(val(rng))});
    return csr_from_coo(n, n, std::move(coo));
}

}  // namespace sparch
