#pragma once

#include <cstdint>
#include <vector>

#include "sparch/csr.hpp"

namespace sparch {

// Row-wise (Gustavson) SpGEMM used as the functional reference. Structural
// entries are kept even when additive cancellation makes the value 0.0, so
// the result's sparsity pattern depends only on the input patterns.
inline CsrMatrix reference_spgemm(const CsrMatrix& a, const CsrMatrix& b) {
    if (a.num_cols != b.num_rows)
        throw ContractViolation("spgemm: inner dimensions must match");
    CsrMatrix out;
    out.num_rows = a.num_rows;
    out.num_cols = b.num_cols;
    out.row_ptr.assign(static_cast<std::size_t>(a.num_rows) + 1, 0);

    std::vector<double> acc(b.num_cols, 0.0);
    std::vector<std::uint8_t> seen(b.num_cols, 0);
    std::vector<std::uint32_t> touched;
    for (std::uint32_t r = 0; r < a.num_rows; ++r) {
        touched.clear();
        for (std::uint64_t i = a.row_ptr[r]; i < a.row_ptr[r + 1]; ++i) {
            std::uint32_t k = a.col_idx[i];
            double av = a.values[i];
            for (std::uint64_t j = b.row_ptr[k]; j < b.row_ptr[k + 1]; ++j) {
                std::uint32_t c = b.col_idx[j];
                if (!seen[c]) {
                    seen[c] = 1;
                    acc[c] = 0.0;
                    touched.push_back(c);
                }
                acc[c] += av * b.values[j];
            }
        }
        std::sort(touched.begin(), touched.end());
        for (std::uint32_t c : touched) {
            out.col_idx.push_back(c);
            out.values.push_back(acc[c]);
            seen[c] = 0;
        }
        out.row_ptr[r + 1] = out.col_idx.size();
    }
    return out;
}

// Useful multiply-add work for a·b: one multiply and one add per product.
inline std::uint64_t count_flops(const CsrMatrix& a, const CsrMatrix& b) {
    if (a.num_cols != b.num_rows)
        throw ContractViolation("count_flops: inner dimensions must match");
    std::uint64_t products = 0;
    for (std::uint64_t i = 0; i < a.nnz(); ++i) products += b.row_nnz(a.col_idx[i]);
    return 2 * products;
}

}  // namespace sparch
