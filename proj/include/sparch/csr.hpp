#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparch/coo.hpp"

namespace sparch {

// Thrown when a caller breaks a documented precondition or an internal
// model invariant is violated. The CLI maps this to exit code 2.
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

// Compressed sparse row storage. Within each row, column indices are
// strictly increasing; explicit (even zero-valued) entries are kept.
struct CsrMatrix {
    std::uint32_t num_rows = 0;
    std::uint32_t num_cols = 0;
    std::vector<std::uint64_t> row_ptr{0};  // length num_rows + 1
    std::vector<std::uint32_t> col_idx;
    std::vector<double> values;

    std::uint64_t nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }
    std::uint64_t row_nnz(std::uint32_t r) const { return row_ptr[r + 1] - row_ptr[r]; }

    friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

inline void validate(const CsrMatrix& m) {
    if (m.row_ptr.size() != static_cast<std::size_t>(m.num_rows) + 1)
        throw ContractViolation("csr: row_ptr length must be num_rows + 1");
    if (m.row_ptr.front() != 0) throw ContractViolation("csr: row_ptr[0] must be 0");
    for (std::uint32_t r = 0; r < m.num_rows; ++r) {
        if (m.row_ptr[r + 1] < m.row_ptr[r])
            throw ContractViolation("csr: row_ptr must be non-decreasing (row " + std::to_string(r) + ")");
        for (std::uint64_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i) {
            if (m.col_idx[i] >= m.num_cols)
                throw ContractViolation("csr: column index out of range in row " + std::to_string(r));
            if (i > m.row_ptr[r] && m.col_idx[i] <= m.col_idx[i - 1])
                throw ContractViolation("csr: column indices must be strictly increasing in row " +
                                        std::to_string(r));
        }
    }
    if (m.col_idx.size() != m.nnz() || m.values.size() != m.nnz())
        throw ContractViolation("csr: col_idx/values length must equal nnz");
}

inline std::uint64_t max_row_nnz(const CsrMatrix& m) {
    std::uint64_t best = 0;
    for (std::uint32_t r = 0; r < m.num_rows; ++r) best = std::max(best, m.row_nnz(r));
    return best;
}

// Builds CSR from arbitrary-order COO triples; duplicate coordinates are summed.
inline CsrMatrix csr_from_coo(std::uint32_t num_rows, std::uint32_t num_cols,
                              std::vector<CooElement> coo) {
    std::sort(coo.begin(), coo.end(), key_less);
    CsrMatrix m;
    m.num_rows = num_rows;
    m.num_cols = num_cols;
    m.row_ptr.assign(static_cast<std::size_t>(num_rows) + 1, 0);
    std::size_t unique = 0;
    for (std::size_t i = 0; i < coo.size();) {
        std::size_t j = i + 1;
        double sum = coo[i].value;
        while (j < coo.size() && coo[j].key == coo[i].key) sum += coo[j++].value;
        coo[unique] = {coo[i].key, sum};
        ++unique;
        i = j;
    }
    coo.resize(unique);
    m.col_idx.reserve(unique);
    m.values.reserve(unique);
    for (const CooElement& e : coo) {
        if (e.row() >= num_rows || e.col() >= num_cols)
            throw ContractViolation("csr_from_coo: coordinate out of range");
        m.row_ptr[e.row() + 1]++;
        m.col_idx.push_back(e.col());
        m.values.push_back(e.value);
    }
    for (std::uint32_t r = 0; r < num_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
}

// Builds CSR from a key-sorted, duplicate-free COO stream (no re-sort).
inline CsrMatrix csr_from_sorted_coo(std::uint32_t num_rows, std::uint32_t num_cols,
                                     std::span<const CooElement> coo) {
    CsrMatrix m;
    m.num_rows = num_rows;
    m.num_cols = num_cols;
    m.row_ptr.assign(static_cast<std::size_t>(num_rows) + 1, 0);
    m.col_idx.reserve(coo.size());
    m.values.reserve(coo.size());
    std::uint64_t prev_key = 0;
    bool first = true;
    for (const CooElement& e : coo) {
        if (!first && e.key <= prev_key)
            throw ContractViolation("csr_from_sorted_coo: keys must be strictly increasing");
        prev_key = e.key;
        first = false;
        if (e.row() >= num_rows || e.col() >= num_cols)
            throw ContractViolation("csr_from_sorted_coo: coordinate out of range");
        m.row_ptr[e.row() + 1]++;
        m.col_idx.push_back(e.col());
        m.values.push_back(e.value);
    }
    for (std::uint32_t r = 0; r < num_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
}

inline std::vector<CooElement> to_coo(const CsrMatrix& m) {
    std::vector<CooElement> out;
    out.reserve(m.nnz());
    for (std::uint32_t r = 0; r < m.num_rows; ++r)
        for (std::uint64_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i)
            out.push_back(CooElement::make(r, m.col_idx[i], m.values[i]));
    return out;
}

inline CsrMatrix identity_matrix(std::uint32_t n) {
    CsrMatrix m;
    m.num_rows = m.num_cols = n;
    m.row_ptr.resize(static_cast<std::size_t>(n) + 1);
    m.col_idx.resize(n);
    m.values.assign(n, 1.0);
    for (std::uint32_t r = 0; r < n; ++r) {
        m.row_ptr[r + 1] = r + 1;
        m.col_idx[r] = r;
    }
    return m;
}

// Result of a structural/numeric comparison; `ok` is false at the first
// mismatching coordinate (row, col) with the two values observed there.
struct CsrMismatch {
    bool ok = true;
    std::uint32_t row = 0, col = 0;
    double lhs = 0.0, rhs = 0.0;
    std::string what;
};

inline CsrMismatch csr_compare(const CsrMatrix& a, const CsrMatrix& b, double rel_tol = 0.0) {
    CsrMismatch mm;
    if (a.num_rows != b.num_rows || a.num_cols != b.num_cols) {
        mm.ok = false;
        mm.what = "dimension mismatch";
        return mm;
    }
    for (std::uint32_t r = 0; r < a.num_rows; ++r) {
        std::uint64_t ia = a.row_ptr[r], ib = b.row_ptr[r];
        while (ia < a.row_ptr[r + 1] || ib < b.row_ptr[r + 1]) {
            bool have_a = ia < a.row_ptr[r + 1], have_b = ib < b.row_ptr[r + 1];
            if (!have_a || !have_b || a.col_idx[ia] != b.col_idx[ib]) {
                mm.ok = false;
                mm.row = r;
                mm.col = have_a ? a.col_idx[ia] : b.col_idx[ib];
                mm.what = "structure mismatch";
                return mm;
            }
            double va = a.values[ia], vb = b.values[ib];
            double scale = std::max(std::abs(va), std::abs(vb));
            if (std::abs(va - vb) > rel_tol * scale) {
                mm.ok = false;
                mm.row = r;
                mm.col = a.col_idx[ia];
                mm.lhs = va;
                mm.rhs = vb;
                mm.what = "value mismatch";
                return mm;
            }
            ++ia;
            ++ib;
        }
    }
    return mm;
}

// Column-major view of a CSR matrix (used by the baseline that skips
// column condensing and iterates original non-empty columns).
struct CscIndex {
    std::vector<std::uint64_t> col_ptr;  // length num_cols + 1
    std::vector<std::uint32_t> row_idx;
    std::vector<double> values;
};

inline CscIndex build_csc(const CsrMatrix& m) {
    CscIndex c;
    c.col_ptr.assign(static_cast<std::size_t>(m.num_cols) + 1, 0);
    c.row_idx.resize(m.nnz());
    c.values.resize(m.nnz());
    for (std::uint64_t i = 0; i < m.nnz(); ++i) c.col_ptr[m.col_idx[i] + 1]++;
    for (std::uint32_t j = 0; j < m.num_cols; ++j) c.col_ptr[j + 1] += c.col_ptr[j];
    std::vector<std::uint64_t> cur(c.col_ptr.begin(), c.col_ptr.end() - 1);
    for (std::uint32_t r = 0; r < m.num_rows; ++r)
        for (std::uint64_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i) {
            std::uint64_t dst = cur[m.col_idx[i]]++;
            c.row_idx[dst] = r;
            c.values[dst] = m.values[i];
        }
    return c;
}

}  // namespace sparch
