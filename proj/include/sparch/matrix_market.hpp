#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sparch/csr.hpp"

namespace sparch {

// Parse failure in a Matrix Market file; carries the 1-based line number.
class MmParseError : public std::runtime_error {
  public:
    MmParseError(std::size_t line, const std::string& msg)
        : std::runtime_error("matrix market parse error at line " + std::to_string(line) + ": " + msg),
          line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::uint64_t parse_u64(const std::string& tok, std::size_t line, const char* what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw MmParseError(line, std::string("bad ") + what + " '" + tok + "'");
    return v;
}

inline double parse_real(const std::string& tok, std::size_t line) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty())
        throw MmParseError(line, "non-numeric value '" + tok + "'");
    return v;
}

}  // namespace detail

// Loads a coordinate-format Matrix Market file. Symmetric and
// skew-symmetric inputs are expanded to general storage, duplicate
// coordinates are summed, and pattern entries get value 1.0.
inline CsrMatrix load_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open matrix file: " + path);

    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw MmParseError(1, "empty file");
    ++lineno;
    auto banner = detail::split_ws(line);
    if (banner.size() < 4 || banner[0] != "%%MatrixMarket" || detail::lower(banner[1]) != "matrix")
        throw MmParseError(lineno, "malformed banner");
    std::string format = detail::lower(banner[2]);
    std::string field = detail::lower(banner[3]);
    std::string symmetry = banner.size() >= 5 ? detail::lower(banner[4]) : "general";
    if (format != "coordinate") throw MmParseError(lineno, "only coordinate format is supported");
    if (field == "complex" || field == "hermitian" || symmetry == "hermitian")
        throw MmParseError(lineno, "complex fields are not supported");
    if (field != "real" && field != "integer" && field != "pattern")
        throw MmParseError(lineno, "unsupported field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
        throw MmParseError(lineno, "unsupported symmetry '" + symmetry + "'");
    bool pattern = field == "pattern";
    bool symmetric = symmetry == "symmetric";
    bool skew = symmetry == "skew-symmetric";

    // size line (first non-comment, non-blank line)
    std::uint64_t rows = 0, cols = 0, entries = 0;
    for (;;) {
        if (!std::getline(in, line)) throw MmParseError(lineno + 1, "missing size line");
        ++lineno;
        if (line.empty() || line[0] == '%') continue;
        auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        if (tok.size() != 3) throw MmParseError(lineno, "size line must be 'rows cols nnz'");
        rows = detail::parse_u64(tok[0], lineno, "row count");
        cols = detail::parse_u64(tok[1], lineno, "column count");
        entries = detail::parse_u64(tok[2], lineno, "entry count");
        break;
    }
    if (rows > 0xffffffffull || cols > 0xffffffffull)
        throw MmParseError(lineno, "matrix dimensions exceed 32-bit index range");

    std::vector<CooElement> coo;
    coo.reserve(entries * (symmetric || skew ? 2 : 1));
    std::uint64_t seen = 0;
    while (seen < entries) {
        if (!std::getline(in, line)) throw MmParseError(lineno + 1, "unexpected end of file");
        ++lineno;
        if (line.empty() || line[0] == '%') continue;
        auto tok = detail::split_ws(line);
        if (tok.empty()) continue;
        std::size_t want = pattern ? 2 : 3;
        if (tok.size() != want) throw MmParseError(lineno, "entry must have " + std::to_string(want) + " fields");
        std::uint64_t r = detail::parse_u64(tok[0], lineno, "row index");
        std::uint64_t c = detail::parse_u64(tok[1], lineno, "column index");
        if (r < 1 || r > rows || c < 1 || c > cols)
            throw MmParseError(lineno, "index out of range");
        double v = pattern ? 1.0 : detail::parse_real(tok[2], lineno);
        std::uint32_t r0 = static_cast<std::uint32_t>(r - 1), c0 = static_cast<std::uint32_t>(c - 1);
        coo.push_back(CooElement::make(r0, c0, v));
        if ((symmetric || skew) && r0 != c0)
            coo.push_back(CooElement::make(c0, r0, skew ? -v : v));
        ++seen;
    }
    return csr_from_coo(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols),
                        std::move(coo));
}

namespace detail {

// Shortest round-trip decimal form of a double.
inline std::string format_value(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace detail

// Writes general coordinate real format with 1-based indices; loading the
// file back reproduces the matrix exactly.
inline void write_matrix_market(const CsrMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.num_rows << ' ' << m.num_cols << ' ' << m.nnz() << '\n';
    for (std::uint32_t r = 0; r < m.num_rows; ++r)
        for (std::uint64_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i)
            out << (r + 1) << ' ' << (m.col_idx[i] + 1) << ' ' << detail::format_value(m.values[i])
                << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace sparch
