#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "spmvlab/errors.hpp"
#include "spmvlab/gen.hpp"

namespace spmvlab {

/// Compressed sparse row matrix: rowptr (n+1), colidx (m, sorted within each
/// row), values (m). Indices are 32-bit, values 64-bit; this is the width
/// model the footprint arithmetic below assumes.
struct CsrMatrix {
    std::uint64_t nrows = 0;
    std::uint64_t ncols = 0;
    std::vector<std::uint32_t> rowptr;
    std::vector<std::uint32_t> colidx;
    std::vector<double> values;

    std::uint64_t nnz() const { return colidx.size(); }
};

using DenseVector = std::vector<double>;

/// Byte widths behind problem_bytes/max_nnz_fitting: 8-byte values, 4-byte
/// indices, one extra rowptr element.
struct FootprintModel {
    static constexpr std::uint64_t value_bytes = 8;
    static constexpr std::uint64_t index_bytes = 4;
    static constexpr std::uint64_t rowptr_extra_elems = 1;
};

inline CsrMatrix from_triplets(const TripletMatrix& t) {
    const std::uint64_t n = t.nrows;
    const std::uint64_t m = t.entries.size();
    if (m > kMaxNnz)
        throw invalid_spec_error("nnz exceeds the 2^31 implementation limit");

    CsrMatrix a;
    a.nrows = n;
    a.ncols = t.ncols;
    a.rowptr.assign(n + 1, 0);

    for (const Triplet& e : t.entries) {
        if (e.row >= n || e.col >= t.ncols)
            throw shape_error("triplet index out of range");
        ++a.rowptr[e.row + 1];
    }
    for (std::uint64_t i = 0; i < n; ++i) a.rowptr[i + 1] += a.rowptr[i];

    a.colidx.resize(m);
    a.values.resize(m);
    std::vector<std::uint32_t> cursor(a.rowptr.begin(), a.rowptr.end() - 1);
    for (const Triplet& e : t.entries) {
        const std::uint32_t k = cursor[e.row]++;
        a.colidx[k] = e.col;
        a.values[k] = e.value;
    }

    // Sort each row by column; values travel with their column.
    std::vector<std::pair<std::uint32_t, double>> row;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint32_t begin = a.rowptr[i], end = a.rowptr[i + 1];
        if (end - begin < 2) continue;
        row.clear();
        for (std::uint32_t k = begin; k < end; ++k) row.emplace_back(a.colidx[k], a.values[k]);
        std::sort(row.begin(), row.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        for (std::uint32_t k = begin; k < end; ++k) {
            a.colidx[k] = row[k - begin].first;
            a.values[k] = row[k - begin].second;
            if (k > begin && a.colidx[k] == a.colidx[k - 1])
                throw shape_error("duplicate (row, col) entry");
        }
    }
    return a;
}

inline TripletMatrix to_triplets(const CsrMatrix& a) {
    TripletMatrix t;
    t.nrows = a.nrows;
    t.ncols = a.ncols;
    t.entries.reserve(a.nnz());
    for (std::uint64_t i = 0; i < a.nrows; ++i)
        for (std::uint32_t k = a.rowptr[i]; k < a.rowptr[i + 1]; ++k)
            t.entries.push_back({static_cast<std::uint32_t>(i), a.colidx[k], a.values[k]});
    return t;
}

/// Total element count of the three CSR arrays: 2m + n + 1.
inline std::uint64_t element_count(const CsrMatrix& a) {
    return 2 * a.nnz() + a.nrows + 1;
}

/// Bytes the whole problem occupies (CSR arrays + x + solution vector):
/// 12m + 20n + 4 under the footprint model.
inline std::uint64_t problem_bytes(std::uint64_t n, std::uint64_t m) {
    return 12 * m + 20 * n + 4;
}

/// Largest nonzero count at r nonzeros per row such that the problem fits in
/// cache_bytes: floor((S - 4) * r / (12r + 20)).
inline std::uint64_t max_nnz_fitting(std::uint64_t cache_bytes, std::uint64_t nnz_per_row) {
    if (cache_bytes == 0 || nnz_per_row == 0)
        throw invalid_spec_error("max_nnz_fitting requires positive cache size and row density");
    if (cache_bytes <= 4) return 0;
    return (cache_bytes - 4) * nnz_per_row / (12 * nnz_per_row + 20);
}

inline void check_spmv_shapes(const CsrMatrix& a, std::span<const double> x,
                              std::span<const double> y) {
    if (x.size() != a.ncols)
        throw shape_error("x length does not match matrix column count");
    if (y.size() != a.nrows)
        throw shape_error("y length does not match matrix row count");
}

/// Serial kernel over a row range. One scalar accumulator per row, summed
/// left to right, stored once; every parallel variant reuses this exact
/// loop so results are bitwise identical.
inline void spmv_rows(const CsrMatrix& a, std::span<const double> x, std::span<double> y,
                      std::uint64_t row_begin, std::uint64_t row_end) {
    for (std::uint64_t i = row_begin; i < row_end; ++i) {
        double acc = 0.0;
        for (std::uint32_t k = a.rowptr[i]; k < a.rowptr[i + 1]; ++k)
            acc += a.values[k] * x[a.colidx[k]];
        y[i] = acc;
    }
}

inline void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
    check_spmv_shapes(a, x, y);
    spmv_rows(a, x, y, 0, a.nrows);
}

inline DenseVector spmv(const CsrMatrix& a, const DenseVector& x) {
    DenseVector y(a.nrows);
    spmv(a, std::span<const double>(x), std::span<double>(y));
    return y;
}

/// Contiguous row block b of nblocks: ceil(n/nblocks) rows each, trailing
/// blocks possibly empty.
struct RowBlock {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
};

inline RowBlock row_block(std::uint64_t nrows, unsigned nblocks, unsigned b) {
    const std::uint64_t chunk = (nrows + nblocks - 1) / nblocks;
    const std::uint64_t begin = std::min<std::uint64_t>(nrows, chunk * b);
    const std::uint64_t end = std::min<std::uint64_t>(nrows, begin + chunk);
    return {begin, end};
}

/// Row-blocked parallel kernel. Rows are split into `threads` contiguous
/// blocks; each block runs the serial loop into its own slice of y, so the
/// result is bitwise equal to spmv() for every thread count.
inline void spmv_parallel(const CsrMatrix& a, std::span<const double> x, std::span<double> y,
                          unsigned threads) {
    if (threads == 0)
        throw invalid_spec_error("thread count must be >= 1");
    check_spmv_shapes(a, x, y);

    const int nblocks = static_cast<int>(threads);
#pragma omp parallel for schedule(static) num_threads(nblocks)
    for (int b = 0; b < nblocks; ++b) {
        const RowBlock blk = row_block(a.nrows, threads, static_cast<unsigned>(b));
        spmv_rows(a, x, y, blk.begin, blk.end);
    }
}

inline DenseVector spmv_parallel(const CsrMatrix& a, const DenseVector& x, unsigned threads) {
    DenseVector y(a.nrows);
    spmv_parallel(a, std::span<const double>(x), std::span<double>(y), threads);
    return y;
}

} // namespace spmvlab
