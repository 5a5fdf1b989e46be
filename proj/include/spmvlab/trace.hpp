#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "spmvlab/csr.hpp"
#include "spmvlab/errors.hpp"

namespace spmvlab {

enum class AccessKind : std::uint8_t { Read = 0, Write = 1 };

enum class StreamTag : std::uint8_t { RowPtr = 0, ColIdx = 1, Values = 2, X = 3, Y = 4 };

constexpr unsigned kNumStreamTags = 5;

inline const char* to_string(StreamTag tag) {
    switch (tag) {
        case StreamTag::RowPtr: return "rowptr";
        case StreamTag::ColIdx: return "colidx";
        case StreamTag::Values: return "values";
        case StreamTag::X: return "x";
        case StreamTag::Y: return "y";
    }
    return "?";
}

struct MemEvent {
    std::uint64_t addr = 0;
    AccessKind kind = AccessKind::Read;
    StreamTag tag = StreamTag::RowPtr;

    friend bool operator==(const MemEvent&, const MemEvent&) = default;
};

/// Ordered memory-event stream for one SpMV pass (or one row block of it).
struct AccessTrace {
    std::vector<MemEvent> events;
    std::uint64_t nnz = 0;
    std::uint64_t nrows = 0;
};

/// Base byte addresses of the five arrays in a flat virtual address space.
/// Regions must be line-aligned and pairwise disjoint.
struct MemoryLayout {
    std::uint64_t rowptr_base = 0;
    std::uint64_t colidx_base = 0;
    std::uint64_t values_base = 0;
    std::uint64_t x_base = 0;
    std::uint64_t y_base = 0;

    /// Sequential packed layout. Every region starts in a fresh 4KB page so
    /// page-local prefetch streams never mix arrays, and consecutive
    /// regions are staggered by a few lines so their bases do not all map
    /// to cache set 0 (page-aligned bases would pile the five arrays onto
    /// the same sets and manufacture conflict misses no real allocation
    /// would show).
    static MemoryLayout packed(const CsrMatrix& a) {
        constexpr std::uint64_t page = 4096;
        constexpr std::uint64_t stagger = 7 * 64;
        auto align_up = [](std::uint64_t v) { return (v + page - 1) / page * page; };
        MemoryLayout l;
        std::uint64_t cursor = page; // keep address 0 unused
        l.rowptr_base = cursor;
        cursor = align_up(cursor + FootprintModel::index_bytes * (a.nrows + 1)) + stagger;
        l.colidx_base = cursor;
        cursor = align_up(cursor + FootprintModel::index_bytes * a.nnz()) + 2 * stagger;
        l.values_base = cursor;
        cursor = align_up(cursor + FootprintModel::value_bytes * a.nnz()) + 3 * stagger;
        l.x_base = cursor;
        cursor = align_up(cursor + FootprintModel::value_bytes * a.ncols) + 4 * stagger;
        l.y_base = cursor;
        return l;
    }

    void validate(const CsrMatrix& a, std::uint64_t line_size = 64) const {
        struct Region {
            std::uint64_t base, size;
        } regions[5] = {
            {rowptr_base, FootprintModel::index_bytes * (a.nrows + 1)},
            {colidx_base, FootprintModel::index_bytes * a.nnz()},
            {values_base, FootprintModel::value_bytes * a.nnz()},
            {x_base, FootprintModel::value_bytes * a.ncols},
            {y_base, FootprintModel::value_bytes * a.nrows},
        };
        for (const Region& r : regions)
            if (r.base % line_size != 0)
                throw layout_error("array region base not line-aligned");
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                const bool disjoint = regions[i].base + regions[i].size <= regions[j].base ||
                                      regions[j].base + regions[j].size <= regions[i].base;
                if (!disjoint) throw layout_error("array regions overlap");
            }
    }
};

namespace detail {

inline void trace_rows(const CsrMatrix& a, const MemoryLayout& l, std::uint64_t row_begin,
                       std::uint64_t row_end, AccessTrace& out) {
    constexpr std::uint64_t ib = FootprintModel::index_bytes;
    constexpr std::uint64_t vb = FootprintModel::value_bytes;
    // rowptr[row_begin] is read once up front; inside the loop only
    // rowptr[i+1] is fetched, the other bound is carried over.
    out.events.push_back({l.rowptr_base + ib * row_begin, AccessKind::Read, StreamTag::RowPtr});
    for (std::uint64_t i = row_begin; i < row_end; ++i) {
        out.events.push_back(
            {l.rowptr_base + ib * (i + 1), AccessKind::Read, StreamTag::RowPtr});
        for (std::uint32_t k = a.rowptr[i]; k < a.rowptr[i + 1]; ++k) {
            out.events.push_back({l.colidx_base + ib * k, AccessKind::Read, StreamTag::ColIdx});
            out.events.push_back({l.values_base + vb * k, AccessKind::Read, StreamTag::Values});
            out.events.push_back(
                {l.x_base + vb * a.colidx[k], AccessKind::Read, StreamTag::X});
        }
        out.events.push_back({l.y_base + vb * i, AccessKind::Write, StreamTag::Y});
    }
}

} // namespace detail

/// Memory-event stream of one serial SpMV pass: 3m + (n+1) + n events.
inline AccessTrace trace_spmv(const CsrMatrix& a, const MemoryLayout& layout) {
    layout.validate(a);
    AccessTrace t;
    t.nnz = a.nnz();
    t.nrows = a.nrows;
    t.events.reserve(3 * a.nnz() + 2 * a.nrows + 1);
    detail::trace_rows(a, layout, 0, a.nrows, t);
    return t;
}

inline AccessTrace trace_spmv(const CsrMatrix& a) { return trace_spmv(a, MemoryLayout::packed(a)); }

/// Per-core traces for the row-block partition: block b covers
/// ceil(n/cores) rows; addresses come from the shared layout.
inline std::vector<AccessTrace> trace_spmv_blocks(const CsrMatrix& a, unsigned cores,
                                                  const MemoryLayout& layout) {
    if (cores == 0) throw invalid_spec_error("core count must be >= 1");
    layout.validate(a);
    std::vector<AccessTrace> traces(cores);
    for (unsigned b = 0; b < cores; ++b) {
        const RowBlock blk = row_block(a.nrows, cores, b);
        AccessTrace& t = traces[b];
        t.nrows = blk.end - blk.begin;
        t.nnz = a.rowptr[blk.end] - a.rowptr[blk.begin];
        detail::trace_rows(a, layout, blk.begin, blk.end, t);
    }
    return traces;
}

inline std::vector<AccessTrace> trace_spmv_blocks(const CsrMatrix& a, unsigned cores) {
    return trace_spmv_blocks(a, cores, MemoryLayout::packed(a));
}

namespace detail {
inline constexpr char kTraceMagic[8] = {'S', 'P', 'M', 'V', 'T', 'R', 'C', '\0'};
inline constexpr std::uint32_t kTraceVersion = 1;
} // namespace detail

/// Trace container: header, then one 10-byte little-endian record per event
/// (u64 address, u8 kind, u8 stream tag).
inline void save_trace(const AccessTrace& t, std::ostream& os) {
    os.write(detail::kTraceMagic, sizeof(detail::kTraceMagic));
    const std::uint32_t version = detail::kTraceVersion;
    os.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t counts[3] = {t.nrows, t.nnz, t.events.size()};
    os.write(reinterpret_cast<const char*>(counts), sizeof(counts));
    for (const MemEvent& e : t.events) {
        os.write(reinterpret_cast<const char*>(&e.addr), sizeof(e.addr));
        os.put(static_cast<char>(e.kind));
        os.put(static_cast<char>(e.tag));
    }
    if (!os) throw io_error("failed writing trace");
}

inline AccessTrace load_trace(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, detail::kTraceMagic, sizeof(magic)) != 0)
        throw io_error("not a trace container (bad magic)");
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!is || version != detail::kTraceVersion)
        throw io_error("unsupported trace container version");
    std::uint64_t counts[3];
    is.read(reinterpret_cast<char*>(counts), sizeof(counts));
    if (!is) throw io_error("truncated trace header");

    AccessTrace t;
    t.nrows = counts[0];
    t.nnz = counts[1];
    t.events.resize(counts[2]);
    for (MemEvent& e : t.events) {
        char kind = 0, tag = 0;
        is.read(reinterpret_cast<char*>(&e.addr), sizeof(e.addr));
        is.get(kind);
        is.get(tag);
        if (!is) throw io_error("truncated trace events");
        if (kind > 1 || tag >= static_cast<char>(kNumStreamTags))
            throw io_error("corrupt trace record");
        e.kind = static_cast<AccessKind>(kind);
        e.tag = static_cast<StreamTag>(tag);
    }
    return t;
}

inline void save_trace(const AccessTrace& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for writing: " + path);
    save_trace(t, os);
}

inline AccessTrace load_trace(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open for reading: " + path);
    return load_trace(is);
}

} // namespace spmvlab
