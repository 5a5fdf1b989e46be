#pragma once

// Test-side oracles, independent of the library implementation paths they
// check: a brute-force dense matvec and a fully-associative LRU hierarchy.

#include <cstdint>
#include <list>
#include <unordered_map>
#include <vector>

#include <spmvlab/gen.hpp>
#include <spmvlab/rng.hpp>
#include <spmvlab/trace.hpp>

namespace testsupport {

/// Dense brute-force y = A*x from the triplet form.
inline std::vector<double> dense_matvec(const spmvlab::TripletMatrix& t,
                                        const std::vector<double>& x) {
    std::vector<double> dense(t.nrows * t.ncols, 0.0);
    for (const auto& e : t.entries) dense[e.row * t.ncols + e.col] = e.value;
    std::vector<double> y(t.nrows, 0.0);
    for (std::uint64_t i = 0; i < t.nrows; ++i) {
        double acc = 0.0;
        for (std::uint64_t j = 0; j < t.ncols; ++j) acc += dense[i * t.ncols + j] * x[j];
        y[i] = acc;
    }
    return y;
}

/// Random sparse matrix with distinct entries, n <= 64-ish scale.
inline spmvlab::TripletMatrix random_triplets(std::uint64_t nrows, std::uint64_t ncols,
                                              double density, spmvlab::Rng& rng) {
    spmvlab::TripletMatrix t;
    t.nrows = nrows;
    t.ncols = ncols;
    for (std::uint64_t i = 0; i < nrows; ++i)
        for (std::uint64_t j = 0; j < ncols; ++j)
            if (rng.next_double() < density)
                t.entries.push_back({static_cast<std::uint32_t>(i),
                                     static_cast<std::uint32_t>(j),
                                     rng.next_double() * 2.0 - 1.0});
    return t;
}

/// Fully-associative LRU cache of `capacity_lines` lines.
class FullyAssocLru {
public:
    explicit FullyAssocLru(std::size_t capacity_lines) : capacity_(capacity_lines) {}

    /// Returns true on hit; fills (and evicts the LRU line) on miss.
    bool access(std::uint64_t line) {
        auto it = index_.find(line);
        if (it != index_.end()) {
            order_.splice(order_.begin(), order_, it->second);
            return true;
        }
        order_.push_front(line);
        index_[line] = order_.begin();
        if (order_.size() > capacity_) {
            index_.erase(order_.back());
            order_.pop_back();
        }
        return false;
    }

private:
    std::size_t capacity_;
    std::list<std::uint64_t> order_;
    std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> index_;
};

/// Count misses of a standalone fully-associative LRU cache on a trace.
inline std::uint64_t lru_misses(const spmvlab::AccessTrace& trace, std::size_t capacity_lines,
                                unsigned line_size = 64) {
    FullyAssocLru cache(capacity_lines);
    std::uint64_t misses = 0;
    for (const auto& e : trace.events)
        if (!cache.access(e.addr / line_size)) ++misses;
    return misses;
}

struct RefHierarchyMisses {
    std::uint64_t l1 = 0, l2 = 0, l3 = 0;
};

/// Three-level chain of fully-associative LRU caches: each level sees the
/// previous level's miss stream.
inline RefHierarchyMisses reference_hierarchy(const spmvlab::AccessTrace& trace,
                                              std::size_t l1_lines, std::size_t l2_lines,
                                              std::size_t l3_lines, unsigned line_size = 64) {
    FullyAssocLru l1(l1_lines), l2(l2_lines), l3(l3_lines);
    RefHierarchyMisses m;
    for (const auto& e : trace.events) {
        const std::uint64_t line = e.addr / line_size;
        if (l1.access(line)) continue;
        ++m.l1;
        if (l2.access(line)) continue;
        ++m.l2;
        if (l3.access(line)) continue;
        ++m.l3;
    }
    return m;
}

/// Synthetic trace of raw line-granular reads, tagged X.
inline spmvlab::AccessTrace synthetic_trace(const std::vector<std::uint64_t>& lines,
                                            unsigned line_size = 64) {
    spmvlab::AccessTrace t;
    t.events.reserve(lines.size());
    for (std::uint64_t l : lines)
        t.events.push_back({l * line_size, spmvlab::AccessKind::Read, spmvlab::StreamTag::X});
    return t;
}

} // namespace testsupport
