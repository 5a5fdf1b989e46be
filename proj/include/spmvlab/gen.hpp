#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "spmvlab/errors.hpp"
#include "spmvlab/rng.hpp"

namespace spmvlab {

enum class MatrixKind { RMAT, FD9 };

inline const char* to_string(MatrixKind kind) {
    return kind == MatrixKind::RMAT ? "rmat" : "fd9";
}

inline MatrixKind matrix_kind_from_string(const std::string& name) {
    if (name == "rmat" || name == "RMAT") return MatrixKind::RMAT;
    if (name == "fd9" || name == "FD9") return MatrixKind::FD9;
    throw invalid_spec_error("unknown matrix kind: " + name);
}

/// Quadrant probabilities for the recursive R-MAT edge drop. Defaults are
/// the Graph500 convention.
struct RmatProbs {
    double a = 0.57;
    double b = 0.19;
    double c = 0.19;
    double d = 0.05;
};

constexpr int kMinScale = 4;
constexpr int kMaxScale = 26;

/// Largest nonzero count a single matrix may carry; rowptr/colidx are 32-bit.
constexpr std::uint64_t kMaxNnz = (std::uint64_t{1} << 31);

/// Everything needed to reproduce one generated matrix.
struct GenSpec {
    MatrixKind kind = MatrixKind::RMAT;
    int scale = 10;              // matrix has 2^scale rows
    int nnz_per_row = 8;         // 8 for R-MAT, 9 for FD9
    RmatProbs probs;
    std::uint64_t seed = 0;
    bool permute = false;

    static GenSpec rmat(int scale, std::uint64_t seed = 0, bool permute = true) {
        GenSpec s;
        s.kind = MatrixKind::RMAT;
        s.scale = scale;
        s.nnz_per_row = 8;
        s.seed = seed;
        s.permute = permute;
        return s;
    }

    static GenSpec fd9(int scale, std::uint64_t seed = 0) {
        GenSpec s;
        s.kind = MatrixKind::FD9;
        s.scale = scale;
        s.nnz_per_row = 9;
        s.seed = seed;
        return s;
    }

    std::uint64_t nrows() const { return std::uint64_t{1} << scale; }
    std::uint64_t nnz() const { return static_cast<std::uint64_t>(nnz_per_row) << scale; }

    void validate() const {
        if (scale < kMinScale || scale > kMaxScale)
            throw invalid_spec_error("scale must be in [" + std::to_string(kMinScale) +
                                     ", " + std::to_string(kMaxScale) + "], got " +
                                     std::to_string(scale));
        if (nnz_per_row < 1)
            throw invalid_spec_error("nnz_per_row must be >= 1");
        if (nnz() > kMaxNnz)
            throw invalid_spec_error("requested nnz exceeds the 2^31 implementation limit");
        if (kind == MatrixKind::RMAT) {
            const double parts[4] = {probs.a, probs.b, probs.c, probs.d};
            double sum = 0.0;
            for (double p : parts) {
                if (!(p >= 0.0 && p <= 1.0))
                    throw invalid_spec_error("R-MAT probabilities must lie in [0, 1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw invalid_spec_error("R-MAT probabilities must sum to 1 (got " +
                                         std::to_string(sum) + ")");
            // Distinct (row, col) pairs are required, so the density is capped.
            if (nnz() > nrows() * nrows())
                throw infeasible_density_error("nnz " + std::to_string(nnz()) +
                                               " exceeds n^2 for scale " +
                                               std::to_string(scale));
        } else {
            if (nnz_per_row != 9)
                throw invalid_spec_error("FD9 matrices have exactly 9 nonzeros per row");
        }
    }
};

struct Triplet {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    double value = 0.0;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Unordered coordinate-form matrix; the generators' output.
struct TripletMatrix {
    std::uint64_t nrows = 0;
    std::uint64_t ncols = 0;
    std::vector<Triplet> entries;
};

/// Bijection on [0, n), stored as the image array: i -> map[i].
struct Permutation {
    std::vector<std::uint32_t> map;

    std::size_t size() const { return map.size(); }
    std::uint32_t operator()(std::uint32_t i) const { return map[i]; }

    Permutation inverse() const {
        Permutation inv;
        inv.map.resize(map.size());
        for (std::size_t i = 0; i < map.size(); ++i)
            inv.map[map[i]] = static_cast<std::uint32_t>(i);
        return inv;
    }

    static Permutation identity(std::size_t n) {
        Permutation p;
        p.map.resize(n);
        for (std::size_t i = 0; i < n; ++i) p.map[i] = static_cast<std::uint32_t>(i);
        return p;
    }
};

/// Fisher-Yates shuffle of the identity.
inline Permutation random_permutation(std::size_t n, Rng& rng) {
    Permutation p = Permutation::identity(n);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(p.map[i - 1], p.map[j]);
    }
    return p;
}

/// R-MAT generator: every edge is placed by `scale` recursive quadrant
/// choices; duplicate (row, col) pairs are resampled from scratch so the
/// output carries exactly nnz_per_row * 2^scale distinct entries.
inline TripletMatrix gen_rmat(const GenSpec& spec) {
    if (spec.kind != MatrixKind::RMAT)
        throw invalid_spec_error("gen_rmat requires kind = rmat");
    spec.validate();

    const std::uint64_t n = spec.nrows();
    const std::uint64_t m = spec.nnz();
    const double ab = spec.probs.a + spec.probs.b;
    const double abc = ab + spec.probs.c;

    TripletMatrix t;
    t.nrows = n;
    t.ncols = n;
    t.entries.reserve(m);

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(m * 2);

    Rng rng(spec.seed);
    while (t.entries.size() < m) {
        std::uint32_t row = 0, col = 0;
        for (int level = 0; level < spec.scale; ++level) {
            const double r = rng.next_double();
            row <<= 1;
            col <<= 1;
            if (r < spec.probs.a) {
                // top-left
            } else if (r < ab) {
                col |= 1;
            } else if (r < abc) {
                row |= 1;
            } else {
                row |= 1;
                col |= 1;
            }
        }
        const std::uint64_t key = (std::uint64_t{row} << 32) | col;
        if (seen.insert(key).second)
            t.entries.push_back({row, col, 1.0});
    }
    return t;
}

/// 9-point stencil on a periodic gx x gy grid, gx = 2^ceil(s/2),
/// gy = 2^floor(s/2); every row has itself plus its eight torus neighbors.
inline TripletMatrix gen_fd9(const GenSpec& spec) {
    if (spec.kind != MatrixKind::FD9)
        throw invalid_spec_error("gen_fd9 requires kind = fd9");
    spec.validate();

    const std::uint64_t gx = std::uint64_t{1} << ((spec.scale + 1) / 2);
    const std::uint64_t gy = std::uint64_t{1} << (spec.scale / 2);
    const std::uint64_t n = gx * gy;

    TripletMatrix t;
    t.nrows = n;
    t.ncols = n;
    t.entries.reserve(9 * n);

    for (std::uint64_t i = 0; i < gx; ++i) {
        for (std::uint64_t j = 0; j < gy; ++j) {
            const auto row = static_cast<std::uint32_t>(i * gy + j);
            for (int di = -1; di <= 1; ++di) {
                const std::uint64_t ni = (i + gx + static_cast<std::uint64_t>(di)) % gx;
                for (int dj = -1; dj <= 1; ++dj) {
                    const std::uint64_t nj = (j + gy + static_cast<std::uint64_t>(dj)) % gy;
                    t.entries.push_back({row, static_cast<std::uint32_t>(ni * gy + nj), 1.0});
                }
            }
        }
    }
    return t;
}

struct PermutedTriplets {
    TripletMatrix matrix;
    Permutation row_perm;
    Permutation col_perm;
};

/// Apply independent uniform row/column permutations: entry (i, j, v)
/// becomes (P(i), Q(j), v). Entry order is preserved, so the result is
/// deterministic for a fixed seed.
inline PermutedTriplets permute_random(const TripletMatrix& t, std::uint64_t seed) {
    if (t.nrows != t.ncols)
        throw shape_error("permute_random requires a square matrix");

    Rng rng(seed);
    PermutedTriplets out;
    out.row_perm = random_permutation(t.nrows, rng);
    out.col_perm = random_permutation(t.nrows, rng);
    out.matrix.nrows = t.nrows;
    out.matrix.ncols = t.ncols;
    out.matrix.entries.reserve(t.entries.size());
    for (const Triplet& e : t.entries)
        out.matrix.entries.push_back({out.row_perm(e.row), out.col_perm(e.col), e.value});
    return out;
}

// Seed offset separating the permutation stream from the edge stream.
constexpr std::uint64_t kPermuteSeedOffset = 0x9e3779b97f4a7c15ull;

/// Generate per spec; applies the random permutation when spec.permute is set.
inline TripletMatrix generate(const GenSpec& spec) {
    TripletMatrix t = spec.kind == MatrixKind::RMAT ? gen_rmat(spec) : gen_fd9(spec);
    if (spec.permute)
        t = permute_random(t, spec.seed ^ kPermuteSeedOffset).matrix;
    return t;
}

} // namespace spmvlab
