#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "spmvlab/csr.hpp"
#include "spmvlab/errors.hpp"

namespace spmvlab {

// On-disk layouts are little-endian; this library targets LE hosts.
static_assert(std::endian::native == std::endian::little,
              "binary CSR container assumes a little-endian host");

namespace detail {

inline constexpr char kCsrMagic[8] = {'S', 'P', 'M', 'V', 'C', 'S', 'R', '\0'};
inline constexpr std::uint32_t kCsrVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const char* what) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw io_error(std::string("truncated CSR container: ") + what);
}

template <typename T>
void write_array(std::ostream& os, const std::vector<T>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_array(std::istream& is, std::vector<T>& v, std::uint64_t count, const char* what) {
    v.resize(count);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(T)));
    if (!is) throw io_error(std::string("truncated CSR container: ") + what);
}

} // namespace detail

/// Binary container: magic, version, n, ncols, m, then rowptr/colidx/values.
inline void save_csr_binary(const CsrMatrix& a, std::ostream& os) {
    os.write(detail::kCsrMagic, sizeof(detail::kCsrMagic));
    detail::write_pod(os, detail::kCsrVersion);
    detail::write_pod(os, std::uint32_t{0}); // reserved
    detail::write_pod(os, a.nrows);
    detail::write_pod(os, a.ncols);
    detail::write_pod(os, static_cast<std::uint64_t>(a.nnz()));
    detail::write_array(os, a.rowptr);
    detail::write_array(os, a.colidx);
    detail::write_array(os, a.values);
    if (!os) throw io_error("failed writing CSR container");
}

inline CsrMatrix load_csr_binary(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, detail::kCsrMagic, sizeof(magic)) != 0)
        throw io_error("not a CSR container (bad magic)");

    std::uint32_t version = 0, reserved = 0;
    detail::read_pod(is, version, "version");
    detail::read_pod(is, reserved, "reserved");
    if (version != detail::kCsrVersion)
        throw io_error("unsupported CSR container version " + std::to_string(version));

    CsrMatrix a;
    std::uint64_t m = 0;
    detail::read_pod(is, a.nrows, "nrows");
    detail::read_pod(is, a.ncols, "ncols");
    detail::read_pod(is, m, "nnz");
    if (m > kMaxNnz || a.nrows > kMaxNnz)
        throw io_error("CSR container header exceeds implementation limits");
    detail::read_array(is, a.rowptr, a.nrows + 1, "rowptr");
    detail::read_array(is, a.colidx, m, "colidx");
    detail::read_array(is, a.values, m, "values");

    // Reject corrupt contents before handing the matrix out.
    if (a.rowptr.front() != 0 || a.rowptr.back() != m)
        throw io_error("corrupt CSR container: bad rowptr bounds");
    for (std::uint64_t i = 0; i < a.nrows; ++i)
        if (a.rowptr[i] > a.rowptr[i + 1])
            throw io_error("corrupt CSR container: rowptr not nondecreasing");
    for (std::uint32_t c : a.colidx)
        if (c >= a.ncols) throw io_error("corrupt CSR container: column index out of range");
    for (std::uint64_t i = 0; i < a.nrows; ++i)
        for (std::uint32_t k = a.rowptr[i] + 1; k < a.rowptr[i + 1]; ++k)
            if (a.colidx[k] <= a.colidx[k - 1])
                throw io_error("corrupt CSR container: columns not strictly increasing in a row");
    return a;
}

/// Matrix Market "coordinate real general" exchange format, 1-based indices.
inline void save_matrix_market(const CsrMatrix& a, std::ostream& os) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << a.nrows << ' ' << a.ncols << ' ' << a.nnz() << '\n';
    std::ostringstream line;
    line.precision(17);
    for (std::uint64_t i = 0; i < a.nrows; ++i) {
        for (std::uint32_t k = a.rowptr[i]; k < a.rowptr[i + 1]; ++k) {
            line.str("");
            line << (i + 1) << ' ' << (a.colidx[k] + 1) << ' ' << a.values[k] << '\n';
            os << line.str();
        }
    }
    if (!os) throw io_error("failed writing Matrix Market stream");
}

inline CsrMatrix load_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw io_error("empty Matrix Market stream");
    if (line.rfind("%%MatrixMarket", 0) != 0)
        throw io_error("missing MatrixMarket banner");
    {
        std::istringstream banner(line);
        std::string tag, object, format, field, symmetry;
        banner >> tag >> object >> format >> field >> symmetry;
        if (object != "matrix" || format != "coordinate" || field != "real" ||
            symmetry != "general")
            throw io_error("unsupported Matrix Market flavor: " + line);
    }
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream header(line);
    std::uint64_t nrows = 0, ncols = 0, m = 0;
    if (!(header >> nrows >> ncols >> m))
        throw io_error("bad Matrix Market size line");

    TripletMatrix t;
    t.nrows = nrows;
    t.ncols = ncols;
    t.entries.reserve(m);
    for (std::uint64_t k = 0; k < m; ++k) {
        std::uint64_t i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v)) throw io_error("truncated Matrix Market entries");
        if (i == 0 || j == 0 || i > nrows || j > ncols)
            throw io_error("Matrix Market entry out of range");
        t.entries.push_back({static_cast<std::uint32_t>(i - 1),
                             static_cast<std::uint32_t>(j - 1), v});
    }
    return from_triplets(t);
}

enum class MatrixFileFormat { Binary, MatrixMarket };

inline MatrixFileFormat matrix_format_for_path(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".mtx" || ext == ".mm") return MatrixFileFormat::MatrixMarket;
    return MatrixFileFormat::Binary;
}

inline void save_csr(const CsrMatrix& a, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for writing: " + path);
    if (matrix_format_for_path(path) == MatrixFileFormat::MatrixMarket)
        save_matrix_market(a, os);
    else
        save_csr_binary(a, os);
}

inline CsrMatrix load_csr(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open for reading: " + path);
    if (matrix_format_for_path(path) == MatrixFileFormat::MatrixMarket)
        return load_matrix_market(is);
    return load_csr_binary(is);
}

} // namespace spmvlab
