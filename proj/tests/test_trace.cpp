#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <spmvlab/gen.hpp>
#include <spmvlab/trace.hpp>

using namespace spmvlab;

TEST_CASE("trace of a 1x1 matrix has the six access-model events") {
    TripletMatrix t;
    t.nrows = t.ncols = 1;
    t.entries = {{0, 0, 2.5}};
    const CsrMatrix a = from_triplets(t);
    const MemoryLayout l = MemoryLayout::packed(a);
    const AccessTrace trace = trace_spmv(a, l);

    REQUIRE(trace.events.size() == 6);
    CHECK(trace.events[0] == MemEvent{l.rowptr_base, AccessKind::Read, StreamTag::RowPtr});
    CHECK(trace.events[1] == MemEvent{l.rowptr_base + 4, AccessKind::Read, StreamTag::RowPtr});
    CHECK(trace.events[2] == MemEvent{l.colidx_base, AccessKind::Read, StreamTag::ColIdx});
    CHECK(trace.events[3] == MemEvent{l.values_base, AccessKind::Read, StreamTag::Values});
    CHECK(trace.events[4] == MemEvent{l.x_base, AccessKind::Read, StreamTag::X});
    CHECK(trace.events[5] == MemEvent{l.y_base, AccessKind::Write, StreamTag::Y});
}

TEST_CASE("trace event count is 3m + (n+1) + n") {
    const CsrMatrix fd4 = from_triplets(gen_fd9(GenSpec::fd9(4)));
    CHECK(trace_spmv(fd4).events.size() == 3 * 144 + 17 + 16);

    for (int scale : {5, 8}) {
        const CsrMatrix a = from_triplets(generate(GenSpec::rmat(scale, 3)));
        const AccessTrace trace = trace_spmv(a);
        CHECK(trace.events.size() == 3 * a.nnz() + 2 * a.nrows + 1);
        CHECK(trace.nnz == a.nnz());
        CHECK(trace.nrows == a.nrows);
    }
}

TEST_CASE("x-stream addresses are a deterministic function of colidx") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(8, 5)));
    const MemoryLayout l = MemoryLayout::packed(a);
    const AccessTrace trace = trace_spmv(a, l);

    std::size_t k = 0;
    for (const MemEvent& e : trace.events) {
        if (e.tag != StreamTag::X) continue;
        CHECK(e.addr == l.x_base + 8 * a.colidx[k]);
        ++k;
    }
    CHECK(k == a.nnz());
}

TEST_CASE("overlapping layout regions are rejected") {
    const CsrMatrix a = from_triplets(gen_fd9(GenSpec::fd9(4)));
    MemoryLayout l = MemoryLayout::packed(a);
    l.x_base = l.values_base; // collide
    CHECK_THROWS_AS(trace_spmv(a, l), layout_error);

    MemoryLayout misaligned = MemoryLayout::packed(a);
    misaligned.y_base += 4;
    CHECK_THROWS_AS(trace_spmv(a, misaligned), layout_error);
}

TEST_CASE("per-core block traces partition the pass") {
    const CsrMatrix a = from_triplets(generate(GenSpec::rmat(8, 13)));
    const unsigned cores = 4;
    const std::vector<AccessTrace> blocks = trace_spmv_blocks(a, cores);
    REQUIRE(blocks.size() == cores);

    std::uint64_t nnz_sum = 0, rows_sum = 0;
    for (const AccessTrace& b : blocks) {
        CHECK(b.events.size() == 3 * b.nnz + 2 * b.nrows + 1);
        nnz_sum += b.nnz;
        rows_sum += b.nrows;
    }
    CHECK(nnz_sum == a.nnz());
    CHECK(rows_sum == a.nrows);

    // Concatenating the per-block x streams reproduces the serial x stream.
    const AccessTrace serial = trace_spmv(a);
    std::vector<std::uint64_t> serial_x, blocked_x;
    for (const MemEvent& e : serial.events)
        if (e.tag == StreamTag::X) serial_x.push_back(e.addr);
    for (const AccessTrace& b : blocks)
        for (const MemEvent& e : b.events)
            if (e.tag == StreamTag::X) blocked_x.push_back(e.addr);
    CHECK(serial_x == blocked_x);
}

TEST_CASE("trace container round-trips") {
    const CsrMatrix a = from_triplets(gen_fd9(GenSpec::fd9(5)));
    const AccessTrace t = trace_spmv(a);

    std::stringstream buf;
    save_trace(t, buf);
    const AccessTrace back = load_trace(buf);
    CHECK(back.nnz == t.nnz);
    CHECK(back.nrows == t.nrows);
    CHECK(back.events == t.events);
}

TEST_CASE("trace loader rejects corrupt input") {
    {
        std::stringstream buf("garbage bytes that are not a trace header....");
        CHECK_THROWS_AS(load_trace(buf), io_error);
    }
    {
        const CsrMatrix a = from_triplets(gen_fd9(GenSpec::fd9(4)));
        std::stringstream buf;
        save_trace(trace_spmv(a), buf);
        std::stringstream part(buf.str().substr(0, buf.str().size() / 2));
        CHECK_THROWS_AS(load_trace(part), io_error);
    }
}
