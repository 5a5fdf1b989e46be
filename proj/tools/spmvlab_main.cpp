// spmvlab command line: generate matrices, run constant-work benchmarks,
// simulate the cache hierarchy, and merge/report measurement records.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <spmvlab/spmvlab.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spmvlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Write through a temp file and rename, so a failed run never leaves a
/// partially written output behind.
void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw io_error("cannot open for writing: " + path);
        fn(os);
        os.flush();
        if (!os) throw io_error("write failed: " + path);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw io_error("cannot move output into place: " + path + " (" + ec.message() + ")");
    }
}

struct MatrixOptions {
    std::string kind = "rmat";
    int scale = 10;
    std::uint64_t seed = 0;
    bool permute = false;
    bool no_permute = false;
    int nnz_per_row = 0;
    std::vector<double> probs;

    void attach(CLI::App* cmd, bool required_scale = true) {
        cmd->add_option("--kind", kind, "matrix kind: rmat or fd9")
            ->check(CLI::IsMember({"rmat", "fd9"}));
        auto* s = cmd->add_option("--scale", scale, "log2 of the row count (4..26)");
        if (required_scale) s->required();
        cmd->add_option("--seed", seed, "generator seed");
        cmd->add_flag("--permute", permute, "randomly permute rows and columns");
        cmd->add_flag("--no-permute", no_permute, "keep the natural ordering (R-MAT default is --permute)");
        cmd->add_option("--nnz-per-row", nnz_per_row, "nonzeros per row (default 8 rmat / 9 fd9)");
        cmd->add_option("--probs", probs, "R-MAT quadrant probabilities a b c d")->expected(4);
    }

    GenSpec spec() const {
        const MatrixKind k = matrix_kind_from_string(kind);
        GenSpec g = k == MatrixKind::RMAT ? GenSpec::rmat(scale, seed) : GenSpec::fd9(scale, seed);
        // R-MAT rows/columns are permuted by default, as in the study.
        if (no_permute) g.permute = false;
        if (permute) g.permute = true;
        if (nnz_per_row > 0) g.nnz_per_row = nnz_per_row;
        if (!probs.empty()) g.probs = {probs[0], probs[1], probs[2], probs[3]};
        g.validate();
        return g;
    }
};

struct CacheOptions {
    std::string preset = "sandybridge";
    std::string config_path;
    bool no_prefetch = false;
    bool no_l3 = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "cache preset: sandybridge or desk")
            ->check(CLI::IsMember({"sandybridge", "desk"}));
        cmd->add_option("--config", config_path, "cache config file (overrides --preset)");
        cmd->add_flag("--no-prefetch", no_prefetch, "disable the L2 streaming prefetcher");
        cmd->add_flag("--no-l3", no_l3, "bypass the L3: L2 misses go straight to DRAM");
    }

    CacheConfig config() const {
        CacheConfig c = config_path.empty()
                            ? (preset == "desk" ? CacheConfig::desk() : CacheConfig::sandy_bridge())
                            : load_cache_config(config_path);
        if (no_prefetch) c.prefetch.enabled = false;
        if (no_l3) c.l3_bypass = true;
        c.validate();
        return c;
    }
};

CsrMatrix load_or_generate(const std::string& matrix_path, const MatrixOptions& mat) {
    if (!matrix_path.empty()) return load_csr(matrix_path);
    return from_triplets(generate(mat.spec()));
}

json level_json(const LevelStats& s) {
    return json{{"demand_hits", s.demand_hits},
                {"demand_misses", s.demand_misses},
                {"prefetch_fills", s.prefetch_fills},
                {"prefetch_hits", s.prefetch_hits}};
}

json result_json(const SimResult& r, const RawCounters& c) {
    json j;
    j["l1"] = level_json(r.l1);
    j["l2"] = level_json(r.l2);
    j["l3"] = level_json(r.l3);
    j["dram_demand_accesses"] = r.dram_demand_accesses;
    j["dram_prefetch_accesses"] = r.dram_prefetch_accesses;
    j["l2_stall_cycles"] = r.l2_stall_cycles;
    j["compute_cycles"] = r.compute_cycles;
    j["total_cycles"] = r.total_cycles;
    j["demand_accesses"] = r.demand_accesses;
    j["counters"] = {{"l2_demand_misses", c.l2_demand_misses},
                     {"l3_demand_misses", c.l3_demand_misses},
                     {"prefetch_l2_misses", c.prefetch_l2_misses},
                     {"l2_stall_cycles", c.l2_stall_cycles},
                     {"instructions", c.instructions},
                     {"total_cycles", c.total_cycles}};
    j["metrics"] = {{"l2_miss_rate", l2_miss_rate(c)},
                    {"l3_miss_rate", l3_miss_rate(c)},
                    {"prefetch_miss_rate", prefetch_miss_rate(c)},
                    {"l2_stall_fraction", l2_stall_fraction(c)}};
    return j;
}

Provider default_provider() {
    const char* env = std::getenv("SPMVLAB_PROVIDER");
    return env ? provider_from_string(env) : Provider::Simulated;
}

int cmd_gen(const MatrixOptions& mat, const std::string& out_path) {
    const GenSpec spec = mat.spec();
    const CsrMatrix a = from_triplets(generate(spec));
    if (!out_path.empty())
        write_file_atomic(out_path, [&](std::ostream& os) {
            if (matrix_format_for_path(out_path) == MatrixFileFormat::MatrixMarket)
                save_matrix_market(a, os);
            else
                save_csr_binary(a, os);
        });
    std::cout << "kind " << to_string(spec.kind) << "\n"
              << "rows " << a.nrows << "\n"
              << "nnz " << a.nnz() << "\n"
              << "element_count " << element_count(a) << "\n"
              << "problem_bytes " << problem_bytes(a.nrows, a.nnz()) << "\n";
    if (!out_path.empty()) std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_simulate(const std::string& matrix_path, const MatrixOptions& mat,
                 const CacheOptions& cache, unsigned threads, unsigned warmup,
                 const std::string& out_path, const std::string& trace_out) {
    const CsrMatrix a = load_or_generate(matrix_path, mat);
    const CacheConfig cfg = cache.config();

    SimResult r;
    if (threads <= 1) {
        const AccessTrace trace = trace_spmv(a);
        if (!trace_out.empty())
            write_file_atomic(trace_out, [&](std::ostream& os) { save_trace(trace, os); });
        r = simulate(trace, cfg, warmup);
    } else {
        const std::vector<AccessTrace> traces = trace_spmv_blocks(a, threads);
        r = simulate_multicore(traces, cfg, warmup);
    }
    const RawCounters counters = simulated_counters(r);

    json j = result_json(r, counters);
    j["matrix"] = {{"rows", a.nrows}, {"nnz", a.nnz()}};
    j["threads"] = threads;
    j["warmup_passes"] = warmup;
    j["config"] = to_text(cfg);

    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        write_file_atomic(out_path, [&](std::ostream& os) { os << text; });
    return kExitOk;
}

int cmd_bench(const std::string& matrix_path, const MatrixOptions& mat, const CacheOptions& cache,
              BenchPlan plan, const std::string& events_path, const std::string& out_path) {
    if (!matrix_path.empty())
        plan.matrix_path = matrix_path;
    else
        plan.spec = mat.spec();
    plan.cache = cache.config();
    if (!events_path.empty()) plan.events = load_event_map(events_path);
    plan.validate();

    const std::vector<BenchRecord> records = run_bench(plan);
    auto dump = [&](std::ostream& os) {
        os << bench_csv_header() << '\n';
        for (const BenchRecord& r : records) write_bench_csv_row(os, r);
    };
    if (out_path.empty())
        dump(std::cout);
    else
        write_file_atomic(out_path, dump);
    return kExitOk;
}

int cmd_sweep(const MatrixOptions& mat, const CacheOptions& cache, BenchPlan plan,
              const std::string& events_path, int scale_begin, int scale_end,
              const std::string& out_dir) {
    plan.cache = cache.config();
    plan.spec = mat.spec();
    if (!events_path.empty()) plan.events = load_event_map(events_path);

    fs::create_directories(out_dir);
    const std::string records_path = (fs::path(out_dir) / "records.csv").string();
    std::ofstream csv(records_path);
    if (!csv) throw io_error("cannot open for writing: " + records_path);

    // The sweep streams into records.csv so an aborted run leaves the
    // completed rows plus a partial marker.
    std::vector<BenchRecord> records =
        sweep(matrix_kind_from_string(mat.kind), scale_begin, scale_end, plan, csv);
    csv.close();

    for (const std::string& metric : plot_metric_names()) {
        const std::string plot_path = (fs::path(out_dir) / ("plot_" + metric + ".csv")).string();
        write_file_atomic(plot_path,
                          [&](std::ostream& os) { write_plot_data(records, metric, os); });
    }
    std::cout << "wrote " << records_path << " (" << records.size() << " records)\n";
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, bool force, const std::string& out_path,
               const std::string& plot_dir) {
    std::vector<BenchRecord> all;
    bool any_partial = false;
    for (const std::string& path : inputs) {
        std::ifstream is(path);
        if (!is) throw io_error("cannot open for reading: " + path);
        BenchCsv parsed = read_bench_csv(is);
        any_partial = any_partial || parsed.partial;
        all.insert(all.end(), parsed.records.begin(), parsed.records.end());
    }

    std::map<std::string, int> hashes;
    for (const BenchRecord& r : all) ++hashes[r.config_hash];
    if (hashes.size() > 1 && !force) {
        std::ostringstream msg;
        msg << "inputs mix " << hashes.size()
            << " measurement configurations (config_hash values:";
        for (const auto& [h, n] : hashes) msg << ' ' << h;
        msg << "); pass --force to merge anyway";
        throw invalid_spec_error(msg.str());
    }

    std::stable_sort(all.begin(), all.end(), [](const BenchRecord& a, const BenchRecord& b) {
        if (a.metrics.kind != b.metrics.kind) return a.metrics.kind < b.metrics.kind;
        if (a.metrics.nnz != b.metrics.nnz) return a.metrics.nnz < b.metrics.nnz;
        return a.metrics.threads < b.metrics.threads;
    });

    auto dump = [&](std::ostream& os) {
        os << bench_csv_header() << '\n';
        for (const BenchRecord& r : all) write_bench_csv_row(os, r);
        if (any_partial) os << "# partial: merged from partial inputs\n";
    };
    if (out_path.empty())
        dump(std::cout);
    else
        write_file_atomic(out_path, dump);

    if (!plot_dir.empty()) {
        fs::create_directories(plot_dir);
        // Split by kind so the per-metric tables stay one curve family each.
        std::map<std::string, std::vector<BenchRecord>> by_kind;
        for (const BenchRecord& r : all) by_kind[r.metrics.kind].push_back(r);
        for (const auto& [kind, records] : by_kind)
            for (const std::string& metric : plot_metric_names()) {
                const std::string path =
                    (fs::path(plot_dir) / ("plot_" + kind + "_" + metric + ".csv")).string();
                write_file_atomic(path,
                                  [&](std::ostream& os) { write_plot_data(records, metric, os); });
            }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SpMV structure/performance laboratory"};
    app.require_subcommand(1);

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generate a matrix and write it to disk");
    MatrixOptions gen_mat;
    gen_mat.attach(gen_cmd);
    std::string gen_out;
    gen_cmd->add_option("--out,-o", gen_out, "output file (.csrb binary or .mtx Matrix Market)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run a trace through the cache simulator");
    MatrixOptions sim_mat;
    sim_mat.attach(sim_cmd, /*required_scale=*/false);
    CacheOptions sim_cache;
    sim_cache.attach(sim_cmd);
    std::string sim_matrix_path, sim_out, sim_trace_out;
    unsigned sim_threads = 1, sim_warmup = 1;
    sim_cmd->add_option("--matrix", sim_matrix_path, "matrix file (otherwise --kind/--scale)");
    sim_cmd->add_option("--threads", sim_threads, "cores to simulate (row-block partition)");
    sim_cmd->add_option("--warmup", sim_warmup, "untallied warm passes before measuring");
    sim_cmd->add_option("--out,-o", sim_out, "JSON output path (default stdout)");
    sim_cmd->add_option("--trace-out", sim_trace_out, "also dump the serial trace (binary)");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "constant-work SpMV benchmark");
    MatrixOptions bench_mat;
    bench_mat.attach(bench_cmd, /*required_scale=*/false);
    CacheOptions bench_cache;
    bench_cache.attach(bench_cmd);
    BenchPlan bench_plan;
    bench_plan.provider = default_provider();
    std::string bench_matrix_path, bench_events, bench_out, bench_provider;
    std::uint64_t bench_runs = 0;
    bench_cmd->add_option("--matrix", bench_matrix_path, "matrix file (otherwise --kind/--scale)");
    bench_cmd->add_option("--threads", bench_plan.threads, "thread counts to sweep")
        ->delimiter(',');
    bench_cmd->add_option("--runs", bench_runs, "override the 2^33/nnz run count");
    bench_cmd->add_option("--warmup", bench_plan.warmup, "untimed warmup runs");
    bench_cmd->add_option("--provider", bench_provider,
                          "counter provider: simulated or hardware (env SPMVLAB_PROVIDER)")
        ->check(CLI::IsMember({"simulated", "hardware"}));
    bench_cmd->add_option("--events", bench_events, "event map file for the hardware provider");
    bench_cmd->add_option("--out,-o", bench_out, "records CSV path (default stdout)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "bench across a range of scales");
    MatrixOptions sweep_mat;
    sweep_mat.attach(sweep_cmd, /*required_scale=*/false);
    CacheOptions sweep_cache;
    sweep_cache.attach(sweep_cmd);
    BenchPlan sweep_plan;
    sweep_plan.provider = default_provider();
    std::string sweep_events, sweep_out = "sweep_out", sweep_provider;
    std::uint64_t sweep_runs = 0;
    std::pair<int, int> sweep_scales{8, 12};
    sweep_cmd->add_option("--scales", sweep_scales, "scale range, e.g. --scales 8 14")->required();
    sweep_cmd->add_option("--threads", sweep_plan.threads, "thread counts to sweep")
        ->delimiter(',');
    sweep_cmd->add_option("--runs", sweep_runs, "override the 2^33/nnz run count");
    sweep_cmd->add_option("--warmup", sweep_plan.warmup, "untimed warmup runs");
    sweep_cmd->add_option("--provider", sweep_provider, "counter provider")
        ->check(CLI::IsMember({"simulated", "hardware"}));
    sweep_cmd->add_option("--events", sweep_events, "event map file");
    sweep_cmd->add_option("--out,-o", sweep_out, "output directory");

    // report
    auto* report_cmd = app.add_subcommand("report", "merge record files and emit plot data");
    std::vector<std::string> report_inputs;
    std::string report_out, report_plots;
    bool report_force = false;
    report_cmd->add_option("inputs", report_inputs, "records CSV files")->required();
    report_cmd->add_option("--out,-o", report_out, "merged CSV path (default stdout)");
    report_cmd->add_option("--plot-dir", report_plots, "emit per-metric plot tables here");
    report_cmd->add_flag("--force", report_force, "allow mixing config hashes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen_mat, gen_out);
        if (sim_cmd->parsed())
            return cmd_simulate(sim_matrix_path, sim_mat, sim_cache, sim_threads, sim_warmup,
                                sim_out, sim_trace_out);
        if (bench_cmd->parsed()) {
            if (bench_runs > 0) bench_plan.runs_override = bench_runs;
            if (!bench_provider.empty()) bench_plan.provider = provider_from_string(bench_provider);
            return cmd_bench(bench_matrix_path, bench_mat, bench_cache, bench_plan, bench_events,
                             bench_out);
        }
        if (sweep_cmd->parsed()) {
            if (sweep_runs > 0) sweep_plan.runs_override = sweep_runs;
            if (!sweep_provider.empty()) sweep_plan.provider = provider_from_string(sweep_provider);
            return cmd_sweep(sweep_mat, sweep_cache, sweep_plan, sweep_events, sweep_scales.first,
                             sweep_scales.second, sweep_out);
        }
        if (report_cmd->parsed())
            return cmd_report(report_inputs, report_force, report_out, report_plots);
    } catch (const invalid_spec_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
