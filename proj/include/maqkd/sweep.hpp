#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "maqkd/config_io.hpp"
#include "maqkd/montecarlo.hpp"
#include "maqkd/regions.hpp"
#include "maqkd/rates.hpp"

namespace maqkd {

enum class ProtocolKind { bb84, mdi, ma_mdi, all };

inline const char* protocol_name(ProtocolKind p) {
    switch (p) {
        case ProtocolKind::bb84: return "bb84";
        case ProtocolKind::mdi: return "mdi";
        case ProtocolKind::ma_mdi: return "ma_mdi";
        default: return "all";
    }
}

struct RunConfig {
    ProtocolKind protocol = ProtocolKind::all;
    double dmin_km = 0.0;
    double dmax_km = 500.0;
    double dstep_km = 1.0;
    std::vector<double> tau_pi_list;   // empty: use the config value
    std::vector<double> t2_list;       // empty: use the config value
    int mux_wavelength = 1;
    int mux_polarization = 1;
    long long rounds = 1000000;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int workers = 1;
    bool pipelining = false;
    std::string out_dir = ".";
};

inline std::vector<double> distance_grid(const RunConfig& run) {
    if (!(run.dstep_km > 0.0) || run.dmax_km < run.dmin_km || run.dmin_km < 0.0)
        throw std::domain_error("sweep: need dmin >= 0, dmax >= dmin, dstep > 0");
    const auto n = static_cast<std::size_t>(
        std::floor((run.dmax_km - run.dmin_km) / run.dstep_km + 1e-9)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = run.dmin_km + static_cast<double>(i) * run.dstep_km;
    return grid;
}

namespace sweep_detail {

inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Deterministic work distribution: worker w takes items w, w + W, w + 2W, ...
// into a preallocated slot per item, so the assembled result does not depend
// on the worker count.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
    const int w = std::max(1, workers);
    if (w == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < w; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t i = static_cast<std::size_t>(t); i < n;
                     i += static_cast<std::size_t>(w))
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("sweep: cannot open " + path.string() + " for writing");
    out << content;
}

inline std::string csv_from_curve(const RateCurve& curve) {
    std::string out = "distance_km,skr_bits_per_s,yield_per_round,qber_x,qber_z,"
                      "cycle_time_s,region\n";
    for (const auto& p : curve.points) {
        out += fmt9(p.distance_km);
        out += ',';
        out += fmt9(p.skr_bits_per_s);
        out += ',';
        out += fmt9(p.yield_per_round);
        out += ',';
        out += fmt9(p.qber_x);
        out += ',';
        out += fmt9(p.qber_z);
        out += ',';
        out += fmt9(p.cycle_time_s);
        out += ',';
        out += region_name(p.region);
        out += '\n';
    }
    return out;
}

} // namespace sweep_detail

struct CurveResult {
    RateCurve curve;
    RegionReport regions;
};

struct CrossoverRow {
    std::string curve_a;
    std::string curve_b;
    std::optional<double> distance_km;
};

struct SweepResult {
    std::vector<CurveResult> curves;
    std::vector<CrossoverRow> crossovers;
    std::vector<std::string> files_written;
};

// Compute one labeled curve over the grid using the point function.
inline RateCurve build_curve(const std::string& label, const ProtocolConfig& cfg,
                             const std::vector<double>& grid, int workers,
                             RatePoint (*point_fn)(const ProtocolConfig&, double)) {
    RateCurve curve;
    curve.label = label;
    curve.config_digest = config_digest(cfg);
    curve.points.resize(grid.size());
    sweep_detail::parallel_for(grid.size(), workers, [&](std::size_t i) {
        curve.points[i] = point_fn(cfg, grid[i]);
    });
    return curve;
}

// Run every requested curve, classify regions, find crossovers against the
// direct-transmission references, and write one CSV per curve plus the
// regions summary, the crossover table, and a manifest that pins the full
// effective parameter set. All outputs are deterministic byte for byte.
inline SweepResult run_sweep(const RunConfig& run, const ParsedConfig& parsed) {
    namespace fs = std::filesystem;
    using sweep_detail::fmt9;

    const std::vector<double> grid = distance_grid(run);
    SweepResult result;
    fs::create_directories(run.out_dir);

    const bool want_bb84 =
        run.protocol == ProtocolKind::bb84 || run.protocol == ProtocolKind::all;
    const bool want_mdi =
        run.protocol == ProtocolKind::mdi || run.protocol == ProtocolKind::all;
    const bool want_ma =
        run.protocol == ProtocolKind::ma_mdi || run.protocol == ProtocolKind::all;

    const double alpha = parsed.cfg.link.fiber.attenuation_db_per_km;

    std::size_t bb84_index = 0, mdi_index = 0;
    if (want_bb84) {
        bb84_index = result.curves.size();
        RateCurve c = build_curve("bb84", parsed.cfg, grid, run.workers, &skr_bb84);
        RegionReport rep = classify_regions(c, alpha);
        result.curves.push_back(CurveResult{std::move(c), rep});
    }
    if (want_mdi) {
        mdi_index = result.curves.size();
        RateCurve c = build_curve("mdi", parsed.cfg, grid, run.workers, &skr_mdi);
        RegionReport rep = classify_regions(c, alpha);
        result.curves.push_back(CurveResult{std::move(c), rep});
    }

    std::vector<std::size_t> ma_indices;
    if (want_ma) {
        const std::vector<double> taus =
            run.tau_pi_list.empty() ? std::vector<double>{parsed.cfg.device.tau_pi}
                                    : run.tau_pi_list;
        const std::vector<double> t2s =
            run.t2_list.empty() ? std::vector<double>{parsed.cfg.device.decoherence.t2_dephase}
                                : run.t2_list;
        for (double tau_pi : taus) {
            for (double t2 : t2s) {
                ParsedConfig variant = parsed;
                variant.cfg.device.tau_pi = tau_pi;
                variant.cfg.device.decoherence.t2_dephase = t2;
                finalize(variant);   // re-derive tau_init, cutoff unless pinned
                const std::string label = "ma_mdi_taupi_" + config_detail::render_double(tau_pi)
                                          + "_t2_" + config_detail::render_double(t2)
                                          + "_mux_" + std::to_string(run.mux_wavelength) + "x"
                                          + std::to_string(run.mux_polarization);
                RateCurve c = build_curve(label, variant.cfg, grid, run.workers, &skr_ma_mdi);
                c = apply_multiplexing(c, run.mux_wavelength, run.mux_polarization);
                RegionReport rep = classify_regions(c, alpha);
                ma_indices.push_back(result.curves.size());
                result.curves.push_back(CurveResult{std::move(c), rep});
            }
        }
    }

    for (std::size_t mi : ma_indices) {
        if (want_bb84)
            result.crossovers.push_back(CrossoverRow{
                result.curves[mi].curve.label, "bb84",
                crossover_distance(result.curves[mi].curve, result.curves[bb84_index].curve)});
        if (want_mdi)
            result.crossovers.push_back(CrossoverRow{
                result.curves[mi].curve.label, "mdi",
                crossover_distance(result.curves[mi].curve, result.curves[mdi_index].curve)});
    }

    for (const auto& cr : result.curves) {
        const fs::path path = fs::path(run.out_dir) / (cr.curve.label + ".csv");
        sweep_detail::write_file(path, sweep_detail::csv_from_curve(cr.curve));
        result.files_written.push_back(path.string());
    }

    {
        std::string out = "curve,boundary_i_ii_km,boundary_ii_iii_km,"
                          "median_slope_i,median_slope_ii,ordered,tolerance\n";
        for (const auto& cr : result.curves) {
            const auto& r = cr.regions;
            out += cr.curve.label;
            out += ',';
            out += r.boundary_i_ii_km ? fmt9(*r.boundary_i_ii_km) : std::string("none");
            out += ',';
            out += r.boundary_ii_iii_km ? fmt9(*r.boundary_ii_iii_km) : std::string("none");
            out += ',';
            out += r.median_slope_i ? fmt9(*r.median_slope_i) : std::string("none");
            out += ',';
            out += r.median_slope_ii ? fmt9(*r.median_slope_ii) : std::string("none");
            out += ',';
            out += r.ordered ? "yes" : "no";
            out += ',';
            out += fmt9(r.tolerance);
            out += '\n';
        }
        const fs::path path = fs::path(run.out_dir) / "regions.csv";
        sweep_detail::write_file(path, out);
        result.files_written.push_back(path.string());
    }

    {
        std::string out = "curve_a,curve_b,crossover_km\n";
        for (const auto& row : result.crossovers) {
            out += row.curve_a;
            out += ',';
            out += row.curve_b;
            out += ',';
            out += row.distance_km ? fmt9(*row.distance_km) : std::string("none");
            out += '\n';
        }
        const fs::path path = fs::path(run.out_dir) / "crossover.csv";
        sweep_detail::write_file(path, out);
        result.files_written.push_back(path.string());
    }

    {
        std::ostringstream m;
        m << "# sweep manifest: effective parameters and run description\n";
        char digest[32];
        std::snprintf(digest, sizeof digest, "%016llx",
                      static_cast<unsigned long long>(config_digest(parsed.cfg)));
        m << "config_digest = " << digest << "\n";
        m << "protocol = " << protocol_name(run.protocol) << "\n";
        m << "dmin_km = " << fmt9(run.dmin_km) << "\n";
        m << "dmax_km = " << fmt9(run.dmax_km) << "\n";
        m << "dstep_km = " << fmt9(run.dstep_km) << "\n";
        m << "tau_pi_list =";
        if (run.tau_pi_list.empty()) {
            m << " (config)";
        } else {
            for (double v : run.tau_pi_list) m << ' ' << config_detail::render_double(v);
        }
        m << "\n";
        m << "t2_list =";
        if (run.t2_list.empty()) {
            m << " (config)";
        } else {
            for (double v : run.t2_list) m << ' ' << config_detail::render_double(v);
        }
        m << "\n";
        m << "mux = " << run.mux_wavelength << "x" << run.mux_polarization
          << " (memory-assisted curves only)\n";
        m << "region_tolerance = 0.3\n";
        m << "columns = distance_km,skr_bits_per_s,yield_per_round,qber_x,qber_z,"
             "cycle_time_s,region\n";
        m << "# full effective configuration (SI base units)\n";
        m << render_config(parsed.cfg);
        for (const auto& w : parsed.warnings) m << "# " << w << "\n";
        const fs::path path = fs::path(run.out_dir) / "manifest.txt";
        sweep_detail::write_file(path, m.str());
        result.files_written.push_back(path.string());
    }

    return result;
}

struct McRunResult {
    std::string report;
    bool validation_failed = false;
    bool insufficient_data = false;
    std::vector<std::string> files_written;
};

// Validate the node simulation against the renewal model: every (distance,
// seed) pair runs independently, per-seed z-scores are tabulated, and a
// metric fails a distance when the majority of seeds with enough data put
// it beyond three standard errors. Distances with no usable samples at all
// are reported as insufficient data, which is not a validation failure.
inline McRunResult run_montecarlo(const RunConfig& run, const ParsedConfig& parsed) {
    namespace fs = std::filesystem;
    using sweep_detail::fmt9;

    if (run.seeds.empty())
        throw std::domain_error("montecarlo: need at least one seed");
    const std::vector<double> grid = distance_grid(run);
    const std::size_t nd = grid.size();
    const std::size_t ns = run.seeds.size();

    std::vector<NodeSimParams> params(nd);
    for (std::size_t i = 0; i < nd; ++i)
        params[i] = node_sim_params(parsed.cfg, grid[i], run.pipelining);

    std::vector<TrialStats> stats(nd * ns);
    sweep_detail::parallel_for(nd * ns, run.workers, [&](std::size_t idx) {
        const std::size_t di = idx / ns;
        const std::size_t si = idx % ns;
        stats[idx] = simulate_node(params[di], run.rounds, run.seeds[si]);
    });

    McRunResult result;
    std::ostringstream rep;
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(config_digest(parsed.cfg)));
    rep << "# monte carlo validation report\n";
    rep << "config_digest = " << digest << "\n";
    rep << "pipelining = " << (run.pipelining ? "on" : "off") << "\n";
    rep << "rounds_per_seed = " << run.rounds << "\n";
    rep << "seeds =";
    for (auto s : run.seeds) rep << ' ' << s;
    rep << "\n";

    bool any_fail = false;
    bool all_insufficient = true;
    for (std::size_t di = 0; di < nd; ++di) {
        rep << "\ndistance_km = " << fmt9(grid[di]) << "\n";
        const CycleModel model = cycle_model(params[di]);
        const QberPair q_exp = simulated_qber_expectation(params[di]);
        rep << "  analytic: yield_per_round=" << fmt9(model.yield_per_round())
            << " mean_wait_rounds=" << fmt9(model.mean_wait_completed)
            << " qber_x=" << fmt9(q_exp.e_x) << " qber_z=" << fmt9(q_exp.e_z) << "\n";

        TrialStats merged = stats[di * ns];
        for (std::size_t si = 1; si < ns; ++si) merged = merge(merged, stats[di * ns + si]);
        rep << "  merged: rounds=" << merged.rounds_simulated
            << " cycles=" << merged.n_cycles
            << " successes=" << merged.bsm_successes
            << " timeouts=" << merged.timeouts
            << " dark_heralds=" << merged.dark_heralds
            << " x_pairs=" << merged.x_pairs
            << " z_pairs=" << merged.z_pairs << "\n";

        // metric name -> (fail votes, seeds with data)
        std::vector<std::string> names;
        std::vector<int> votes_fail, votes_total;
        bool distance_has_data = false;
        for (std::size_t si = 0; si < ns; ++si) {
            const ComparisonReport cr = compare_to_analytic(stats[di * ns + si], params[di]);
            rep << "  seed " << run.seeds[si] << ":";
            for (std::size_t mi = 0; mi < cr.metrics.size(); ++mi) {
                const auto& mc = cr.metrics[mi];
                if (names.size() <= mi) {
                    names.push_back(mc.name);
                    votes_fail.push_back(0);
                    votes_total.push_back(0);
                }
                rep << ' ' << mc.name << "=";
                if (!mc.sufficient) {
                    rep << "n/a";
                    continue;
                }
                distance_has_data = true;
                votes_total[mi] += 1;
                char zbuf[32];
                std::snprintf(zbuf, sizeof zbuf, "%+.3f", mc.z);
                rep << zbuf;
                if (std::abs(mc.z) > 3.0) {
                    votes_fail[mi] += 1;
                    rep << "!";
                }
            }
            rep << "\n";
        }

        if (!distance_has_data) {
            rep << "  verdict: insufficient data\n";
            continue;
        }
        all_insufficient = false;
        bool distance_fail = false;
        for (std::size_t mi = 0; mi < names.size(); ++mi) {
            if (votes_total[mi] > 0 && 2 * votes_fail[mi] > votes_total[mi]) {
                distance_fail = true;
                rep << "  metric " << names[mi] << ": majority of seeds beyond 3 sigma ("
                    << votes_fail[mi] << "/" << votes_total[mi] << ")\n";
            }
        }
        rep << "  verdict: " << (distance_fail ? "FAIL" : "ok") << "\n";
        any_fail = any_fail || distance_fail;
    }

    result.validation_failed = any_fail;
    result.insufficient_data = all_insufficient;
    rep << "\noverall: "
        << (any_fail ? "FAIL" : (all_insufficient ? "insufficient data" : "ok")) << "\n";
    result.report = rep.str();

    fs::create_directories(run.out_dir);
    const fs::path path = fs::path(run.out_dir) / "montecarlo_report.txt";
    sweep_detail::write_file(path, result.report);
    result.files_written.push_back(path.string());
    return result;
}

} // namespace maqkd
