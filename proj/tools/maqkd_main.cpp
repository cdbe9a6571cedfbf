// Command line front end: parameter sweeps, Monte Carlo validation, region
// classification, and crossover lookup for the memory-assisted MDI-QKD
// simulator. Exit codes: 0 success, 1 configuration error, 2 runtime domain
// error, 3 Monte Carlo validation failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "maqkd/config_io.hpp"
#include "maqkd/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDomain = 2;
constexpr int kExitValidation = 3;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw maqkd::ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) parts.push_back(cur);
    return parts;
}

std::vector<double> parse_time_list(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    for (const auto& part : split_commas(s))
        out.push_back(maqkd::parse_time_quantity(part, flag));
    if (out.empty()) throw maqkd::ConfigError("config: empty list for " + flag);
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& part : split_commas(s)) {
        try {
            out.push_back(std::stoull(part));
        } catch (const std::exception&) {
            throw maqkd::ConfigError("config: bad seed '" + part + "'");
        }
    }
    if (out.empty()) throw maqkd::ConfigError("config: empty seed list");
    return out;
}

void parse_mux(const std::string& s, int& nw, int& np) {
    const auto x = s.find('x');
    if (x == std::string::npos)
        throw maqkd::ConfigError("config: --mux expects <wavelengths>x<polarizations>");
    try {
        nw = std::stoi(s.substr(0, x));
        np = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        throw maqkd::ConfigError("config: --mux expects <wavelengths>x<polarizations>");
    }
    if (nw < 1 || np < 1)
        throw maqkd::ConfigError("config: multiplexing counts must be >= 1");
}

maqkd::ProtocolKind parse_protocol(const std::string& s) {
    if (s == "bb84") return maqkd::ProtocolKind::bb84;
    if (s == "mdi") return maqkd::ProtocolKind::mdi;
    if (s == "ma_mdi") return maqkd::ProtocolKind::ma_mdi;
    if (s == "all") return maqkd::ProtocolKind::all;
    throw maqkd::ConfigError("config: unknown protocol '" + s + "'");
}

int default_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secure key rate simulator for fiber QKD with a memory-assisted"
                 " midpoint node"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::string protocol_str = "all";
    std::string tau_pi_str, t2_str, mux_str = "1x1", seeds_str;
    double dmin = 0.0, dmax = 500.0, dstep = 1.0;
    long long rounds = 1000000;
    int workers = default_workers();
    bool pipelining = false;

    auto add_common = [&](CLI::App* sub, bool with_grid) {
        sub->add_option("--config", config_path, "parameter file (key = value)");
        if (with_grid) {
            sub->add_option("--dmin", dmin, "first distance, km");
            sub->add_option("--dmax", dmax, "last distance, km");
            sub->add_option("--dstep", dstep, "grid step, km");
        }
        sub->add_option("--workers", workers, "worker threads");
    };

    CLI::App* sweep = app.add_subcommand("sweep", "rate curves over distance");
    add_common(sweep, true);
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--protocol", protocol_str, "bb84, mdi, ma_mdi, or all");
    sweep->add_option("--tau-pi", tau_pi_str, "comma list of pi-pulse durations (e.g. 10ns,100ns)");
    sweep->add_option("--t2", t2_str, "comma list of dephasing times (e.g. 10ms,1s)");
    sweep->add_option("--mux", mux_str, "wavelength x polarization channels, e.g. 4x2");

    CLI::App* mc = app.add_subcommand("montecarlo", "validate the node simulation");
    add_common(mc, true);
    mc->add_option("--out", out_dir, "output directory");
    mc->add_option("--rounds", rounds, "rounds per seed");
    mc->add_option("--seeds", seeds_str, "comma list of seeds");
    mc->add_flag("--pipelining", pipelining, "overlap readout with the second device");

    CLI::App* regions = app.add_subcommand("regions", "print region boundaries");
    add_common(regions, true);
    regions->add_option("--protocol", protocol_str, "bb84, mdi, ma_mdi, or all");
    regions->add_option("--tau-pi", tau_pi_str, "comma list of pi-pulse durations");
    regions->add_option("--t2", t2_str, "comma list of dephasing times");

    CLI::App* crossover = app.add_subcommand("crossover",
                                             "memory-assisted vs direct crossover distances");
    add_common(crossover, true);
    crossover->add_option("--tau-pi", tau_pi_str, "comma list of pi-pulse durations");
    crossover->add_option("--t2", t2_str, "comma list of dephasing times");

    CLI::App* defaults = app.add_subcommand("print-defaults", "canonical default parameters");
    (void)defaults;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (defaults->parsed()) {
            std::cout << maqkd::render_config(maqkd::default_protocol_config());
            return kExitOk;
        }

        maqkd::ParsedConfig parsed =
            maqkd::parse_config(config_path.empty() ? "" : read_text_file(config_path));
        for (const auto& w : parsed.warnings) std::cerr << w << "\n";

        maqkd::RunConfig run;
        run.protocol = parse_protocol(protocol_str);
        run.dmin_km = dmin;
        run.dmax_km = dmax;
        run.dstep_km = dstep;
        if (!tau_pi_str.empty()) run.tau_pi_list = parse_time_list(tau_pi_str, "--tau-pi");
        if (!t2_str.empty()) run.t2_list = parse_time_list(t2_str, "--t2");
        parse_mux(mux_str, run.mux_wavelength, run.mux_polarization);
        run.rounds = rounds;
        if (!seeds_str.empty()) run.seeds = parse_seed_list(seeds_str);
        run.workers = workers;
        run.pipelining = pipelining;
        run.out_dir = out_dir;

        if (sweep->parsed()) {
            const maqkd::SweepResult result = maqkd::run_sweep(run, parsed);
            for (const auto& f : result.files_written) std::cout << "wrote " << f << "\n";
            return kExitOk;
        }

        if (mc->parsed()) {
            if (!mc->count("--dmin") && !mc->count("--dmax")) {
                run.dmin_km = 100.0;
                run.dmax_km = 100.0;
            } else if (!mc->count("--dmax")) {
                run.dmax_km = run.dmin_km;
            }
            const maqkd::McRunResult result = maqkd::run_montecarlo(run, parsed);
            std::cout << result.report;
            for (const auto& f : result.files_written) std::cout << "wrote " << f << "\n";
            if (result.validation_failed) return kExitValidation;
            return kExitOk;
        }

        if (regions->parsed() || crossover->parsed()) {
            // Reuse the sweep machinery without touching the filesystem.
            maqkd::RunConfig quiet = run;
            quiet.out_dir = "";
            const std::vector<double> grid = maqkd::distance_grid(quiet);
            maqkd::SweepResult result;
            {
                const double alpha = parsed.cfg.link.fiber.attenuation_db_per_km;
                const bool want_bb84 = quiet.protocol == maqkd::ProtocolKind::bb84
                                       || quiet.protocol == maqkd::ProtocolKind::all
                                       || crossover->parsed();
                const bool want_mdi = quiet.protocol == maqkd::ProtocolKind::mdi
                                      || quiet.protocol == maqkd::ProtocolKind::all
                                      || crossover->parsed();
                const bool want_ma = quiet.protocol == maqkd::ProtocolKind::ma_mdi
                                     || quiet.protocol == maqkd::ProtocolKind::all
                                     || crossover->parsed();
                std::size_t bb84_i = 0, mdi_i = 0;
                if (want_bb84) {
                    bb84_i = result.curves.size();
                    maqkd::RateCurve c = maqkd::build_curve("bb84", parsed.cfg, grid,
                                                            quiet.workers, &maqkd::skr_bb84);
                    auto rep = maqkd::classify_regions(c, alpha);
                    result.curves.push_back(maqkd::CurveResult{std::move(c), rep});
                }
                if (want_mdi) {
                    mdi_i = result.curves.size();
                    maqkd::RateCurve c = maqkd::build_curve("mdi", parsed.cfg, grid,
                                                            quiet.workers, &maqkd::skr_mdi);
                    auto rep = maqkd::classify_regions(c, alpha);
                    result.curves.push_back(maqkd::CurveResult{std::move(c), rep});
                }
                if (want_ma) {
                    const auto taus = quiet.tau_pi_list.empty()
                                          ? std::vector<double>{parsed.cfg.device.tau_pi}
                                          : quiet.tau_pi_list;
                    const auto t2s =
                        quiet.t2_list.empty()
                            ? std::vector<double>{parsed.cfg.device.decoherence.t2_dephase}
                            : quiet.t2_list;
                    for (double tp : taus) {
                        for (double t2 : t2s) {
                            maqkd::ParsedConfig variant = parsed;
                            variant.cfg.device.tau_pi = tp;
                            variant.cfg.device.decoherence.t2_dephase = t2;
                            maqkd::finalize(variant);
                            const std::string label =
                                "ma_mdi_taupi_" + maqkd::config_detail::render_double(tp)
                                + "_t2_" + maqkd::config_detail::render_double(t2);
                            maqkd::RateCurve c = maqkd::build_curve(
                                label, variant.cfg, grid, quiet.workers, &maqkd::skr_ma_mdi);
                            auto rep = maqkd::classify_regions(c, alpha);
                            std::size_t mi = result.curves.size();
                            result.curves.push_back(maqkd::CurveResult{std::move(c), rep});
                            if (crossover->parsed()) {
                                result.crossovers.push_back(maqkd::CrossoverRow{
                                    result.curves[mi].curve.label, "bb84",
                                    maqkd::crossover_distance(result.curves[mi].curve,
                                                              result.curves[bb84_i].curve)});
                                result.crossovers.push_back(maqkd::CrossoverRow{
                                    result.curves[mi].curve.label, "mdi",
                                    maqkd::crossover_distance(result.curves[mi].curve,
                                                              result.curves[mdi_i].curve)});
                            }
                        }
                    }
                }
            }
            if (regions->parsed()) {
                std::cout << "curve,boundary_i_ii_km,boundary_ii_iii_km,"
                             "median_slope_i,median_slope_ii,ordered,tolerance\n";
                for (const auto& cr : result.curves) {
                    const auto& r = cr.regions;
                    auto opt = [](const std::optional<double>& v) {
                        return v ? maqkd::sweep_detail::fmt9(*v) : std::string("none");
                    };
                    std::cout << cr.curve.label << ',' << opt(r.boundary_i_ii_km) << ','
                              << opt(r.boundary_ii_iii_km) << ',' << opt(r.median_slope_i)
                              << ',' << opt(r.median_slope_ii) << ','
                              << (r.ordered ? "yes" : "no") << ','
                              << maqkd::sweep_detail::fmt9(r.tolerance) << "\n";
                }
            } else {
                std::cout << "curve_a,curve_b,crossover_km\n";
                for (const auto& row : result.crossovers) {
                    std::cout << row.curve_a << ',' << row.curve_b << ','
                              << (row.distance_km ? maqkd::sweep_detail::fmt9(*row.distance_km)
                                                  : std::string("none"))
                              << "\n";
                }
            }
            return kExitOk;
        }
    } catch (const maqkd::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitOk;
}
