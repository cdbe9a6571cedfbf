// End-to-end acceptance checks. Each check prints one PASS/FAIL line with the
// numbers it measured; the exit status is the number of failures. Tolerances
// are deliberate and local: relative 1e-12 where a value is exact up to
// floating-point rounding, three standard errors where a statistic is
// sampled, and thirty percent bands where a slope is compared to a regime
// reference.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "maqkd/cavity.hpp"
#include "maqkd/config_io.hpp"
#include "maqkd/montecarlo.hpp"
#include "maqkd/regions.hpp"
#include "maqkd/rates.hpp"
#include "maqkd/rng.hpp"
#include "maqkd/spin_photon.hpp"
#include "maqkd/sweep.hpp"

using namespace maqkd;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int num, const char* name, bool ok, const std::string& detail) {
    std::printf("[%2d] %s  %-38s %s\n", num, ok ? "PASS" : "FAIL", name, detail.c_str());
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

double wrap_phase(double x) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    while (x > 0.5 * two_pi) x -= two_pi;
    while (x <= -0.5 * two_pi) x += two_pi;
    return x;
}

RateCurve ma_curve(const ProtocolConfig& cfg, int dmax_km) {
    RateCurve c;
    for (int d = 0; d <= dmax_km; ++d) c.points.push_back(skr_ma_mdi(cfg, d));
    return c;
}

std::optional<double> first_zero(const RateCurve& c) {
    for (const auto& p : c.points)
        if (p.skr_bits_per_s == 0.0) return p.distance_km;
    return std::nullopt;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

void check_probability_conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double c = std::pow(10.0, -6.0 + 15.0 * i / (n - 1.0));
        const CavityResponse r = cavity_response(c);
        worst = std::max(worst, std::abs(r.reflect + r.transmit + r.scatter - 1.0));
    }
    const double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "max |R+T+S-1| = %.3e over %d points, %.3f s",
                  worst, n, dt);
    report(1, "scattering probability conservation", worst < 1e-12 && dt < 1.0, buf);
}

void check_enhancement_and_cooperativity() {
    const CavityParams cavity{1.12e-6, 2.6, 6.3e5, 2.1, 1.0};
    const DefectOptics defect{0.09, 1.12e-6};
    const double enh = optical_enhancement(cavity);
    const double coop = cooperativity(cavity, defect);
    char buf[128];
    std::snprintf(buf, sizeof buf, "Q/V = %.10g, C = %.6f", enh, coop);
    report(2, "reference cavity figures",
           close_rel(enh, 3.0e5, 1e-12) && coop >= 100.0 && coop <= 1100.0, buf);
}

void check_round_rate() {
    const double with_pulse = repetition_rate(100e-9, 11.2e-9);
    const double no_pulse = repetition_rate(100e-9, 0.0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f MHz with pulses, %.6f MHz without",
                  with_pulse / 1e6, no_pulse / 1e6);
    report(3, "write round rate",
           with_pulse >= 4.45e6 && with_pulse <= 4.55e6 && close_rel(no_pulse, 5.0e6, 1e-12),
           buf);
}

void check_phase_accumulation() {
    std::mt19937_64 gen(2026);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
    double worst_phase = 0.0, worst_port = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const double phi = angle(gen);
        const double phi2 = angle(gen);
        const SpinState loaded =
            herald_measure(write_photon(init_spin(), photon_from_phase(phi)), 0.1).first;
        const auto [plus, hp] = async_bsm_accumulate(loaded, photon_from_phase(phi2), 0.1);
        const auto [minus, hm] = async_bsm_accumulate(loaded, photon_from_phase(phi2), 0.4);
        if (!hp.success || !hm.success || hp.port != HeraldPort::plus_port
            || hm.port != HeraldPort::minus_port) {
            worst_phase = 1.0;
            break;
        }
        const double got = std::arg(plus.amp_up * std::conj(plus.amp_down));
        worst_phase = std::max(worst_phase, std::abs(wrap_phase(got - (phi + phi2))));
        worst_port = std::max({worst_port, std::abs(plus.amp_up - minus.amp_up),
                               std::abs(plus.amp_down - minus.amp_down)});
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "max phase error %.2e rad, max port mismatch %.2e over %d pairs",
                  worst_phase, worst_port, n);
    report(4, "asynchronous phase accumulation", worst_phase < 1e-10 && worst_port < 1e-10,
           buf);
}

void check_lossless_herald_rate() {
    const auto t0 = std::chrono::steady_clock::now();
    const SpinState spin = init_spin();
    const PhotonState photon = photon_from_phase(0.0);
    CounterRng rng(12345);
    const long long n = 1000000;
    long long heralded = 0;
    for (long long i = 0; i < n; ++i)
        if (attempt_write(spin, photon, rng.next_double()).result == WriteResult::heralded)
            ++heralded;
    const double phat = static_cast<double>(heralded) / static_cast<double>(n);
    const double sigma = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
    const double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "heralded fraction %.6f vs 0.25 (|z| = %.2f), %.2f s",
                  phat, std::abs(phat - 0.25) / sigma, dt);
    report(5, "lossless write-and-herald rate",
           std::abs(phat - 0.25) <= 3.0 * sigma && dt < 60.0, buf);
}

// Herald probabilities injected through the lumped write efficiency at zero
// distance, dark counts disabled, dephasing time set in round units so the
// phase-error statistic has something to measure.
ProtocolConfig synthetic_node_config(double p, long long n_max, double t2_rounds) {
    ProtocolConfig cfg = default_protocol_config();
    cfg.device.eta_w = p / db_to_efficiency(cfg.link.optics.switch_loss_db);
    cfg.link.detector.dark_rate_hz = 0.0;
    const double tau = 2.0 * (cfg.device.tau_p + cfg.device.tau_pi);
    cfg.device.decoherence.t2_dephase = t2_rounds * tau;
    cfg.memory_cutoff_s = (static_cast<double>(n_max) + 0.5) * tau;
    validate(cfg);
    return cfg;
}

void check_node_simulation() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        double p;
        long long n_max;
        double t2_rounds;
    };
    const Case cases[] = {{0.5, 5, 5.0}, {0.1, 10, 20.0}, {0.01, 100, 200.0}};
    bool ok = true;
    std::string detail;
    for (const Case& c : cases) {
        const ProtocolConfig cfg = synthetic_node_config(c.p, c.n_max, c.t2_rounds);
        const MaYield expected = ma_mdi_yield(cfg, 0.0);
        const QberPair q_expected = ma_mdi_qber(cfg, 0.0, expected.moments);
        if (expected.moments.n_max != c.n_max) ok = false;

        const TrialStats st = simulate_node(cfg, 0.0, 1000000, 1);
        const ComparisonReport rep = compare_to_analytic(st, cfg, 0.0);
        double z_yield = 0.0, z_wait = 0.0, z_qx = 0.0;
        for (const auto& m : rep.metrics) {
            if (!m.sufficient && m.name != "qber_z") ok = false;
            if (m.name == "yield_per_round") {
                z_yield = m.z;
                if (!close_rel(m.expected, expected.yield_per_round, 1e-12)) ok = false;
            } else if (m.name == "mean_wait_rounds") {
                z_wait = m.z;
            } else if (m.name == "qber_x") {
                z_qx = m.z;
                // no dark counts: the sampled expectation is the rate-model one
                if (std::abs(m.expected - q_expected.e_x) > 1e-15) ok = false;
            }
        }
        if (std::abs(z_yield) > 3.0 || std::abs(z_wait) > 3.0 || std::abs(z_qx) > 3.0)
            ok = false;
        char buf[96];
        std::snprintf(buf, sizeof buf, " [p=%.2g: z=%+.2f/%+.2f/%+.2f]", c.p, z_yield,
                      z_wait, z_qx);
        detail += buf;
    }
    const double dt = seconds_since(t0);
    char buf[64];
    std::snprintf(buf, sizeof buf, ", %.1f s", dt);
    report(6, "node simulation vs renewal model", ok && dt < 300.0, detail + buf);
}

void check_rate_regimes() {
    const ProtocolConfig cfg = default_protocol_config();
    RateCurve c = ma_curve(cfg, 400);
    const double alpha = cfg.link.fiber.attenuation_db_per_km;
    const RegionReport rep = classify_regions(c, alpha);

    long long in_i = 0, in_ii = 0, in_iii = 0;
    int transitions = 0;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        if (c.points[i].region == Region::i) ++in_i;
        if (c.points[i].region == Region::ii) ++in_ii;
        if (c.points[i].region == Region::iii) ++in_iii;
        if (i > 0 && c.points[i].region != c.points[i - 1].region) ++transitions;
    }

    const double ref_i = -alpha / 20.0, ref_ii = -alpha / 10.0;
    const bool slopes_ok = rep.median_slope_i && rep.median_slope_ii
                           && std::abs(*rep.median_slope_i - ref_i) <= 0.3 * std::abs(ref_i)
                           && std::abs(*rep.median_slope_ii - ref_ii) <= 0.3 * std::abs(ref_ii);
    const bool shape_ok = rep.boundary_i_ii_km && rep.boundary_ii_iii_km && rep.ordered
                          && *rep.boundary_i_ii_km < *rep.boundary_ii_iii_km && in_i > 0
                          && in_ii > 0 && in_iii > 0 && transitions <= 3;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "boundaries %.0f / %.0f km, median slopes %.5f / %.5f (refs %.4f / %.4f)",
                  rep.boundary_i_ii_km.value_or(-1.0), rep.boundary_ii_iii_km.value_or(-1.0),
                  rep.median_slope_i.value_or(0.0), rep.median_slope_ii.value_or(0.0), ref_i,
                  ref_ii);
    report(7, "rate curve regime structure", slopes_ok && shape_ok, buf);
}

void check_dephasing_rolloff_shift() {
    ProtocolConfig cfg = default_protocol_config();
    const double decades[] = {10e-3, 100e-3, 1.0, 10.0};
    std::vector<double> rolloff;
    for (double t2 : decades) {
        cfg.device.decoherence.t2_dephase = t2;
        cfg.memory_cutoff_s = 10.0 * t2;
        RateCurve c = ma_curve(cfg, 400);
        const RegionReport rep = classify_regions(c, cfg.link.fiber.attenuation_db_per_km);
        rolloff.push_back(rep.boundary_ii_iii_km.value_or(-1.0));
    }
    const double first_shift = rolloff[1] - rolloff[0];
    const bool ok = rolloff[0] > 0.0 && first_shift >= 30.0 && first_shift <= 70.0
                    && rolloff[2] > rolloff[1] && rolloff[3] > rolloff[2];
    char buf[160];
    std::snprintf(buf, sizeof buf, "rolloff %g -> %g -> %g -> %g km (first shift %+g km)",
                  rolloff[0], rolloff[1], rolloff[2], rolloff[3], first_shift);
    report(8, "rolloff shift per dephasing decade", ok, buf);
}

void check_protocol_ordering() {
    const ProtocolConfig cfg = default_protocol_config();
    RateCurve bb, mdi;
    for (int d = 0; d <= 400; ++d) {
        bb.points.push_back(skr_bb84(cfg, d));
        mdi.points.push_back(skr_mdi(cfg, d));
    }
    const auto zero_bb = first_zero(bb);
    const auto zero_mdi = first_zero(mdi);

    ProtocolConfig fast = cfg;
    fast.device.tau_pi = 10e-9;
    fast.device.tau_init = fast.device.tau_r + fast.device.tau_pi;
    RateCurve ma_fast;
    for (int d = 0; d <= 400; ++d) ma_fast.points.push_back(skr_ma_mdi(fast, d));
    const auto cross = crossover_distance(ma_fast, bb);

    const double ma0 = skr_ma_mdi(cfg, 0.0).skr_bits_per_s;
    const double mdi0 = mdi.points[0].skr_bits_per_s;

    const bool ok = zero_bb && zero_mdi && *zero_mdi < *zero_bb && cross
                    && ma_fast.points[0].skr_bits_per_s < bb.points[0].skr_bits_per_s
                    && ma0 < mdi0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "zero at %g (two-photon) vs %g km; fast-memory crossover %g km; "
                  "%.3g < %.3g bit/s at 0 km",
                  zero_mdi.value_or(-1.0), zero_bb.value_or(-1.0),
                  cross ? *cross : -1.0, ma0, mdi0);
    report(9, "protocol ordering at matched clock", ok, buf);
}

void check_multiplexing_scaling() {
    const ProtocolConfig cfg = default_protocol_config();
    const RateCurve base = ma_curve(cfg, 400);
    const RateCurve scaled = apply_multiplexing(base, 4, 43);
    bool ok = scaled.points.size() == base.points.size();
    for (std::size_t i = 0; ok && i < base.points.size(); ++i) {
        const double want = base.points[i].skr_bits_per_s * 4.0 * 43.0;
        if (scaled.points[i].skr_bits_per_s != want) ok = false;
        if ((scaled.points[i].skr_bits_per_s == 0.0) != (base.points[i].skr_bits_per_s == 0.0))
            ok = false;
    }
    const auto z_base = first_zero(base);
    const auto z_scaled = first_zero(scaled);
    ok = ok && z_base && z_scaled && *z_base == *z_scaled;
    char buf[128];
    std::snprintf(buf, sizeof buf, "172-fold scaling exact, zero rate stays at %g km",
                  z_base.value_or(-1.0));
    report(10, "multiplexing scales rates only", ok, buf);
}

void check_deterministic_outputs() {
    const ParsedConfig parsed = parse_config("");
    const fs::path base = fs::temp_directory_path();
    const fs::path dirs[] = {base / "maqkd_accept_w1", base / "maqkd_accept_w4",
                             base / "maqkd_accept_w1b"};
    const int workers[] = {1, 4, 1};
    std::vector<std::vector<std::string>> files;
    for (int k = 0; k < 3; ++k) {
        fs::remove_all(dirs[k]);
        RunConfig run;
        run.out_dir = dirs[k].string();
        run.workers = workers[k];
        const SweepResult res = run_sweep(run, parsed);
        files.push_back(res.files_written);
    }
    bool ok = files[0].size() == files[1].size() && files[0].size() == files[2].size();
    std::size_t compared = 0;
    for (std::size_t i = 0; ok && i < files[0].size(); ++i) {
        const std::string a = slurp(files[0][i]);
        ok = ok && !a.empty() && a == slurp(files[1][i]) && a == slurp(files[2][i]);
        ++compared;
    }
    for (const auto& d : dirs) fs::remove_all(d);
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "%zu files byte-identical across reruns and worker counts", compared);
    report(11, "sweep output determinism", ok, buf);
}

} // namespace

int main() {
    std::printf("acceptance checks\n");
    check_probability_conservation();
    check_enhancement_and_cooperativity();
    check_round_rate();
    check_phase_accumulation();
    check_lossless_herald_rate();
    check_node_simulation();
    check_rate_regimes();
    check_dephasing_rolloff_shift();
    check_protocol_ordering();
    check_multiplexing_scaling();
    check_deterministic_outputs();
    std::printf("%s: %d of 11 checks failed\n", g_failures == 0 ? "OK" : "FAILED",
                g_failures);
    return g_failures;
}
