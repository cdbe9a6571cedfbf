#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "maqkd/channel.hpp"
#include "maqkd/params.hpp"

namespace maqkd {

inline double binary_entropy(double p) {
    if (p < 0.0 || p > 1.0)
        throw std::domain_error("rates: entropy argument must lie in [0,1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// Slope regimes of a memory-assisted rate curve: I is limited by memory
// utilization (half the fiber attenuation per km), II by decoherence while
// waiting, III by spurious coincidences, and zero marks no extractable key.
enum class Region { i, ii, iii, zero };

inline const char* region_name(Region r) {
    switch (r) {
        case Region::i: return "I";
        case Region::ii: return "II";
        case Region::iii: return "III";
        default: return "zero";
    }
}

struct RatePoint {
    double distance_km;
    double skr_bits_per_s;
    double yield_per_round;
    double qber_x;
    double qber_z;
    double cycle_time_s;
    Region region;
};

struct RateCurve {
    std::string label;
    std::vector<RatePoint> points;
    std::uint64_t config_digest = 0;
};

inline void check_distances_increasing(const RateCurve& curve) {
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        if (!(curve.points[i].distance_km > curve.points[i - 1].distance_km))
            throw std::domain_error("rates: curve distances must be strictly increasing");
}

// Detection gate for the direct-transmission protocols: the pulse itself,
// unless the source clock packs symbols tighter than the pulse duration.
inline double direct_gate_s(const ProtocolConfig& cfg) {
    return std::min(cfg.device.tau_p, 1.0 / cfg.source_rate_hz);
}

// Asymptotic BB84 with an ideal single-photon source over one fiber span.
inline RatePoint skr_bb84(const ProtocolConfig& cfg, double distance_km) {
    validate(cfg);
    const double t = transmittance(distance_km, cfg.link.fiber) * cfg.link.detector.efficiency;
    const double d = dark_click_prob(cfg.link.detector, direct_gate_s(cfg));
    const double d2 = 1.0 - (1.0 - d) * (1.0 - d);   // either basis detector fires
    const double p_click = t + (1.0 - t) * d2;
    const double e_mis = combined_misalignment(cfg);
    const double e = std::min(0.5, (e_mis * t + 0.5 * d2) / p_click);
    const double key_frac =
        std::max(0.0, 1.0 - (1.0 + cfg.error_correction_f) * binary_entropy(e));
    const double skr = cfg.source_rate_hz * 0.5 * p_click * key_frac;
    return RatePoint{distance_km, skr, 0.5 * p_click, e, e,
                     1.0 / cfg.source_rate_hz, skr > 0.0 ? Region::i : Region::zero};
}

// Asymptotic MDI-QKD with ideal single-photon sources and an untrusted
// measurement node at the midpoint. A Bell-state coincidence needs both
// photons, so the yield scales as the full-path transmittance; any dark
// click across the four node detectors during the gate can fake the
// coincidence pattern, which is what eventually buries the signal.
inline RatePoint skr_mdi(const ProtocolConfig& cfg, double distance_km) {
    validate(cfg);
    const double t_side =
        transmittance(0.5 * distance_km, cfg.link.fiber) * cfg.link.detector.efficiency;
    const double d = dark_click_prob(cfg.link.detector, direct_gate_s(cfg));
    const double d4 = 1.0 - std::pow(1.0 - d, 4.0);
    const double q_sig = t_side * t_side;
    const double q_acc = (1.0 - q_sig) * d4;
    const double q = q_sig + q_acc;
    const double e_mis = combined_misalignment(cfg);
    const double e = (q > 0.0) ? std::min(0.5, (e_mis * q_sig + 0.5 * q_acc) / q) : 0.0;
    const double key_frac = std::max(
        0.0, 1.0 - binary_entropy(e) - cfg.error_correction_f * binary_entropy(e));
    const double skr = cfg.source_rate_hz * 0.5 * q * key_frac;
    return RatePoint{distance_km, skr, 0.5 * q, e, e,
                     1.0 / cfg.source_rate_hz, skr > 0.0 ? Region::i : Region::zero};
}

// Renewal model of one memory-assisted BSM cycle. Rounds tick at the write
// round time; a cycle is the wait for the first herald (either side, either
// device), then up to n_max rounds of waiting for the partner herald, then
// readout-and-reset dead time on success or re-initialization on timeout.
// Dark counts both complete cycles (flagged heralds) and terminate waits,
// so every per-round probability below uses the effective herald rate.
struct CycleModel {
    // per-round inputs
    double p_real;        // genuine herald probability per side per round
    double p_dark;        // spurious herald probability per side per round
    double round_time_s;
    long long n_max;      // rounds a loaded memory waits before giving up
    double dead_success_rounds;
    double dead_timeout_rounds;
    // derived
    double p_eff;
    double dark_flag_w;   // probability a given herald was spurious
    double ln_q;          // log(1 - p_eff)
    double success_prob;  // cycle completes before the cutoff
    double first_herald_prob;      // per round, at least one of the two sides
    double ew1;                    // mean rounds to the first herald
    double ew2_given_success;
    double mean_wait_completed;    // E[min(wait, n_max)]
    double second_moment_completed;
    double expected_cycle_rounds;

    CycleModel(double p_real_in, double p_dark_in, double round_time_in, long long n_max_in,
               double dead_success_in, double dead_timeout_in)
        : p_real(p_real_in), p_dark(p_dark_in), round_time_s(round_time_in), n_max(n_max_in),
          dead_success_rounds(dead_success_in), dead_timeout_rounds(dead_timeout_in) {
        if (p_real < 0.0 || p_real > 1.0 || p_dark < 0.0 || p_dark > 1.0)
            throw std::domain_error("rates: herald probabilities must lie in [0,1]");
        if (n_max < 1)
            throw std::domain_error("rates: n_max must be >= 1");
        if (!(round_time_s > 0.0))
            throw std::domain_error("rates: round time must be positive");
        p_eff = p_real + (1.0 - p_real) * p_dark;
        if (!(p_eff > 0.0))
            throw std::domain_error("rates: zero herald probability, no cycles ever complete");
        dark_flag_w = (1.0 - p_real) * p_dark / p_eff;
        ln_q = std::log1p(-p_eff);
        const double n = static_cast<double>(n_max);
        const double q_n = std::exp(n * ln_q);
        success_prob = -std::expm1(n * ln_q);
        first_herald_prob = -std::expm1(2.0 * ln_q);
        ew1 = 1.0 / first_herald_prob;
        ew2_given_success = 1.0 / p_eff - n * q_n / success_prob;
        mean_wait_completed = success_prob / p_eff;
        const double q_n1 = std::exp((n + 1.0) * ln_q);
        second_moment_completed =
            2.0 * (1.0 - (n + 1.0) * q_n + n * q_n1) / (p_eff * p_eff) - mean_wait_completed;
        expected_cycle_rounds = ew1 + success_prob * (ew2_given_success + dead_success_rounds)
                                + (1.0 - success_prob) * (n + dead_timeout_rounds);
    }

    double yield_per_round() const { return success_prob / expected_cycle_rounds; }
    double cycle_time_s() const { return expected_cycle_rounds * round_time_s; }

    double avg_decay_factor(double timescale_s) const;
    double mean_dephase_error(double t2_s) const;
};

struct WaitMoments {
    double p_eff;
    long long n_max;
    double round_time_s;
    double success_prob;
    double mean_completed;
    double mean_given_success;
    double second_moment_completed;
    double dark_flag_w;
};

// E[exp(-wait * round_time / timescale) | cycle completed]: the mean
// exponential decay factor accumulated while the first memory waits for its
// partner, over the truncated geometric wait distribution.
inline double avg_decay_factor(const WaitMoments& m, double timescale_s) {
    if (!(timescale_s > 0.0))
        throw std::domain_error("rates: decay timescale must be positive");
    const double x = std::exp(-m.round_time_s / timescale_s);
    const double one_minus_x = -std::expm1(-m.round_time_s / timescale_s);
    const double ln_qx = std::log1p(-m.p_eff) - m.round_time_s / timescale_s;
    const double n = static_cast<double>(m.n_max);
    const double denom = (one_minus_x + m.p_eff * x) * m.success_prob;
    return m.p_eff * x * (-std::expm1(n * ln_qx)) / denom;
}

// Mean dephasing error of the stored phase over completed cycles.
inline double mean_dephase_error(const WaitMoments& m, double t2_s) {
    return 0.5 * (1.0 - avg_decay_factor(m, t2_s));
}

struct MaYield {
    double yield_per_round;
    double cycle_time_s;
    WaitMoments moments;
};

struct QberPair {
    double e_x;
    double e_z;
};

inline CycleModel ma_mdi_cycle(const ProtocolConfig& cfg, double distance_km) {
    validate(cfg);
    const double tau = 1.0 / repetition_rate(cfg.device.tau_pi, cfg.device.tau_p);
    const double p_real = transmittance(0.5 * distance_km, cfg.link.fiber)
                          * db_to_efficiency(cfg.link.optics.switch_loss_db)
                          * cfg.device.eta_w;
    const double p_dark = dark_click_prob(cfg.link.detector, cfg.device.tau_p);
    const long long n_max =
        std::max(1LL, static_cast<long long>(std::floor(cfg.memory_cutoff_s / tau)));
    const double readout = cfg.device.tau_r + cfg.device.tau_pi;
    const double dead_success = std::ceil((readout + cfg.device.tau_init) / tau);
    const double dead_timeout = std::ceil(cfg.device.tau_init / tau);
    return CycleModel(p_real, p_dark, tau, n_max, dead_success, dead_timeout);
}

inline WaitMoments wait_moments(const CycleModel& m) {
    return WaitMoments{m.p_eff, m.n_max, m.round_time_s, m.success_prob,
                       m.mean_wait_completed, m.ew2_given_success,
                       m.second_moment_completed, m.dark_flag_w};
}

inline double CycleModel::avg_decay_factor(double timescale_s) const {
    return maqkd::avg_decay_factor(wait_moments(*this), timescale_s);
}

inline double CycleModel::mean_dephase_error(double t2_s) const {
    return maqkd::mean_dephase_error(wait_moments(*this), t2_s);
}

inline MaYield ma_mdi_yield(const ProtocolConfig& cfg, double distance_km) {
    const CycleModel m = ma_mdi_cycle(cfg, distance_km);
    return MaYield{m.yield_per_round(), m.cycle_time_s(), wait_moments(m)};
}

// Sifted error rates of the memory-assisted link. The X basis accumulates
// the dephasing of the waiting memory; the Z basis only sees misalignment.
// Either herald being a dark count contributes half an error in both bases.
inline QberPair ma_mdi_qber(const ProtocolConfig& cfg, double distance_km,
                            const WaitMoments& moments) {
    (void)distance_km;  // the wait moments already encode the link
    const double eps = mean_dephase_error(moments, cfg.device.decoherence.t2_dephase);
    const double floor_term = 0.5 * moments.dark_flag_w;
    const double e_x = std::min(0.5, eps + floor_term);
    const double e_z = std::min(0.5, combined_misalignment(cfg) + floor_term);
    return QberPair{e_x, e_z};
}

inline RatePoint skr_ma_mdi(const ProtocolConfig& cfg, double distance_km) {
    const CycleModel m = ma_mdi_cycle(cfg, distance_km);
    const QberPair q = ma_mdi_qber(cfg, distance_km, wait_moments(m));
    const double key_frac = std::max(
        0.0, 1.0 - binary_entropy(q.e_x) - cfg.error_correction_f * binary_entropy(q.e_z));
    const double retrieval =
        cfg.device.eta_r0 * m.avg_decay_factor(cfg.device.decoherence.t1_amplitude);
    const double rate_per_s = m.yield_per_round() / m.round_time_s;
    const double skr = retrieval * rate_per_s * key_frac;
    return RatePoint{distance_km, skr, m.yield_per_round(), q.e_x, q.e_z,
                     m.cycle_time_s(), skr > 0.0 ? Region::i : Region::zero};
}

// Parallel wavelength and polarization channels multiply every completed
// cycle independently, so the rate scales by the channel count and the
// zero-rate distance is untouched.
inline RatePoint apply_multiplexing(const RatePoint& point, int n_wavelength, int n_polarization) {
    if (n_wavelength < 1 || n_polarization < 1)
        throw std::domain_error("rates: multiplexing counts must be >= 1");
    RatePoint out = point;
    out.skr_bits_per_s = point.skr_bits_per_s
                         * static_cast<double>(n_wavelength)
                         * static_cast<double>(n_polarization);
    return out;
}

inline RateCurve apply_multiplexing(const RateCurve& curve, int n_wavelength, int n_polarization) {
    RateCurve out = curve;
    for (auto& p : out.points) p = apply_multiplexing(p, n_wavelength, n_polarization);
    return out;
}

} // namespace maqkd
