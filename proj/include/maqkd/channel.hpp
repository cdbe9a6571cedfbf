#pragma once

#include <cmath>
#include <stdexcept>

namespace maqkd {

struct FiberSpec {
    double attenuation_db_per_km;  // alpha, e.g. 0.3 dB/km around 1300 nm
};

struct DetectorSpec {
    double efficiency;         // eta_spd in [0,1]
    double dark_rate_hz;       // gamma_dc
    double background_rate_hz; // gamma_bg, stray light folded into the same Poisson clock
    double timing_jitter_s;    // t_spd, limits the usable source clock for direct links
};

struct NodeOptics {
    double circulator_loss_db;   // eta_oc
    double switch_loss_db;       // eta_os
    double switch_rise_fall_s;   // t_os
    double switch_min_dwell_s;   // dt_os, shortest interval between reconfigurations
};

// Fiber power transmittance over length_km of fiber.
inline double transmittance(double length_km, const FiberSpec& fiber) {
    if (length_km < 0.0)
        throw std::domain_error("channel: fiber length must be >= 0");
    if (fiber.attenuation_db_per_km < 0.0)
        throw std::domain_error("channel: attenuation must be >= 0");
    return std::pow(10.0, -fiber.attenuation_db_per_km * length_km / 10.0);
}

// Insertion loss quoted in dB to a linear efficiency.
inline double db_to_efficiency(double loss_db) {
    if (loss_db < 0.0)
        throw std::domain_error("channel: loss in dB must be >= 0");
    return std::pow(10.0, -loss_db / 10.0);
}

// Probability of at least one spurious count in a gate of the given width,
// with dark counts and background light pooled into one Poisson process.
inline double dark_click_prob(const DetectorSpec& det, double window_s) {
    if (!(window_s >= 0.0))
        throw std::domain_error("channel: detection window must be >= 0");
    if (det.dark_rate_hz < 0.0 || det.background_rate_hz < 0.0)
        throw std::domain_error("channel: count rates must be >= 0");
    return -std::expm1(-(det.dark_rate_hz + det.background_rate_hz) * window_s);
}

// Round rate of the spin-photon interface. One round is two photon bins
// interleaved with two spin pi rotations: T = 2 (tau_pi + tau_p).
inline double repetition_rate(double tau_pi_s, double tau_p_s) {
    if (!(tau_pi_s > 0.0) || tau_p_s < 0.0)
        throw std::domain_error("channel: need tau_pi > 0 and tau_p >= 0");
    return 1.0 / (2.0 * (tau_pi_s + tau_p_s));
}

} // namespace maqkd
