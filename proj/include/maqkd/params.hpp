#pragma once

#include <stdexcept>

#include "maqkd/channel.hpp"
#include "maqkd/spin_photon.hpp"

namespace maqkd {

// One memory device: spin coherence, pulse timing, and the lumped write
// efficiency eta_w (cavity reflection, interferometer acceptance, coupling).
struct DeviceParams {
    DecoherenceParams decoherence{30.0, 10e-3, 30.0, 10.0, 10e-6};
    double tau_r = 400e-9;            // optical spin readout cycle
    double tau_pi = 100e-9;           // microwave pi rotation
    double tau_init = 500e-9;         // re-initialization, tau_r + tau_pi unless overridden
    double tau_p = 11.2e-9;           // photon pulse duration
    double eta_up = 1.0;              // reflection efficiency, coupled spin state
    double eta_down = 0.0;            // reflection efficiency, uncoupled spin state
    double gamma_linewidth_hz = 100e6; // optical emission linewidth
    double eta_w = 0.13;              // photon-to-memory write efficiency
    double eta_r0 = 1.0;              // intrinsic retrieval efficiency at zero storage
};

struct LinkConfig {
    FiberSpec fiber{0.3};
    DetectorSpec detector{0.85, 100.0, 0.0, 50e-12};
    NodeOptics optics{0.8, 0.6, 8e-9, 90e-9};
};

// Everything a rate computation needs. source_rate is the symbol clock of
// the direct-transmission protocols; the memory-assisted node is clocked by
// its own round time instead. memory_cutoff is the wall-clock limit on how
// long a loaded memory waits for its partner before the node gives up.
struct ProtocolConfig {
    DeviceParams device{};
    LinkConfig link{};
    double source_rate_hz = 0.0;      // filled by default_protocol_config
    double memory_cutoff_s = 0.0;     // filled by default_protocol_config
    double error_correction_f = 1.16;
    double misalignment_a = 0.0;
    double misalignment_b = 0.0;
};

// Combined misalignment error of the two senders: either one flipped.
inline double combined_misalignment(const ProtocolConfig& cfg) {
    const double ea = cfg.misalignment_a;
    const double eb = cfg.misalignment_b;
    return ea + eb - 2.0 * ea * eb;
}

inline void validate(const ProtocolConfig& cfg) {
    check_decoherence(cfg.device.decoherence);
    if (!(cfg.device.tau_r > 0.0) || !(cfg.device.tau_pi > 0.0) || !(cfg.device.tau_init > 0.0))
        throw std::domain_error("params: tau_r, tau_pi, tau_init must be positive");
    if (cfg.device.tau_p < 0.0)
        throw std::domain_error("params: tau_p must be >= 0");
    if (cfg.device.eta_w < 0.0 || cfg.device.eta_w > 1.0 ||
        cfg.device.eta_r0 < 0.0 || cfg.device.eta_r0 > 1.0 ||
        cfg.device.eta_up < 0.0 || cfg.device.eta_up > 1.0 ||
        cfg.device.eta_down < 0.0 || cfg.device.eta_down > 1.0)
        throw std::domain_error("params: efficiencies must lie in [0,1]");
    if (cfg.device.gamma_linewidth_hz < 0.0)
        throw std::domain_error("params: linewidth must be >= 0");
    if (cfg.link.fiber.attenuation_db_per_km < 0.0)
        throw std::domain_error("params: attenuation must be >= 0");
    if (cfg.link.detector.efficiency < 0.0 || cfg.link.detector.efficiency > 1.0)
        throw std::domain_error("params: detector efficiency must lie in [0,1]");
    if (cfg.link.detector.dark_rate_hz < 0.0 || cfg.link.detector.background_rate_hz < 0.0)
        throw std::domain_error("params: count rates must be >= 0");
    if (cfg.link.detector.timing_jitter_s < 0.0)
        throw std::domain_error("params: timing jitter must be >= 0");
    if (cfg.link.optics.circulator_loss_db < 0.0 || cfg.link.optics.switch_loss_db < 0.0)
        throw std::domain_error("params: optical losses must be >= 0");
    if (cfg.link.optics.switch_rise_fall_s < 0.0 || cfg.link.optics.switch_min_dwell_s < 0.0)
        throw std::domain_error("params: switch times must be >= 0");
    if (!(cfg.source_rate_hz > 0.0))
        throw std::domain_error("params: source rate must be positive");
    if (!(cfg.memory_cutoff_s > 0.0))
        throw std::domain_error("params: memory cutoff must be positive");
    if (cfg.error_correction_f < 1.0)
        throw std::domain_error("params: error correction inefficiency must be >= 1");
    if (cfg.misalignment_a < 0.0 || cfg.misalignment_a > 0.5 ||
        cfg.misalignment_b < 0.0 || cfg.misalignment_b > 0.5)
        throw std::domain_error("params: misalignment must lie in [0, 0.5]");
}

// Baseline SiC divacancy parameter set. The source clock defaults to the
// node's own round rate so direct and memory-assisted protocols compare at
// the same symbol rate, and the waiting memory is abandoned once dephasing
// has fully randomized the stored phase (ten dephasing times).
inline ProtocolConfig default_protocol_config() {
    ProtocolConfig cfg;
    cfg.source_rate_hz = repetition_rate(cfg.device.tau_pi, cfg.device.tau_p);
    cfg.memory_cutoff_s = 10.0 * cfg.device.decoherence.t2_dephase;
    validate(cfg);
    return cfg;
}

} // namespace maqkd
