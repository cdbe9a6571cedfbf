#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace maqkd {

using cplx = std::complex<double>;

// Electron spin qubit in the {down, up} basis.
struct SpinState {
    cplx amp_down;
    cplx amp_up;
};

// Time-bin photon qubit in the {t0, t1} basis.
struct PhotonState {
    cplx amp_t0;
    cplx amp_t1;
};

// Joint spin-photon state, basis order {down t0, down t1, up t0, up t1}.
struct JointState {
    std::array<cplx, 4> amp;
};

enum class HeraldPort { plus_port, minus_port };

// success means the photon interfered in the middle slot of the unbalanced
// interferometer and the time-bin X measurement went through. port is
// meaningful only when success is true; on failure the arrival time revealed
// the bin instead (a Z collapse of the photon).
struct HeraldOutcome {
    bool success;
    HeraldPort port;
};

enum class BellLabel { phi_plus, phi_minus };

enum class WriteResult { heralded, herald_failed, photon_lost };

struct WriteAttempt {
    WriteResult result;
    SpinState spin;       // post-event spin for every branch
    HeraldPort port;      // meaningful only when result == heralded
};

// Spin memory decoherence and ancillary storage times. The optical qubit
// lives on the electron spin (t1_amplitude, t2_dephase); the nuclear register
// times and the electron-nuclear conversion time are carried for node
// bookkeeping and long-storage variants.
struct DecoherenceParams {
    double t1_amplitude;   // seconds
    double t2_dephase;     // seconds, must satisfy t2 <= 2 t1
    double t1_nuclear;     // seconds
    double t2_nuclear;     // seconds
    double conv_time_e_n;  // seconds, electron <-> nuclear swap duration
};

struct TimingWindows {
    double write_window;   // one write round: 2 (tau_p + tau_pi)
    double readout;        // spin X readout: tau_r + tau_pi
    double reinit;         // re-initialization after readout or timeout
};

inline void check_decoherence(const DecoherenceParams& d) {
    if (!(d.t1_amplitude > 0.0) || !(d.t2_dephase > 0.0))
        throw std::domain_error("spin: T1 and T2 must be positive");
    if (d.t2_dephase > 2.0 * d.t1_amplitude)
        throw std::domain_error("spin: T2 must not exceed 2 T1");
    if (!(d.t1_nuclear > 0.0) || !(d.t2_nuclear > 0.0) || !(d.conv_time_e_n > 0.0))
        throw std::domain_error("spin: nuclear times and conversion time must be positive");
}

namespace detail {

inline double norm2(const SpinState& s) {
    return std::norm(s.amp_down) + std::norm(s.amp_up);
}

inline double norm2(const PhotonState& p) {
    return std::norm(p.amp_t0) + std::norm(p.amp_t1);
}

inline double norm2(const JointState& j) {
    double n = 0.0;
    for (const auto& a : j.amp) n += std::norm(a);
    return n;
}

inline void require_normalized(double n2, const char* what) {
    if (std::abs(n2 - 1.0) > 1e-10)
        throw std::domain_error(std::string("spin: unnormalized ") + what);
}

inline SpinState normalized(cplx down, cplx up) {
    const double n = std::sqrt(std::norm(down) + std::norm(up));
    if (!(n > 0.0))
        throw std::domain_error("spin: cannot normalize a zero state");
    return SpinState{down / n, up / n};
}

} // namespace detail

// Fresh memory qubit: equal superposition ready to absorb a photon.
inline SpinState init_spin() {
    const double r = 1.0 / std::sqrt(2.0);
    return SpinState{cplx(r, 0.0), cplx(r, 0.0)};
}

inline PhotonState photon_from_phase(double phase) {
    const double r = 1.0 / std::sqrt(2.0);
    return PhotonState{cplx(r, 0.0), r * std::exp(cplx(0.0, phase))};
}

// Probability that the photon survives the spin-controlled reflection
// sequence. Only the (down, t0) and (up, t1) components make it back out;
// the cross terms leak through the cavity and are lost.
inline double write_success_prob(const SpinState& spin, const PhotonState& photon) {
    detail::require_normalized(detail::norm2(spin), "spin input");
    detail::require_normalized(detail::norm2(photon), "photon input");
    return std::norm(spin.amp_down * photon.amp_t0) + std::norm(spin.amp_up * photon.amp_t1);
}

// Post-selected write map. The early bin reflects off the memory while the
// spin is still in its prepared orientation, a pi pulse swaps the levels, and
// the late bin reflects afterwards; keeping only the reflected branches
// entangles bin with spin:
//   (alpha |down> + beta |up>) (a |t0> + b |t1>)  ->  alpha a |down t0> + beta b |up t1>
// renormalized. Throws when the surviving amplitude is exactly zero (there is
// nothing to post-select on).
inline JointState write_photon(const SpinState& spin, const PhotonState& photon) {
    const cplx keep_dt0 = spin.amp_down * photon.amp_t0;
    const cplx keep_ut1 = spin.amp_up * photon.amp_t1;
    detail::require_normalized(detail::norm2(spin), "spin input");
    detail::require_normalized(detail::norm2(photon), "photon input");
    const double n2 = std::norm(keep_dt0) + std::norm(keep_ut1);
    if (!(n2 > 0.0))
        throw std::domain_error("spin: write map has zero surviving amplitude");
    const double n = std::sqrt(n2);
    JointState out;
    out.amp = {keep_dt0 / n, cplx(0.0), cplx(0.0), keep_ut1 / n};
    return out;
}

// Write map with imperfect reflection contrast. eta_up and eta_down are the
// reflection efficiencies of the coupled and uncoupled spin states; the kept
// branches scale as sqrt(eta), so residual reflection of the wrong spin state
// (eta_down > 0 with the convention eta_up = 1) leaks the cross terms back in
// and degrades the stored entanglement.
inline JointState write_photon_with_contrast(const SpinState& spin, const PhotonState& photon,
                                             double eta_up, double eta_down) {
    if (eta_up < 0.0 || eta_up > 1.0 || eta_down < 0.0 || eta_down > 1.0)
        throw std::domain_error("spin: reflection contrasts must lie in [0,1]");
    detail::require_normalized(detail::norm2(spin), "spin input");
    detail::require_normalized(detail::norm2(photon), "photon input");
    const double a_keep = std::sqrt(eta_up);
    const double a_leak = std::sqrt(eta_down);
    JointState out;
    out.amp = {a_keep * spin.amp_down * photon.amp_t0,
               a_leak * spin.amp_down * photon.amp_t1,
               a_leak * spin.amp_up * photon.amp_t0,
               a_keep * spin.amp_up * photon.amp_t1};
    const double n2 = detail::norm2(out);
    if (!(n2 > 0.0))
        throw std::domain_error("spin: write map has zero surviving amplitude");
    const double n = std::sqrt(n2);
    for (auto& a : out.amp) a /= n;
    return out;
}

// The interferometric X measurement succeeds in half of the attempts: the
// photon exits the unbalanced interferometer in the interfering middle slot
// with probability 1/2 independent of the state, and outside it the arrival
// time is a which-bin (Z) measurement instead.
inline constexpr double herald_success_prob() { return 0.5; }

// Deterministic projection of the photon half of a joint state onto
// (|t0> +/- |t1>)/sqrt(2), with the minus-port feed-forward correction
// (a spin Z flip) already applied so both ports leave the same spin state
// for write-map outputs. Returns the normalized spin.
inline SpinState herald_project(const JointState& joint, HeraldPort port) {
    detail::require_normalized(detail::norm2(joint), "joint input");
    const double r = 1.0 / std::sqrt(2.0);
    const double sign = (port == HeraldPort::plus_port) ? 1.0 : -1.0;
    cplx down = r * (joint.amp[0] + sign * joint.amp[1]);
    cplx up = r * (joint.amp[2] + sign * joint.amp[3]);
    if (port == HeraldPort::minus_port) up = -up;  // feed-forward Z correction
    return detail::normalized(down, up);
}

// Probability of the photon landing in the given X port (before the 1/2
// interferometer acceptance).
inline double herald_port_prob(const JointState& joint, HeraldPort port) {
    const double r = 1.0 / std::sqrt(2.0);
    const double sign = (port == HeraldPort::plus_port) ? 1.0 : -1.0;
    const cplx down = r * (joint.amp[0] + sign * joint.amp[1]);
    const cplx up = r * (joint.amp[2] + sign * joint.amp[3]);
    return std::norm(down) + std::norm(up);
}

// Sampled herald measurement driven by one uniform draw u in [0,1).
// u < 1/2: the X measurement fires, the port follows the Born rule, and the
// minus port gets the feed-forward correction. Otherwise the photon arrives
// in a timing slot that reveals its bin and the spin collapses accordingly.
inline std::pair<SpinState, HeraldOutcome> herald_measure(const JointState& joint, double u) {
    detail::require_normalized(detail::norm2(joint), "joint input");
    if (!(u >= 0.0) || u >= 1.0)
        throw std::domain_error("spin: uniform draw must lie in [0,1)");
    if (u < 0.5) {
        const double v = 2.0 * u;
        const double p_plus = herald_port_prob(joint, HeraldPort::plus_port);
        const HeraldPort port = (v < p_plus) ? HeraldPort::plus_port : HeraldPort::minus_port;
        return {herald_project(joint, port), HeraldOutcome{true, port}};
    }
    const double v = 2.0 * (u - 0.5);
    const double p_t0 = std::norm(joint.amp[0]) + std::norm(joint.amp[2]);
    SpinState spin = (v < p_t0) ? detail::normalized(joint.amp[0], joint.amp[2])
                                : detail::normalized(joint.amp[1], joint.amp[3]);
    return {spin, HeraldOutcome{false, HeraldPort::plus_port}};
}

// Full four-outcome write attempt on a single uniform draw: the photon is
// either lost at the cavity (cross terms), fails the interferometric herald
// (bin revealed), or is heralded into the memory. Nested branches reuse the
// rescaled remainder of u so one draw decides the whole tree.
inline WriteAttempt attempt_write(const SpinState& spin, const PhotonState& photon, double u) {
    if (!(u >= 0.0) || u >= 1.0)
        throw std::domain_error("spin: uniform draw must lie in [0,1)");
    const double survive = write_success_prob(spin, photon);
    if (u < survive) {
        const JointState joint = write_photon(spin, photon);
        auto [out_spin, herald] = herald_measure(joint, u / survive);
        return WriteAttempt{herald.success ? WriteResult::heralded : WriteResult::herald_failed,
                            out_spin, herald.port};
    }
    // Lost branch: the leaked component carried (down,t1) and (up,t0); the
    // environment learns the bin, so the spin collapses to down or up.
    const double lost_down = std::norm(spin.amp_down * photon.amp_t1);
    const double lost_up = std::norm(spin.amp_up * photon.amp_t0);
    const double v = (u - survive) / (1.0 - survive);
    SpinState collapsed = (v * (lost_down + lost_up) < lost_down)
                              ? SpinState{cplx(1.0), cplx(0.0)}
                              : SpinState{cplx(0.0), cplx(1.0)};
    return WriteAttempt{WriteResult::photon_lost, collapsed, HeraldPort::plus_port};
}

// Second write onto an already loaded memory followed by the herald: the
// asynchronous Bell-state measurement. Phases add, so a memory holding
// phase phi that absorbs a photon of phase phi' ends up with relative phase
// phi + phi' (mod 2 pi) when heralded.
inline std::pair<SpinState, HeraldOutcome> async_bsm_accumulate(const SpinState& spin,
                                                                const PhotonState& photon,
                                                                double u) {
    const JointState joint = write_photon(spin, photon);
    return herald_measure(joint, u);
}

// Spin X readout. Phi+ with probability |<+|spin>|^2, Phi- otherwise; the
// labels are the Bell outcomes the asynchronous BSM distinguishes.
inline BellLabel readout_x(const SpinState& spin, double u) {
    detail::require_normalized(detail::norm2(spin), "spin input");
    if (!(u >= 0.0) || u >= 1.0)
        throw std::domain_error("spin: uniform draw must lie in [0,1)");
    const double r = 1.0 / std::sqrt(2.0);
    const double p_plus = std::norm(r * (spin.amp_down + spin.amp_up));
    return (u < p_plus) ? BellLabel::phi_plus : BellLabel::phi_minus;
}

// Markovian pure dephasing: the probability that the stored relative phase
// has flipped after the given storage time. Saturates at 1/2.
inline double dephase_error_prob(double elapsed_s, double t2_dephase_s) {
    if (elapsed_s < 0.0 || !(t2_dephase_s > 0.0))
        throw std::domain_error("spin: need elapsed >= 0 and T2 > 0");
    return 0.5 * (-std::expm1(-elapsed_s / t2_dephase_s));
}

// The dephasing jump itself: a Z flip of the stored superposition.
inline SpinState apply_dephase_flip(const SpinState& spin) {
    return SpinState{spin.amp_down, -spin.amp_up};
}

// Probability that the stored excitation can still be retrieved for readout
// after the elapsed storage time, including the intrinsic efficiency eta_r0.
inline double retrieval_efficiency(double elapsed_s, const DecoherenceParams& d,
                                   double eta_r0 = 1.0) {
    if (elapsed_s < 0.0)
        throw std::domain_error("spin: elapsed time must be >= 0");
    if (eta_r0 < 0.0 || eta_r0 > 1.0)
        throw std::domain_error("spin: eta_r0 must lie in [0,1]");
    check_decoherence(d);
    return eta_r0 * std::exp(-elapsed_s / d.t1_amplitude);
}

// Durations of the primitive node operations, all built from the pulse and
// rotation times: a write round holds two photon bins and two pi rotations,
// readout is the optical cycle plus one rotation, and re-initialization is
// taken equal to the readout sequence.
inline TimingWindows timing_windows(double tau_p_s, double tau_pi_s, double tau_r_s) {
    if (!(tau_pi_s > 0.0) || !(tau_r_s > 0.0) || tau_p_s < 0.0)
        throw std::domain_error("spin: need tau_pi, tau_r > 0 and tau_p >= 0");
    TimingWindows w;
    w.write_window = 2.0 * (tau_p_s + tau_pi_s);
    w.readout = tau_r_s + tau_pi_s;
    w.reinit = tau_r_s + tau_pi_s;
    return w;
}

} // namespace maqkd
