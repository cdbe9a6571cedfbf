#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace maqkd {

// Cavity geometry and quality. The mode volume is expressed in units of
// (lambda/n)^3 so that the enhancement figure Q/V is dimensionless and can be
// quoted directly against photonic-crystal (small V, moderate Q) and
// micro-ring (large V, large Q) designs.
struct CavityParams {
    double wavelength_freespace;   // meters
    double refractive_index;       // unitless, > 1 for solid-state hosts
    double quality_factor;         // unitless
    double mode_volume;            // in (lambda/n)^3 units
    double dipole_overlap;         // zeta in [0,1], field-dipole alignment
};

struct DefectOptics {
    double branching_ratio;        // Debye-Waller * quantum efficiency, in [0,1]
    double zpl_wavelength;         // meters, zero-phonon line
};

// Probabilities for one photon hitting the cavity while the spin is in the
// coupled state. These must sum to one: the photon is either reflected back
// out the input port, transmitted past the emitter, or scattered/absorbed.
struct CavityResponse {
    double reflect;
    double transmit;
    double scatter;
};

inline void check_cavity(const CavityParams& cp) {
    if (!(cp.quality_factor > 0.0) || !(cp.mode_volume > 0.0))
        throw std::domain_error("cavity: quality factor and mode volume must be positive");
    if (!(cp.refractive_index >= 1.0))
        throw std::domain_error("cavity: refractive index must be >= 1");
    if (cp.dipole_overlap < 0.0 || cp.dipole_overlap > 1.0)
        throw std::domain_error("cavity: dipole overlap must lie in [0,1]");
    if (!(cp.wavelength_freespace > 0.0))
        throw std::domain_error("cavity: wavelength must be positive");
}

// Q/V with V in (lambda/n)^3 units.
inline double optical_enhancement(const CavityParams& cp) {
    check_cavity(cp);
    return cp.quality_factor / cp.mode_volume;
}

// Convert an absolute mode volume in m^3 to (lambda/n)^3 units.
inline double mode_volume_lambda_units(double volume_m3, double wavelength_freespace,
                                       double refractive_index) {
    if (!(volume_m3 > 0.0) || !(wavelength_freespace > 0.0) || !(refractive_index >= 1.0))
        throw std::domain_error("cavity: bad mode volume conversion inputs");
    const double cell = wavelength_freespace / refractive_index;
    return volume_m3 / (cell * cell * cell);
}

// Purcell-type spontaneous emission enhancement into the cavity mode:
//   F = (3 / 4 pi^2) * (Q/V) * branching * zeta^2
// The branching ratio folds in the fraction of emission at the usable
// zero-phonon line, and zeta^2 the spatial/polarization overlap.
inline double spontaneous_emission_factor(const CavityParams& cp, const DefectOptics& d) {
    if (d.branching_ratio < 0.0 || d.branching_ratio > 1.0)
        throw std::domain_error("cavity: branching ratio must lie in [0,1]");
    const double pref = 3.0 / (4.0 * std::numbers::pi * std::numbers::pi);
    return pref * optical_enhancement(cp) * d.branching_ratio
           * cp.dipole_overlap * cp.dipole_overlap;
}

// Cooperativity of the spin-cavity system. For an over-coupled single-sided
// cavity in the weak-excitation limit this is half the emission enhancement.
inline double cooperativity(const CavityParams& cp, const DefectOptics& d) {
    return 0.5 * spontaneous_emission_factor(cp, d);
}

// Single-photon scattering off the coupled cavity, weak-excitation limit:
//   r = 2C/(2C+1), t = 1/(2C+1), probabilities are the squares, and the
//   scatter probability is what is left.
inline CavityResponse cavity_response(double cooperativity_value) {
    if (!(cooperativity_value >= 0.0))
        throw std::domain_error("cavity: cooperativity must be >= 0");
    const double denom = 2.0 * cooperativity_value + 1.0;
    const double r_amp = 2.0 * cooperativity_value / denom;
    const double t_amp = 1.0 / denom;
    CavityResponse resp;
    resp.reflect = r_amp * r_amp;
    resp.transmit = t_amp * t_amp;
    resp.scatter = 4.0 * cooperativity_value / (denom * denom);
    return resp;
}

} // namespace maqkd
