#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "maqkd/params.hpp"
#include "maqkd/rates.hpp"
#include "maqkd/rng.hpp"
#include "maqkd/spin_photon.hpp"

namespace maqkd {

enum class SwitchOrientation { straight, crossed };

// Live state of the central node between rounds: which sender loaded the
// memory first, what is stored, and how the routing switch is set. The
// switch toggles on first-herald events only.
struct NodeState {
    SpinState stored = init_spin();
    bool loaded = false;
    bool stored_dark = false;
    int first_side = 0;                 // 0 = sender A, 1 = sender B
    int first_basis = 0;                // 0 = Z (time bin), 1 = X (phase)
    int first_bit = 0;
    long long wait_rounds = 0;
    SwitchOrientation orientation = SwitchOrientation::straight;
};

struct TrialStats {
    std::uint64_t seed = 0;
    long long rounds_simulated = 0;
    long long first_heralds = 0;        // cycles that got a first herald, partial or not
    long long n_cycles = 0;             // cycles that ran to success or timeout
    long long bsm_successes = 0;
    long long timeouts = 0;
    long long heralds_side_a = 0;       // detector clicks attributed to each sender
    long long heralds_side_b = 0;
    long long dark_heralds = 0;
    long long x_pairs = 0;
    long long x_errors = 0;
    long long z_pairs = 0;
    long long z_errors = 0;
    long long bell_phi_plus = 0;
    long long bell_phi_minus = 0;
    // second-wait bookkeeping over completed cycles (timeouts count at n_max)
    std::vector<long long> wait_histogram;
    long long sum_wait = 0;
    long long sum_wait_sq = 0;
    // per-cycle totals for the yield ratio estimator
    long long sum_cycle_rounds = 0;
    long long sum_cycle_rounds_sq = 0;
    long long sum_success_rounds = 0;
};

inline TrialStats merge(const TrialStats& a, const TrialStats& b) {
    if (a.wait_histogram.size() != b.wait_histogram.size())
        throw std::domain_error("montecarlo: cannot merge stats with different cutoffs");
    TrialStats out = a;
    out.seed = a.seed ^ b.seed;
    out.rounds_simulated += b.rounds_simulated;
    out.first_heralds += b.first_heralds;
    out.n_cycles += b.n_cycles;
    out.bsm_successes += b.bsm_successes;
    out.timeouts += b.timeouts;
    out.heralds_side_a += b.heralds_side_a;
    out.heralds_side_b += b.heralds_side_b;
    out.dark_heralds += b.dark_heralds;
    out.x_pairs += b.x_pairs;
    out.x_errors += b.x_errors;
    out.z_pairs += b.z_pairs;
    out.z_errors += b.z_errors;
    out.bell_phi_plus += b.bell_phi_plus;
    out.bell_phi_minus += b.bell_phi_minus;
    for (std::size_t i = 0; i < out.wait_histogram.size(); ++i)
        out.wait_histogram[i] += b.wait_histogram[i];
    out.sum_wait += b.sum_wait;
    out.sum_wait_sq += b.sum_wait_sq;
    out.sum_cycle_rounds += b.sum_cycle_rounds;
    out.sum_cycle_rounds_sq += b.sum_cycle_rounds_sq;
    out.sum_success_rounds += b.sum_success_rounds;
    return out;
}

// Everything the node simulation needs, decoupled from ProtocolConfig so
// synthetic herald probabilities can be injected directly in tests.
struct NodeSimParams {
    double p_real;
    double p_dark;
    long long n_max;
    long long dead_success_rounds;
    long long dead_timeout_rounds;
    double round_time_s;
    double t2_s;
    double mis_a;
    double mis_b;
    // When the second device covers the first one's readout and reset, the
    // dead rounds vanish from the round clock. Left off by default so the
    // simulation matches the serialized analytic cycle exactly.
    bool pipelining = false;
};

inline NodeSimParams node_sim_params(const ProtocolConfig& cfg, double distance_km,
                                     bool pipelining = false) {
    const CycleModel m = ma_mdi_cycle(cfg, distance_km);
    NodeSimParams sp;
    sp.p_real = m.p_real;
    sp.p_dark = m.p_dark;
    sp.n_max = m.n_max;
    sp.dead_success_rounds = static_cast<long long>(m.dead_success_rounds);
    sp.dead_timeout_rounds = static_cast<long long>(m.dead_timeout_rounds);
    sp.round_time_s = m.round_time_s;
    sp.t2_s = cfg.device.decoherence.t2_dephase;
    sp.mis_a = cfg.misalignment_a;
    sp.mis_b = cfg.misalignment_b;
    sp.pipelining = pipelining;
    return sp;
}

// Analytic cycle model the simulation should reproduce.
inline CycleModel cycle_model(const NodeSimParams& sp) {
    return CycleModel(sp.p_real, sp.p_dark, sp.round_time_s, sp.n_max,
                      sp.pipelining ? 0.0 : static_cast<double>(sp.dead_success_rounds),
                      sp.pipelining ? 0.0 : static_cast<double>(sp.dead_timeout_rounds));
}

namespace mc_detail {

struct SentState {
    int basis;   // 0 = Z, 1 = X
    int bit;
    PhotonState photon;   // as it arrives at the node, misalignment applied
};

inline PhotonState base_state(int idx) {
    const double r = 1.0 / std::sqrt(2.0);
    switch (idx) {
        case 0: return PhotonState{cplx(1.0), cplx(0.0)};        // t0, Z bit 0
        case 1: return PhotonState{cplx(0.0), cplx(1.0)};        // t1, Z bit 1
        case 2: return PhotonState{cplx(r), cplx(r)};            // +,  X bit 0
        default: return PhotonState{cplx(r), cplx(-r)};          // -,  X bit 1
    }
}

inline PhotonState misaligned(const PhotonState& p) {
    return PhotonState{p.amp_t1, p.amp_t0};   // bin swap; X states are eigenstates
}

// First herald: every sender state survives the write with the same
// probability into a fresh memory, so the state is drawn uniformly.
inline SentState sample_first_state(double e_flip, bool real, CounterRng& rng) {
    const int idx = static_cast<int>(rng.next_double() * 4.0) & 3;
    SentState s{idx >= 2 ? 1 : 0, idx & 1, base_state(idx)};
    if (real && rng.next_double() < e_flip) s.photon = misaligned(s.photon);
    return s;
}

// Second herald: the write succeeds only in proportion to the overlap with
// the loaded memory, so conditioned on completion the sender's state and
// the misalignment flip are drawn from the survival-weighted table. The
// unconditioned survival averages to 1/2 (already folded into the per-round
// herald probability), hence the factor 2 renormalization.
inline SentState sample_completing_state(const SpinState& stored, double e_flip,
                                         CounterRng& rng) {
    const double u = rng.next_double();
    double cum = 0.0;
    SentState last{0, 0, base_state(0)};
    bool have_last = false;
    for (int idx = 0; idx < 4; ++idx) {
        for (int flip = 0; flip < 2; ++flip) {
            PhotonState ph = base_state(idx);
            if (flip) ph = misaligned(ph);
            const double survive = std::norm(stored.amp_down * ph.amp_t0)
                                   + std::norm(stored.amp_up * ph.amp_t1);
            const double w = 0.25 * (flip ? e_flip : 1.0 - e_flip) * survive * 2.0;
            if (w <= 0.0) continue;
            cum += w;
            last = SentState{idx >= 2 ? 1 : 0, idx & 1, ph};
            have_last = true;
            if (u < cum) return last;
        }
    }
    if (!have_last)
        throw std::domain_error("montecarlo: loaded memory rejects every sender state");
    return last;   // floating-point slack at the top of the table
}

} // namespace mc_detail

// Round-by-round simulation of the memory-assisted node. Each round both
// idle-facing senders fire one photon; a side heralds with the effective
// per-round probability (genuine write or dark count). The first herald
// loads the memory and toggles the switch; subsequent rounds try for the
// partner herald until success or the cutoff. On success the stored qubit
// takes a dephasing flip with the accumulated-wait probability, the second
// photon is folded in with the asynchronous-BSM state math, and the spin X
// readout produces the Bell outcome. Sifting keeps same-basis pairs.
inline TrialStats simulate_node(const NodeSimParams& sp, long long n_rounds,
                                std::uint64_t seed) {
    if (n_rounds < 0)
        throw std::domain_error("montecarlo: round budget must be >= 0");
    const CycleModel model = cycle_model(sp);   // validates probabilities
    const double p_eff = model.p_eff;
    const long long dead_success = sp.pipelining ? 0 : sp.dead_success_rounds;
    const long long dead_timeout = sp.pipelining ? 0 : sp.dead_timeout_rounds;

    CounterRng rng(seed);
    TrialStats st;
    st.seed = seed;
    st.wait_histogram.assign(static_cast<std::size_t>(sp.n_max), 0);

    NodeState node;
    long long clock = 0;
    while (clock < n_rounds) {
        // Phase 1: wait for a first herald on either side.
        long long w1 = 0;
        int side = -1;
        bool first_dark = false;
        while (clock < n_rounds) {
            ++clock;
            ++w1;
            const double ua = rng.next_double();
            const double ub = rng.next_double();
            const bool ha = ua < p_eff;
            const bool hb = ub < p_eff;
            if (ha && hb) {
                side = (rng.next_double() < 0.5) ? 0 : 1;
                first_dark = (side == 0 ? ua : ub) >= sp.p_real;
                break;
            }
            if (ha || hb) {
                side = ha ? 0 : 1;
                first_dark = (ha ? ua : ub) >= sp.p_real;
                break;
            }
        }
        if (side < 0) break;   // budget exhausted while idle

        ++st.first_heralds;
        (side == 0 ? st.heralds_side_a : st.heralds_side_b) += 1;
        const double e_first = (side == 0) ? sp.mis_a : sp.mis_b;
        const auto first = mc_detail::sample_first_state(e_first, !first_dark, rng);
        node.loaded = true;
        node.first_side = side;
        node.first_basis = first.basis;
        node.first_bit = first.bit;
        node.stored_dark = first_dark;
        node.orientation = (node.orientation == SwitchOrientation::straight)
                               ? SwitchOrientation::crossed
                               : SwitchOrientation::straight;
        if (first_dark) {
            ++st.dark_heralds;
            node.stored = init_spin();
        } else {
            const double n =
                std::sqrt(std::norm(first.photon.amp_t0) + std::norm(first.photon.amp_t1));
            node.stored = SpinState{first.photon.amp_t0 / n, first.photon.amp_t1 / n};
        }

        // Phase 2: the other side keeps firing until the partner herald or
        // the cutoff. One draw per round decides completion and whether the
        // completing click was genuine.
        long long w2 = 0;
        bool completed = false;
        bool second_dark = false;
        while (w2 < sp.n_max && clock < n_rounds) {
            ++clock;
            ++w2;
            const double u = rng.next_double();
            if (u < p_eff) {
                completed = true;
                second_dark = (u >= sp.p_real);
                break;
            }
        }
        node.wait_rounds = w2;

        if (!completed && w2 < sp.n_max) break;   // budget exhausted mid-wait

        if (completed) {
            const int other = 1 - side;
            (other == 0 ? st.heralds_side_a : st.heralds_side_b) += 1;
            if (second_dark) ++st.dark_heralds;

            // Dephasing accumulated while the loaded memory waited.
            const double flip_prob = dephase_error_prob(
                static_cast<double>(w2) * sp.round_time_s, sp.t2_s);
            if (rng.next_double() < flip_prob) node.stored = apply_dephase_flip(node.stored);

            const double e_second = (other == 0) ? sp.mis_a : sp.mis_b;
            SpinState spin_out;
            int second_basis;
            int second_bit;
            if (second_dark) {
                // Nothing was written; the node reads out the stored qubit
                // against a sender state it never received.
                const auto sent = mc_detail::sample_first_state(e_second, false, rng);
                second_basis = sent.basis;
                second_bit = sent.bit;
                spin_out = node.stored;
            } else {
                const auto sent =
                    mc_detail::sample_completing_state(node.stored, e_second, rng);
                second_basis = sent.basis;
                second_bit = sent.bit;
                const JointState joint = write_photon(node.stored, sent.photon);
                // Both herald ports leave the same spin after the minus-port
                // feed-forward, so the port draw is skipped.
                spin_out = herald_project(joint, HeraldPort::plus_port);
            }

            const BellLabel bell = readout_x(spin_out, rng.next_double());
            (bell == BellLabel::phi_plus ? st.bell_phi_plus : st.bell_phi_minus) += 1;

            if (node.first_basis == second_basis) {
                if (second_basis == 0) {
                    ++st.z_pairs;
                    if (node.first_bit != second_bit) ++st.z_errors;
                } else {
                    ++st.x_pairs;
                    const BellLabel expected = ((node.first_bit ^ second_bit) == 0)
                                                   ? BellLabel::phi_plus
                                                   : BellLabel::phi_minus;
                    if (bell != expected) ++st.x_errors;
                }
            }

            ++st.bsm_successes;
            st.wait_histogram[static_cast<std::size_t>(w2 - 1)] += 1;
            st.sum_wait += w2;
            st.sum_wait_sq += w2 * w2;
            clock += dead_success;
            const long long cycle_rounds = w1 + w2 + dead_success;
            ++st.n_cycles;
            st.sum_cycle_rounds += cycle_rounds;
            st.sum_cycle_rounds_sq += cycle_rounds * cycle_rounds;
            st.sum_success_rounds += cycle_rounds;
        } else {
            // Timeout: the memory decohered past use; re-initialize.
            ++st.timeouts;
            st.wait_histogram[static_cast<std::size_t>(sp.n_max - 1)] += 1;
            st.sum_wait += sp.n_max;
            st.sum_wait_sq += sp.n_max * sp.n_max;
            clock += dead_timeout;
            const long long cycle_rounds = w1 + sp.n_max + dead_timeout;
            ++st.n_cycles;
            st.sum_cycle_rounds += cycle_rounds;
            st.sum_cycle_rounds_sq += cycle_rounds * cycle_rounds;
        }
        node.loaded = false;
        node.stored_dark = false;
    }
    st.rounds_simulated = clock;
    return st;
}

inline TrialStats simulate_node(const ProtocolConfig& cfg, double distance_km,
                                long long n_rounds, std::uint64_t seed,
                                bool pipelining = false) {
    return simulate_node(node_sim_params(cfg, distance_km, pipelining), n_rounds, seed);
}

struct MetricCheck {
    std::string name;
    bool sufficient;   // enough samples to form the statistic at all
    double sample;
    double expected;
    double z;
};

struct ComparisonReport {
    std::vector<MetricCheck> metrics;
    bool any_insufficient = false;

    bool all_within(double z_max = 3.0) const {
        for (const auto& m : metrics)
            if (m.sufficient && std::abs(m.z) > z_max) return false;
        return true;
    }
};

// Error rates the simulation is expected to produce. These compose the
// dark-count floor per sifted pair (either herald spurious randomizes the
// outcome completely), which is what the sampled cycles actually realize.
inline QberPair simulated_qber_expectation(const NodeSimParams& sp) {
    const CycleModel m = cycle_model(sp);
    const double w = m.dark_flag_w;
    const double w_any = 1.0 - (1.0 - w) * (1.0 - w);
    const double eps = m.mean_dephase_error(sp.t2_s);
    const double e_mis = sp.mis_a + sp.mis_b - 2.0 * sp.mis_a * sp.mis_b;
    return QberPair{(1.0 - w_any) * eps + 0.5 * w_any,
                    (1.0 - w_any) * e_mis + 0.5 * w_any};
}

namespace mc_detail {

inline MetricCheck binomial_check(const std::string& name, long long k, long long n,
                                  double expected) {
    MetricCheck c{name, n > 0, n > 0 ? static_cast<double>(k) / static_cast<double>(n) : 0.0,
                  expected, 0.0};
    if (!c.sufficient) return c;
    const double var = expected * (1.0 - expected);
    if (var <= 0.0) {
        c.z = (c.sample == expected) ? 0.0 : std::numeric_limits<double>::infinity();
        return c;
    }
    c.z = (c.sample - expected) / std::sqrt(var / static_cast<double>(n));
    return c;
}

} // namespace mc_detail

// z-scores of the empirical yield, mean second wait, and sifted error rates
// against the renewal model with the same parameters. A metric without the
// samples to support it is reported as insufficient rather than failed.
inline ComparisonReport compare_to_analytic(const TrialStats& st, const NodeSimParams& sp) {
    const CycleModel m = cycle_model(sp);
    ComparisonReport rep;

    {
        MetricCheck c{"yield_per_round", st.n_cycles >= 2, 0.0, m.yield_per_round(), 0.0};
        if (c.sufficient) {
            const double n = static_cast<double>(st.n_cycles);
            const double s_bar = static_cast<double>(st.bsm_successes) / n;
            const double t_bar = static_cast<double>(st.sum_cycle_rounds) / n;
            c.sample = static_cast<double>(st.bsm_successes)
                       / static_cast<double>(st.sum_cycle_rounds);
            const double var_s = (s_bar - s_bar * s_bar) * n / (n - 1.0);
            const double var_t = (static_cast<double>(st.sum_cycle_rounds_sq) / n
                                  - t_bar * t_bar) * n / (n - 1.0);
            const double cov = (static_cast<double>(st.sum_success_rounds) / n
                                - s_bar * t_bar) * n / (n - 1.0);
            const double var_ratio = (var_s + c.sample * c.sample * var_t
                                      - 2.0 * c.sample * cov) / (n * t_bar * t_bar);
            if (var_ratio > 0.0) {
                c.z = (c.sample - c.expected) / std::sqrt(var_ratio);
            } else {
                c.z = (c.sample == c.expected) ? 0.0
                                               : std::numeric_limits<double>::infinity();
            }
        }
        rep.metrics.push_back(c);
    }

    {
        const long long n_waits = st.bsm_successes + st.timeouts;
        MetricCheck c{"mean_wait_rounds", n_waits > 0, 0.0, m.mean_wait_completed, 0.0};
        if (c.sufficient) {
            c.sample = static_cast<double>(st.sum_wait) / static_cast<double>(n_waits);
            const double var = m.second_moment_completed
                               - m.mean_wait_completed * m.mean_wait_completed;
            if (var > 1e-30) {
                c.z = (c.sample - c.expected)
                      / std::sqrt(var / static_cast<double>(n_waits));
            } else {
                c.z = (std::abs(c.sample - c.expected) < 1e-9)
                          ? 0.0
                          : std::numeric_limits<double>::infinity();
            }
        }
        rep.metrics.push_back(c);
    }

    const QberPair q = simulated_qber_expectation(sp);
    rep.metrics.push_back(mc_detail::binomial_check("qber_x", st.x_errors, st.x_pairs, q.e_x));
    rep.metrics.push_back(mc_detail::binomial_check("qber_z", st.z_errors, st.z_pairs, q.e_z));

    for (const auto& c : rep.metrics)
        if (!c.sufficient) rep.any_insufficient = true;
    return rep;
}

inline ComparisonReport compare_to_analytic(const TrialStats& st, const ProtocolConfig& cfg,
                                            double distance_km, bool pipelining = false) {
    return compare_to_analytic(st, node_sim_params(cfg, distance_km, pipelining));
}

} // namespace maqkd
