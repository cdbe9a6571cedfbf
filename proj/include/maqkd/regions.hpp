#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "maqkd/rates.hpp"

namespace maqkd {

struct RegionReport {
    std::optional<double> boundary_i_ii_km;
    std::optional<double> boundary_ii_iii_km;
    std::optional<double> median_slope_i;   // d log10(rate) / d km over region I
    std::optional<double> median_slope_ii;
    bool ordered = true;                    // region I run ends before region II starts
    double tolerance = 0.3;
};

namespace region_detail {

struct Run {
    std::size_t begin = 0;
    std::size_t end = 0;   // one past the last member
    std::size_t size() const { return end - begin; }
};

// Longest contiguous run of true flags.
inline Run longest_run(const std::vector<bool>& flags) {
    Run best, cur;
    for (std::size_t i = 0; i <= flags.size(); ++i) {
        if (i < flags.size() && flags[i]) {
            if (cur.size() == 0) cur.begin = i;
            cur.end = i + 1;
        } else {
            if (cur.size() > best.size()) best = cur;
            cur = Run{};
        }
    }
    return best;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace region_detail

// Label the points of a rate curve by local slope and locate the region
// boundaries. Slopes are central differences of log10(rate) in dB-free
// units per km; fiber attenuation alpha sets the reference slopes
// -alpha/20 (half-path scaling, region I) and -alpha/10 (full-path
// scaling, region II), matched within the given relative tolerance. The
// II/III boundary is the first point past the region II run where the curve
// falls at least twice as fast as the region II reference.
inline RegionReport classify_regions(RateCurve& curve, double alpha_db_per_km,
                                     double tolerance = 0.3) {
    if (!(alpha_db_per_km > 0.0))
        throw std::domain_error("regions: attenuation must be positive");
    if (!(tolerance > 0.0) || tolerance >= 1.0)
        throw std::domain_error("regions: tolerance must lie in (0,1)");
    check_distances_increasing(curve);

    auto& pts = curve.points;
    const std::size_t n = pts.size();
    RegionReport report;
    report.tolerance = tolerance;

    std::vector<double> slope(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double lo = pts[i - 1].skr_bits_per_s;
        const double hi = pts[i + 1].skr_bits_per_s;
        if (lo > 0.0 && hi > 0.0 && pts[i].skr_bits_per_s > 0.0)
            slope[i] = (std::log10(hi) - std::log10(lo))
                       / (pts[i + 1].distance_km - pts[i - 1].distance_km);
    }

    const double ref_i = -alpha_db_per_km / 20.0;
    const double ref_ii = -alpha_db_per_km / 10.0;
    const double steep = 2.0 * ref_ii;   // region III onset

    std::vector<bool> in_i(n, false), in_ii(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(slope[i])) continue;
        in_i[i] = std::abs(slope[i] - ref_i) <= tolerance * std::abs(ref_i);
        in_ii[i] = std::abs(slope[i] - ref_ii) <= tolerance * std::abs(ref_ii);
    }

    const auto run_i = region_detail::longest_run(in_i);
    const auto run_ii = region_detail::longest_run(in_ii);

    if (run_i.size() > 0) {
        std::vector<double> s(slope.begin() + run_i.begin, slope.begin() + run_i.end);
        report.median_slope_i = region_detail::median(std::move(s));
    }
    if (run_ii.size() > 0) {
        std::vector<double> s(slope.begin() + run_ii.begin, slope.begin() + run_ii.end);
        report.median_slope_ii = region_detail::median(std::move(s));
        report.boundary_i_ii_km = pts[run_ii.begin].distance_km;
    }
    report.ordered = run_i.size() == 0 || run_ii.size() == 0 || run_i.end <= run_ii.begin;

    // First distance at or beyond the region II run where the decay is at
    // least twice the full-path reference; fall back to the zero-rate edge.
    const std::size_t scan_from = run_ii.size() > 0 ? run_ii.begin : n;
    for (std::size_t i = scan_from; i < n; ++i) {
        if (!std::isnan(slope[i]) && slope[i] <= steep) {
            report.boundary_ii_iii_km = pts[i].distance_km;
            break;
        }
    }
    if (!report.boundary_ii_iii_km) {
        for (std::size_t i = scan_from; i < n; ++i) {
            if (pts[i].skr_bits_per_s == 0.0) {
                report.boundary_ii_iii_km = pts[i].distance_km;
                break;
            }
        }
    }

    for (auto& p : pts) {
        if (p.skr_bits_per_s <= 0.0) {
            p.region = Region::zero;
        } else if (report.boundary_ii_iii_km && p.distance_km >= *report.boundary_ii_iii_km) {
            p.region = Region::iii;
        } else if (report.boundary_i_ii_km && p.distance_km >= *report.boundary_i_ii_km) {
            p.region = Region::ii;
        } else {
            p.region = Region::i;
        }
    }
    return report;
}

// First distance where curve a reaches or exceeds curve b and stays there
// for the following three grid points (or to the end of the grid).
inline std::optional<double> crossover_distance(const RateCurve& a, const RateCurve& b) {
    if (a.points.size() != b.points.size())
        throw std::domain_error("regions: crossover needs matching distance grids");
    const std::size_t n = a.points.size();
    for (std::size_t i = 0; i < n; ++i)
        if (a.points[i].distance_km != b.points[i].distance_km)
            throw std::domain_error("regions: crossover needs matching distance grids");
    for (std::size_t i = 0; i < n; ++i) {
        bool holds = true;
        for (std::size_t j = i; j < std::min(i + 4, n); ++j) {
            if (a.points[j].skr_bits_per_s < b.points[j].skr_bits_per_s) {
                holds = false;
                break;
            }
        }
        if (holds) return a.points[i].distance_km;
    }
    return std::nullopt;
}

} // namespace maqkd
