#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "maqkd/regions.hpp"

using namespace maqkd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RatePoint bare_point(double km, double skr) {
    return RatePoint{km, skr, 0.0, 0.0, 0.0, 0.0, Region::i};
}

// Piecewise power law with exact decade slopes: -alpha/20 out to 100 km,
// -alpha/10 out to 200 km, then a fourfold steeper collapse and a hard zero.
RateCurve synthetic_curve(double alpha) {
    RateCurve c;
    c.label = "synthetic";
    double log_v = 6.0;
    for (int d = 0; d <= 260; ++d) {
        double slope;
        if (d <= 100) slope = -alpha / 20.0;
        else if (d <= 200) slope = -alpha / 10.0;
        else slope = -4.0 * alpha / 10.0;
        if (d > 0) log_v += slope;
        c.points.push_back(bare_point(d, d <= 240 ? std::pow(10.0, log_v) : 0.0));
    }
    return c;
}

} // namespace

TEST_CASE("region classification on an exact piecewise power law") {
    const double alpha = 0.3;
    RateCurve c = synthetic_curve(alpha);
    const RegionReport rep = classify_regions(c, alpha);

    REQUIRE(rep.boundary_i_ii_km.has_value());
    REQUIRE(rep.boundary_ii_iii_km.has_value());
    REQUIRE(*rep.boundary_i_ii_km == 100.0);
    REQUIRE(*rep.boundary_ii_iii_km == 200.0);
    REQUIRE(rep.ordered);

    REQUIRE(rep.median_slope_i.has_value());
    REQUIRE(rep.median_slope_ii.has_value());
    REQUIRE_THAT(*rep.median_slope_i, WithinAbs(-alpha / 20.0, 1e-9));
    REQUIRE_THAT(*rep.median_slope_ii, WithinAbs(-alpha / 10.0, 1e-9));

    // painting: I before the first boundary, II between, III after, zero at
    // the rate floor
    REQUIRE(c.points[50].region == Region::i);
    REQUIRE(c.points[99].region == Region::i);
    REQUIRE(c.points[100].region == Region::ii);
    REQUIRE(c.points[199].region == Region::ii);
    REQUIRE(c.points[200].region == Region::iii);
    REQUIRE(c.points[240].region == Region::iii);
    REQUIRE(c.points[241].region == Region::zero);
    REQUIRE(c.points[260].region == Region::zero);
}

TEST_CASE("region names") {
    REQUIRE(std::string(region_name(Region::i)) == "I");
    REQUIRE(std::string(region_name(Region::ii)) == "II");
    REQUIRE(std::string(region_name(Region::iii)) == "III");
    REQUIRE(std::string(region_name(Region::zero)) == "zero");
}

TEST_CASE("degenerate curves classify without boundaries") {
    RateCurve dead;
    for (int d = 0; d <= 20; ++d) dead.points.push_back(bare_point(d, 0.0));
    const RegionReport rep = classify_regions(dead, 0.3);
    REQUIRE_FALSE(rep.boundary_i_ii_km.has_value());
    REQUIRE_FALSE(rep.boundary_ii_iii_km.has_value());
    REQUIRE(rep.ordered);
    for (const auto& p : dead.points) REQUIRE(p.region == Region::zero);

    RateCurve flat;
    for (int d = 0; d <= 20; ++d) flat.points.push_back(bare_point(d, 1.0));
    const RegionReport rep2 = classify_regions(flat, 0.3);
    REQUIRE_FALSE(rep2.boundary_i_ii_km.has_value());
    REQUIRE_FALSE(rep2.median_slope_i.has_value());
}

TEST_CASE("classification input validation") {
    RateCurve c = synthetic_curve(0.3);
    REQUIRE_THROWS_AS(classify_regions(c, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(classify_regions(c, 0.3, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(classify_regions(c, 0.3, 1.0), std::domain_error);
}

TEST_CASE("default memory-assisted curve splits into the three regimes") {
    const ProtocolConfig cfg = default_protocol_config();
    RateCurve c;
    for (int d = 0; d <= 400; ++d) c.points.push_back(skr_ma_mdi(cfg, d));
    const RegionReport rep = classify_regions(c, cfg.link.fiber.attenuation_db_per_km);

    REQUIRE(rep.ordered);
    REQUIRE(rep.boundary_i_ii_km.has_value());
    REQUIRE(rep.boundary_ii_iii_km.has_value());
    REQUIRE(*rep.boundary_i_ii_km == 191.0);
    REQUIRE(*rep.boundary_ii_iii_km == 236.0);

    REQUIRE_THAT(*rep.median_slope_i, WithinRel(-1.50796932e-02, 1e-6));
    REQUIRE_THAT(*rep.median_slope_ii, WithinRel(-2.59572939e-02, 1e-6));

    REQUIRE(c.points[244].skr_bits_per_s > 0.0);
    REQUIRE(c.points[245].skr_bits_per_s == 0.0);

    // the painted labels never step backwards
    auto rank = [](Region r) {
        switch (r) {
            case Region::i: return 0;
            case Region::ii: return 1;
            case Region::iii: return 2;
            default: return 3;
        }
    };
    for (std::size_t i = 1; i < c.points.size(); ++i)
        REQUIRE(rank(c.points[i].region) >= rank(c.points[i - 1].region));
}

TEST_CASE("longer dephasing times push the waiting rolloff outward") {
    const double t2_values[] = {10e-3, 100e-3, 1.0, 10.0};
    const double expected_b23[] = {236.0, 267.0, 282.0, 284.0};
    const double expected_zero[] = {245.0, 276.0, 290.0, 293.0};

    ProtocolConfig cfg = default_protocol_config();
    double prev_b23 = 0.0;
    for (int k = 0; k < 4; ++k) {
        cfg.device.decoherence.t2_dephase = t2_values[k];
        cfg.memory_cutoff_s = 10.0 * t2_values[k];
        RateCurve c;
        for (int d = 0; d <= 400; ++d) c.points.push_back(skr_ma_mdi(cfg, d));
        const RegionReport rep = classify_regions(c, cfg.link.fiber.attenuation_db_per_km);

        REQUIRE(rep.boundary_ii_iii_km.has_value());
        REQUIRE(*rep.boundary_ii_iii_km == expected_b23[k]);
        REQUIRE(*rep.boundary_ii_iii_km > prev_b23);
        prev_b23 = *rep.boundary_ii_iii_km;

        const int zero_km = static_cast<int>(expected_zero[k]);
        REQUIRE(c.points[zero_km - 1].skr_bits_per_s > 0.0);
        REQUIRE(c.points[zero_km].skr_bits_per_s == 0.0);
    }

    // first decade moves the rolloff by tens of kilometres
    REQUIRE(expected_b23[1] - expected_b23[0] >= 30.0);
    REQUIRE(expected_b23[1] - expected_b23[0] <= 70.0);
}

TEST_CASE("crossover distance on synthetic curves") {
    RateCurve a, b;
    for (int d = 0; d <= 30; ++d) {
        a.points.push_back(bare_point(d, d < 10 ? 1.0 : 3.0));
        b.points.push_back(bare_point(d, 2.0));
    }
    REQUIRE(crossover_distance(a, b).has_value());
    REQUIRE(*crossover_distance(a, b) == 10.0);

    RateCurve never;
    for (int d = 0; d <= 30; ++d) never.points.push_back(bare_point(d, 0.5));
    REQUIRE_FALSE(crossover_distance(never, b).has_value());

    // a transient spike that does not hold for four points is skipped
    RateCurve touch = never;
    touch.points[5].skr_bits_per_s = 10.0;
    REQUIRE_FALSE(crossover_distance(touch, b).has_value());

    // near the end of the grid the hold window shrinks to what is left
    RateCurve tail = never;
    tail.points[29].skr_bits_per_s = 10.0;
    tail.points[30].skr_bits_per_s = 10.0;
    REQUIRE(crossover_distance(tail, b).has_value());
    REQUIRE(*crossover_distance(tail, b) == 29.0);

    RateCurve short_grid;
    for (int d = 0; d <= 10; ++d) short_grid.points.push_back(bare_point(d, 1.0));
    REQUIRE_THROWS_AS(crossover_distance(short_grid, b), std::domain_error);

    RateCurve shifted = b;
    shifted.points[3].distance_km += 0.5;
    REQUIRE_THROWS_AS(crossover_distance(shifted, b), std::domain_error);
}

TEST_CASE("fast-rotation memory link overtakes the direct link at 19 km") {
    ProtocolConfig cfg = default_protocol_config();
    RateCurve bb;
    for (int d = 0; d <= 40; ++d) bb.points.push_back(skr_bb84(cfg, d));

    ProtocolConfig fast = cfg;
    fast.device.tau_pi = 10e-9;
    fast.device.tau_init = fast.device.tau_r + fast.device.tau_pi;
    RateCurve ma;
    for (int d = 0; d <= 40; ++d) ma.points.push_back(skr_ma_mdi(fast, d));

    REQUIRE(ma.points[0].skr_bits_per_s < bb.points[0].skr_bits_per_s);
    const auto cross = crossover_distance(ma, bb);
    REQUIRE(cross.has_value());
    REQUIRE(*cross == 19.0);
}
