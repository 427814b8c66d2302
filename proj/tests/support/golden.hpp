// Frozen regression fixtures shared by the unit suites and the acceptance
// runner. The numeric literals pin the deterministic rng/extraction chain;
// regenerate them only for an intentional behavior change.
#pragma once

#include <vector>

#include "mfagl/geofeatures.hpp"
#include "mfagl/rng.hpp"

namespace oracle {

/// Ten-tree forest prediction for the pinned dataset in the baselines suite.
inline constexpr double kGoldenRfPrediction = 2.8500647162571964;

inline mfagl::geo::Poi pinned_poi() { return {"O1", 35.68, 139.76, 45.0}; }

/// A 40-point wander near the pinned POI, reproducible from seed 62.
inline mfagl::geo::GpsTrajectory pinned_trajectory() {
    mfagl::geo::GpsTrajectory traj;
    traj.user = "u9";
    mfagl::Rng rng(62);
    mfagl::Timestamp t = 1'000'000;
    double lat = 35.681, lon = 139.762;
    for (int i = 0; i < 40; ++i) {
        traj.points.push_back({t, lat, lon});
        t += 30 + static_cast<mfagl::Timestamp>(rng.uniform_index(60));
        lat += rng.uniform(-1e-4, 1e-4);
        lon += rng.uniform(-1e-4, 1e-4);
    }
    return traj;
}

/// encode_row() of the pinned trajectory extracted against the pinned POI
/// with the default ladder: 17 counts, then 6 scalars, then 9+9 profiles.
inline const std::vector<double>& golden_geo_row() {
    static const std::vector<double> row = {
        40, 40, 40, 8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, // ladder counts
        0, 45, 0,                                              // outside, radius, inside
        0.48896709743659472, 1.1254927335155984, 1,            // mean, max, stays
        0.44123581414778296, 0.58500415724474653, 0.60167105456701719,
        0.78797659859320557, 0.35677976749316148, 0.23750235709241746,
        0.17256714597430561, 0.31293006166792992, 0.21052539259480191,
        -0.4840850390527352, -0.90334628022302221, -0.8053899325938535,
        -0.82476629066884488, -0.75928544793335584, -0.18429787269330813,
        -0.71742818494145777, 0.99389297022765555, -0.020588745536613908};
    return row;
}

} // namespace oracle
