#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/ingest.hpp"
#include "evcast/rand.hpp"
#include "evcast/time.hpp"

namespace evcast {

/// Configuration for the deterministic synthetic fleet. The generated taxis
/// follow a home -> work -> roam -> home daily cycle with work points biased
/// toward the bbox center, so mid-day occupancy (and aggregated energy) peaks
/// in the central regions. Vehicles orbit slowly even at night, so they never
/// park and the midnight full-recharge assumption is exercised.
struct SyntheticFleetConfig {
    int num_vehicles = 200;
    int num_days = 6;
    BBox bbox{116.20, 39.75, 116.56, 40.05};
    int fix_interval_s = 300;
    std::uint64_t rng_seed = 1;
    double pattern_strength = 0.8; // 0 = pure random walk, 1 = fully periodic
    std::int64_t start_day = days_from_civil(2008, 2, 3);

    void validate() const {
        if (num_vehicles < 1) throw ConfigError("synthetic fleet: num_vehicles must be >= 1");
        if (num_days < 3)
            throw ConfigError("synthetic fleet: num_days must be >= 3 (train/validate/test)");
        if (!bbox.valid()) throw ConfigError("synthetic fleet: bbox is degenerate");
        if (fix_interval_s < 1 || fix_interval_s > 86400)
            throw ConfigError("synthetic fleet: fix_interval must be in [1, 86400] seconds");
        if (!(pattern_strength >= 0.0 && pattern_strength <= 1.0))
            throw ConfigError("synthetic fleet: pattern_strength must be in [0, 1]");
    }
};

namespace detail {

struct Point {
    double lon, lat;
};

inline Point lerp(const Point& a, const Point& b, double u) {
    return {a.lon + (b.lon - a.lon) * u, a.lat + (b.lat - a.lat) * u};
}

} // namespace detail

/// Deterministic given rng_seed: equal seeds give byte-identical fleets.
inline std::vector<Trajectory> generate_synthetic_fleet(const SyntheticFleetConfig& cfg) {
    cfg.validate();
    const double lon_span = cfg.bbox.lon_span();
    const double lat_span = cfg.bbox.lat_span();
    const double cx = cfg.bbox.lon_min + lon_span / 2.0;
    const double cy = cfg.bbox.lat_min + lat_span / 2.0;
    const std::int64_t start_ts = cfg.start_day * 86400;
    const std::int64_t total_fixes =
        static_cast<std::int64_t>(cfg.num_days) * 86400 / cfg.fix_interval_s;
    const double noise_scale = 1.0 - cfg.pattern_strength;

    int id_width = 1;
    for (int n = cfg.num_vehicles; n >= 10; n /= 10) ++id_width;

    std::vector<Trajectory> fleet;
    fleet.reserve(static_cast<std::size_t>(cfg.num_vehicles));
    for (int v = 0; v < cfg.num_vehicles; ++v) {
        auto rng = make_rng(cfg.rng_seed, static_cast<std::uint64_t>(v));

        const detail::Point home{uniform(rng, cfg.bbox.lon_min, cfg.bbox.lon_max),
                                 uniform(rng, cfg.bbox.lat_min, cfg.bbox.lat_max)};
        // Work sites cluster in the central ~third of the box.
        const detail::Point work{cx + (uniform01(rng) - 0.5) * 0.35 * lon_span,
                                 cy + (uniform01(rng) - 0.5) * 0.35 * lat_span};
        const detail::Point roam{cx + (uniform01(rng) - 0.5) * 0.6 * lon_span,
                                 cy + (uniform01(rng) - 0.5) * 0.6 * lat_span};

        // Small orbit keyed to second-of-day keeps every taxi moving
        // (nonzero segment speed) without breaking daily periodicity.
        const double orbit_r = uniform(rng, 0.0015, 0.0045) * std::min(lon_span, lat_span) / 0.36;
        const double orbit_period = uniform(rng, 2000.0, 3600.0);
        const double orbit_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

        // Anchor schedule, hours of day: overnight at home, commute in,
        // central work/roam through mid-day, commute out in the evening.
        const double anchor_hours[6] = {0.0, 6.0, 10.0, 13.0, 17.0, 24.0};
        const detail::Point anchor_pts[6] = {home, home, work, roam, work, home};

        double walk_lon = 0.0, walk_lat = 0.0;
        const double step = 0.03;

        Trajectory traj;
        traj.vehicle_id = [&] {
            std::string s = std::to_string(v + 1);
            return "v" + std::string(static_cast<std::size_t>(id_width) - s.size(), '0') + s;
        }();
        traj.fixes.reserve(static_cast<std::size_t>(total_fixes));

        for (std::int64_t i = 0; i < total_fixes; ++i) {
            const std::int64_t ts = start_ts + i * cfg.fix_interval_s;
            const double hod = static_cast<double>(second_of_day(ts)) / 3600.0;

            int seg = 0;
            while (seg < 4 && hod >= anchor_hours[seg + 1]) ++seg;
            const double u =
                (hod - anchor_hours[seg]) / (anchor_hours[seg + 1] - anchor_hours[seg]);
            detail::Point base = detail::lerp(anchor_pts[seg], anchor_pts[seg + 1], u);

            const double ang =
                orbit_phase + 2.0 * std::numbers::pi * static_cast<double>(second_of_day(ts)) / orbit_period;
            base.lon += orbit_r * std::cos(ang);
            base.lat += orbit_r * std::sin(ang);

            // Mean-reverting jitter; amplitude vanishes at pattern_strength 1.
            walk_lon = 0.97 * walk_lon + step * lon_span * (uniform01(rng) - 0.5);
            walk_lat = 0.97 * walk_lat + step * lat_span * (uniform01(rng) - 0.5);
            double lon = base.lon + noise_scale * walk_lon;
            double lat = base.lat + noise_scale * walk_lat;
            lon = std::clamp(lon, cfg.bbox.lon_min, cfg.bbox.lon_max);
            lat = std::clamp(lat, cfg.bbox.lat_min, cfg.bbox.lat_max);

            traj.fixes.push_back(GpsFix{traj.vehicle_id, ts, lon, lat});
        }
        fleet.push_back(std::move(traj));
    }
    return fleet;
}

} // namespace evcast
