#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/geo.hpp"
#include "evcast/text.hpp"
#include "evcast/time.hpp"

namespace evcast {

/// One GPS record of one vehicle.
struct GpsFix {
    std::string vehicle_id;
    std::int64_t timestamp = 0; // seconds since epoch, no time zone
    double lon = 0.0;
    double lat = 0.0;

    bool operator==(const GpsFix&) const = default;
};

/// Time-ordered (after cleaning) positions of one vehicle.
struct Trajectory {
    std::string vehicle_id;
    std::vector<GpsFix> fixes;

    bool operator==(const Trajectory&) const = default;
};

struct ParseOptions {
    bool skip_malformed = false; // log-and-skip instead of throwing
};

struct ParseStats {
    std::size_t lines = 0;
    std::size_t skipped = 0;
};

// Record format: "vehicle_id,YYYY-MM-DD HH:MM:SS,lon,lat", one fix per line,
// '\n' line endings, no header.

namespace detail {

inline bool parse_record_line(std::string_view line, GpsFix& out, std::string& err) {
    auto fields = split(line, ',');
    if (fields.size() != 4) {
        err = "expected 4 comma-separated fields, got " + std::to_string(fields.size());
        return false;
    }
    if (fields[0].empty()) {
        err = "empty vehicle id";
        return false;
    }
    auto ts = parse_datetime(fields[1]);
    if (!ts) {
        err = "unparsable datetime '" + std::string(fields[1]) + "'";
        return false;
    }
    auto lon = parse_double(fields[2]);
    auto lat = parse_double(fields[3]);
    if (!lon || !lat) {
        err = "unparsable coordinate";
        return false;
    }
    // inclusion form so NaN coordinates fail the check too
    if (!(*lon >= -180.0 && *lon <= 180.0) || !(*lat >= -90.0 && *lat <= 90.0)) {
        err = "coordinate out of range";
        return false;
    }
    out.vehicle_id = std::string(fields[0]);
    out.timestamp = *ts;
    out.lon = *lon;
    out.lat = *lat;
    return true;
}

} // namespace detail

/// Parses the record format, grouping fixes by vehicle in first-appearance
/// order. File order of fixes is preserved; cleaning is a separate step.
inline std::vector<Trajectory> parse_trajectory_file(std::istream& in,
                                                     const ParseOptions& opts = {},
                                                     ParseStats* stats = nullptr) {
    std::vector<Trajectory> trajs;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t line_no = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = line;
        if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
        GpsFix fix;
        std::string err;
        if (!detail::parse_record_line(sv, fix, err)) {
            if (opts.skip_malformed) {
                ++skipped;
                continue;
            }
            throw ParseError(line_no, err);
        }
        auto [it, inserted] = index.try_emplace(fix.vehicle_id, trajs.size());
        if (inserted) trajs.push_back(Trajectory{fix.vehicle_id, {}});
        trajs[it->second].fixes.push_back(std::move(fix));
    }
    if (stats) {
        stats->lines = line_no;
        stats->skipped = skipped;
    }
    return trajs;
}

/// Writes trajectories back to the record format. Coordinates use the
/// shortest decimal form that round-trips exactly.
inline void write_trajectories(std::ostream& out, std::span<const Trajectory> trajs) {
    for (const auto& t : trajs) {
        for (const auto& f : t.fixes) {
            out << f.vehicle_id << ',' << format_datetime(f.timestamp) << ','
                << fmt_double(f.lon) << ',' << fmt_double(f.lat) << '\n';
        }
    }
}

/// Sorts fixes by time, drops duplicate timestamps (first kept), drops fixes
/// outside the bbox, drops fixes implying speed above max_speed relative to
/// the previously kept fix, and removes trajectories emptied by all that.
/// Idempotent.
inline std::vector<Trajectory> clean_trajectories(std::vector<Trajectory> trajs,
                                                  const BBox& bbox, double max_speed_ms) {
    std::vector<Trajectory> out;
    out.reserve(trajs.size());
    for (auto& t : trajs) {
        std::stable_sort(t.fixes.begin(), t.fixes.end(),
                         [](const GpsFix& a, const GpsFix& b) { return a.timestamp < b.timestamp; });
        std::vector<GpsFix> kept;
        kept.reserve(t.fixes.size());
        for (auto& f : t.fixes) {
            if (!kept.empty() && f.timestamp == kept.back().timestamp) continue;
            if (!bbox.contains(f.lon, f.lat)) continue;
            if (!kept.empty()) {
                const GpsFix& prev = kept.back();
                const double dt = static_cast<double>(f.timestamp - prev.timestamp);
                const double dist = haversine_m(prev.lon, prev.lat, f.lon, f.lat);
                if (dist > max_speed_ms * dt) continue;
            }
            kept.push_back(std::move(f));
        }
        if (!kept.empty()) out.push_back(Trajectory{t.vehicle_id, std::move(kept)});
    }
    return out;
}

} // namespace evcast
