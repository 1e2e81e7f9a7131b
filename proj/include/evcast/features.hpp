#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/grid.hpp"
#include "evcast/ingest.hpp"
#include "evcast/text.hpp"
#include "evcast/time.hpp"

namespace evcast {

/// Linear battery model: SOC = 1 - rate * distance / capacity, reset to full
/// at the reset hour (midnight) of every day.
struct SocConfig {
    double capacity_kwh = 24.0;
    double consumption_rate_kwh_per_km = 0.15;
    int reset_hour = 0;

    void validate() const {
        if (capacity_kwh <= 0.0) throw ConfigError("soc: capacity must be > 0");
        if (consumption_rate_kwh_per_km <= 0.0) throw ConfigError("soc: consumption rate must be > 0");
        if (reset_hour < 0 || reset_hour > 23) throw ConfigError("soc: reset hour must be in 0..23");
    }
};

/// Whether the per-row energy variance is taken across the EVs present in the
/// region-hour (default) or across the hourly aggregates observed so far that
/// day.
enum class EvarMode { across_evs, across_time };

/// Per region, per day, per hour feature vector.
struct SpatialFeatureRow {
    int region = 0;
    std::int64_t day = 0; // day number
    int hour = 0;         // 1..24 for clock hours 00..23
    double f_n = 0.0;     // distinct EVs seen in the region this hour
    double v_ave = 0.0;   // m/s
    double v_var = 0.0;   // (m/s)^2
    double d1 = 0.0, d2 = 0.0, d3 = 0.0, d4 = 0.0; // segment counts by quadrant
    double d_var = 0.0;   // variance of (d1..d4)
    double e_sum = 0.0;   // kWh
    double e_var = 0.0;   // kWh^2

    bool operator==(const SpatialFeatureRow&) const = default;
};

/// One region-day of aggregated energy: absolute, day-normalized, and the
/// 10-level discretization of the normalized values.
struct EnergySeries {
    int region = 0;
    std::int64_t day = 0;
    std::array<double, 24> e_sum{};  // kWh per hour
    std::array<double, 24> e_norm{}; // sums to 1 unless the day is all zero
    std::array<int, 24> level{};     // 1..num_levels once discretized
};

/// Absolute kWh value recovered for each discrete level by averaging
/// training observations, with empty levels filled by linear interpolation.
struct LevelValueTable {
    int region = 0;
    std::vector<double> y; // y[i] for level i+1
};

inline double segment_distance(const GpsFix& a, const GpsFix& b) {
    return haversine_m(a.lon, a.lat, b.lon, b.lat);
}

inline double segment_velocity(const GpsFix& a, const GpsFix& b) {
    const double dt = static_cast<double>(b.timestamp - a.timestamp);
    if (dt <= 0.0) throw DataError("segment velocity needs a positive time delta");
    return segment_distance(a, b) / dt;
}

/// Moving-direction quadrant 1..4, or 0 for a stationary pair. Boundaries
/// follow a half-open convention: due east is 1, due north 2, due west 3,
/// due south 4.
inline int segment_direction(const GpsFix& a, const GpsFix& b) {
    const double dlon = b.lon - a.lon;
    const double dlat = b.lat - a.lat;
    if (dlon > 0.0 && dlat >= 0.0) return 1;
    if (dlon <= 0.0 && dlat > 0.0) return 2;
    if (dlon < 0.0 && dlat <= 0.0) return 3;
    if (dlon >= 0.0 && dlat < 0.0) return 4;
    return 0;
}

/// Remaining state of charge in [0, 1] after driving the given distance
/// since the day's reset.
inline double compute_soc(double daily_distance_km, const SocConfig& cfg) {
    const double soc = 1.0 - cfg.consumption_rate_kwh_per_km * daily_distance_km / cfg.capacity_kwh;
    return std::max(0.0, soc);
}

namespace detail {

inline double population_variance(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

struct FeatureAccum {
    double vel_sum = 0.0;
    std::vector<double> velocities;
    int d[4] = {0, 0, 0, 0};
    std::vector<double> energies_kwh;
    int fn = 0;
    int fn_stamp = -1; // index of the last vehicle counted into fn
};

} // namespace detail

/// Computes the full per-region per-hour feature table for every day touched
/// by the trajectories. Empty region-hours yield all-zero rows. Input is
/// expected to be cleaned; fixes outside the grid are ignored.
///
/// A vehicle's energy counts toward the region of its last in-grid fix of the
/// hour, so each active vehicle contributes to exactly one region per hour.
/// Velocity and direction features of a segment count toward the region of
/// its later endpoint.
inline std::vector<SpatialFeatureRow> extract_spatial_features(
    std::span<const Trajectory> trajs, const RegionGrid& grid, const SocConfig& soc,
    EvarMode evar_mode = EvarMode::across_evs) {
    soc.validate();
    std::int64_t day_lo = 0, day_hi = -1;
    bool any = false;
    const std::int64_t reset_offset = soc.reset_hour * 3600;
    auto day_index = [&](std::int64_t ts) { return day_of(ts - reset_offset); };
    for (const auto& t : trajs) {
        for (const auto& f : t.fixes) {
            const std::int64_t d = day_of(f.timestamp);
            if (!any || d < day_lo) day_lo = d;
            if (!any || d > day_hi) day_hi = d;
            any = true;
        }
    }
    if (!any) return {};

    const int K = grid.num_regions();
    const std::int64_t num_days = day_hi - day_lo + 1;
    const std::size_t buckets = static_cast<std::size_t>(K) * static_cast<std::size_t>(num_days) * 24;
    std::vector<detail::FeatureAccum> acc(buckets);
    auto at = [&](int region, std::int64_t day, int hour) -> detail::FeatureAccum& {
        const std::size_t idx =
            (static_cast<std::size_t>(region - 1) * static_cast<std::size_t>(num_days) +
             static_cast<std::size_t>(day - day_lo)) *
                24 +
            static_cast<std::size_t>(hour - 1);
        return acc[idx];
    };

    for (std::size_t vi = 0; vi < trajs.size(); ++vi) {
        const auto& fixes = trajs[vi].fixes;
        double cum_km = 0.0;
        std::int64_t cur_day = fixes.empty() ? 0 : day_index(fixes.front().timestamp);
        // (day, hour) -> (region, soc) of the vehicle's last in-grid fix
        std::map<std::pair<std::int64_t, int>, std::pair<int, double>> last_fix;

        for (std::size_t i = 0; i < fixes.size(); ++i) {
            const GpsFix& f = fixes[i];
            const std::int64_t fd = day_index(f.timestamp);
            if (fd != cur_day) {
                cur_day = fd;
                cum_km = 0.0; // battery recharged to full at the reset hour
            } else if (i > 0) {
                cum_km += segment_distance(fixes[i - 1], f) / 1000.0;
            }
            const auto region = grid.locate(f.lon, f.lat);
            if (!region) continue;
            const std::int64_t day = day_of(f.timestamp);
            const int hour = hour_index(f.timestamp);

            auto& bucket = at(*region, day, hour);
            if (bucket.fn_stamp != static_cast<int>(vi)) {
                bucket.fn_stamp = static_cast<int>(vi);
                bucket.fn += 1;
            }
            last_fix[{day, hour}] = {*region, compute_soc(cum_km, soc)};

            if (i > 0 && f.timestamp > fixes[i - 1].timestamp) {
                const double vel = segment_velocity(fixes[i - 1], f);
                bucket.velocities.push_back(vel);
                const int q = segment_direction(fixes[i - 1], f);
                if (q != 0) bucket.d[q - 1] += 1;
            }
        }
        for (const auto& [key, rs] : last_fix)
            at(rs.first, key.first, key.second).energies_kwh.push_back(rs.second * soc.capacity_kwh);
    }

    std::vector<SpatialFeatureRow> rows;
    rows.reserve(buckets);
    for (int k = 1; k <= K; ++k) {
        for (std::int64_t d = day_lo; d <= day_hi; ++d) {
            std::vector<double> hourly_sums;
            for (int h = 1; h <= 24; ++h) {
                const auto& b = at(k, d, h);
                SpatialFeatureRow row;
                row.region = k;
                row.day = d;
                row.hour = h;
                row.f_n = b.fn;
                if (!b.velocities.empty()) {
                    double s = 0.0;
                    for (double v : b.velocities) s += v;
                    row.v_ave = s / static_cast<double>(b.velocities.size());
                    row.v_var = detail::population_variance(b.velocities);
                }
                row.d1 = b.d[0];
                row.d2 = b.d[1];
                row.d3 = b.d[2];
                row.d4 = b.d[3];
                const double dv[4] = {row.d1, row.d2, row.d3, row.d4};
                row.d_var = detail::population_variance(dv);
                for (double e : b.energies_kwh) row.e_sum += e;
                hourly_sums.push_back(row.e_sum);
                row.e_var = evar_mode == EvarMode::across_evs
                                ? detail::population_variance(b.energies_kwh)
                                : detail::population_variance(hourly_sums);
                rows.push_back(row);
            }
        }
    }
    return rows;
}

/// Groups rows into per-region-day series and fills the day-normalized
/// values. Levels are filled by discretize().
inline std::vector<EnergySeries> build_energy_series(std::span<const SpatialFeatureRow> rows) {
    std::map<std::pair<int, std::int64_t>, EnergySeries> by_key;
    for (const auto& r : rows) {
        auto& s = by_key[{r.region, r.day}];
        s.region = r.region;
        s.day = r.day;
        s.e_sum[static_cast<std::size_t>(r.hour - 1)] = r.e_sum;
    }
    std::vector<EnergySeries> out;
    out.reserve(by_key.size());
    for (auto& [key, s] : by_key) {
        double total = 0.0;
        for (double e : s.e_sum) total += e;
        if (total > 0.0)
            for (int t = 0; t < 24; ++t) s.e_norm[static_cast<std::size_t>(t)] = s.e_sum[static_cast<std::size_t>(t)] / total;
        s.level.fill(1);
        out.push_back(s);
    }
    return out;
}

/// Discretization range, fitted on a region's training days only.
struct LevelRange {
    double lo = 0.0;
    double hi = 0.0;
};

inline LevelRange level_range(std::span<const EnergySeries> training) {
    LevelRange r;
    bool first = true;
    for (const auto& s : training) {
        for (double v : s.e_norm) {
            if (first || v < r.lo) r.lo = v;
            if (first || v > r.hi) r.hi = v;
            first = false;
        }
    }
    return r;
}

/// Uniform-bin level in 1..num_levels; values outside the range clamp to the
/// end bins, and a degenerate range maps everything to level 1.
inline int level_of(double v, const LevelRange& range, int num_levels = 10) {
    if (!(range.hi > range.lo)) return 1;
    const double rel = (v - range.lo) / (range.hi - range.lo);
    const int level = 1 + static_cast<int>(std::floor(rel * num_levels));
    return std::clamp(level, 1, num_levels);
}

inline void discretize(std::span<EnergySeries> series, const LevelRange& range,
                       int num_levels = 10) {
    for (auto& s : series)
        for (int t = 0; t < 24; ++t)
            s.level[static_cast<std::size_t>(t)] = level_of(s.e_norm[static_cast<std::size_t>(t)], range, num_levels);
}

/// Averages the absolute kWh observed in each level over a region's training
/// days; levels never observed are filled by linear interpolation between
/// the nearest populated levels (flat at the edges).
inline LevelValueTable build_level_values(std::span<const EnergySeries> training,
                                          int num_levels = 10) {
    if (training.empty()) throw DataError("level values: no training data");
    LevelValueTable table;
    table.region = training.front().region;
    std::vector<double> sum(static_cast<std::size_t>(num_levels), 0.0);
    std::vector<int> count(static_cast<std::size_t>(num_levels), 0);
    for (const auto& s : training) {
        for (int t = 0; t < 24; ++t) {
            const int lvl = s.level[static_cast<std::size_t>(t)];
            if (lvl < 1 || lvl > num_levels) throw DataError("level values: series not discretized");
            sum[static_cast<std::size_t>(lvl - 1)] += s.e_sum[static_cast<std::size_t>(t)];
            count[static_cast<std::size_t>(lvl - 1)] += 1;
        }
    }
    table.y.assign(static_cast<std::size_t>(num_levels), 0.0);
    std::vector<int> populated;
    for (int i = 0; i < num_levels; ++i) {
        if (count[static_cast<std::size_t>(i)] > 0) {
            table.y[static_cast<std::size_t>(i)] = sum[static_cast<std::size_t>(i)] / count[static_cast<std::size_t>(i)];
            populated.push_back(i);
        }
    }
    if (populated.empty()) throw DataError("level values: no populated level");
    for (int i = 0; i < num_levels; ++i) {
        if (count[static_cast<std::size_t>(i)] > 0) continue;
        auto next = std::lower_bound(populated.begin(), populated.end(), i);
        if (next == populated.begin()) {
            table.y[static_cast<std::size_t>(i)] = table.y[static_cast<std::size_t>(populated.front())];
        } else if (next == populated.end()) {
            table.y[static_cast<std::size_t>(i)] = table.y[static_cast<std::size_t>(populated.back())];
        } else {
            const int a = *(next - 1), b = *next;
            const double ya = table.y[static_cast<std::size_t>(a)], yb = table.y[static_cast<std::size_t>(b)];
            table.y[static_cast<std::size_t>(i)] = ya + (yb - ya) * static_cast<double>(i - a) / static_cast<double>(b - a);
        }
    }
    return table;
}

/// Level whose recovered kWh value is nearest to the given energy (smallest
/// level wins ties); used to clamp the temporal predictor's first position.
inline int nearest_level(const LevelValueTable& table, double energy_kwh) {
    int best = 1;
    double best_d = std::abs(table.y.front() - energy_kwh);
    for (std::size_t i = 1; i < table.y.size(); ++i) {
        const double d = std::abs(table.y[i] - energy_kwh);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i) + 1;
        }
    }
    return best;
}

/// Selection of feature groups fed to the spatial predictor. Widths per
/// region: F_N 1, F_V 2, F_D 5, F_E 2.
struct FeatureSubset {
    bool f_n = false;
    bool f_v = false;
    bool f_d = false;
    bool f_e = false;

    bool operator==(const FeatureSubset&) const = default;

    int width() const {
        return (f_n ? 1 : 0) + (f_v ? 2 : 0) + (f_d ? 5 : 0) + (f_e ? 2 : 0);
    }

    bool empty() const { return !f_n && !f_v && !f_d && !f_e; }

    /// Parses a comma-separated tag list such as "F_D,F_N,F_E".
    static FeatureSubset parse(std::string_view text) {
        FeatureSubset s;
        for (auto tok : split(text, ',')) {
            const std::string_view t = trim(tok);
            if (t == "F_N") s.f_n = true;
            else if (t == "F_V") s.f_v = true;
            else if (t == "F_D") s.f_d = true;
            else if (t == "F_E") s.f_e = true;
            else throw ConfigError("unknown feature tag: \"" + std::string(t) + "\"");
        }
        if (s.empty()) throw ConfigError("feature subset must not be empty");
        return s;
    }

    std::string str() const {
        std::string out;
        auto add = [&](const char* tag) {
            if (!out.empty()) out += ',';
            out += tag;
        };
        if (f_v) add("F_V");
        if (f_d) add("F_D");
        if (f_n) add("F_N");
        if (f_e) add("F_E");
        return out;
    }
};

/// The six feature combinations compared in the ablation experiment.
inline std::vector<FeatureSubset> default_ablation_subsets() {
    return {
        FeatureSubset::parse("F_V,F_N,F_E"),
        FeatureSubset::parse("F_V,F_D,F_N,F_E"),
        FeatureSubset::parse("F_N,F_E"),
        FeatureSubset::parse("F_N"),
        FeatureSubset::parse("F_E"),
        FeatureSubset::parse("F_D,F_N,F_E"),
    };
}

/// Dense (region, day, hour) index over feature rows. Requires complete
/// coverage: one row per region and hour for every day in the span.
class FeatureTable {
public:
    FeatureTable(std::vector<SpatialFeatureRow> rows, const RegionGrid& grid)
        : rows_(std::move(rows)), regions_(grid.num_regions()) {
        if (rows_.empty()) throw DataError("feature table: no rows");
        day_lo_ = day_hi_ = rows_.front().day;
        for (const auto& r : rows_) {
            day_lo_ = std::min(day_lo_, r.day);
            day_hi_ = std::max(day_hi_, r.day);
        }
        index_.assign(static_cast<std::size_t>(regions_) *
                          static_cast<std::size_t>(num_days()) * 24,
                      -1);
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const auto& r = rows_[i];
            if (r.region < 1 || r.region > regions_)
                throw DataError("feature table: region " + std::to_string(r.region) +
                                " outside the grid");
            const std::size_t slot = slot_of(r.region, r.day, r.hour);
            if (index_[slot] >= 0)
                throw DataError("feature table: duplicate row for region " +
                                std::to_string(r.region) + " on " + format_date(r.day) +
                                " hour " + std::to_string(r.hour));
            index_[slot] = static_cast<std::ptrdiff_t>(i);
        }
        for (int k = 1; k <= regions_; ++k)
            for (std::int64_t d = day_lo_; d <= day_hi_; ++d)
                for (int h = 1; h <= 24; ++h)
                    if (index_[slot_of(k, d, h)] < 0)
                        throw DataError("feature table: missing row for region " +
                                        std::to_string(k) + " on " + format_date(d) +
                                        " hour " + std::to_string(h));
    }

    const SpatialFeatureRow& at(int region, std::int64_t day, int hour) const {
        if (region < 1 || region > regions_ || day < day_lo_ || day > day_hi_ || hour < 1 ||
            hour > 24)
            throw DataError("feature table: lookup outside the covered span");
        return rows_[static_cast<std::size_t>(index_[slot_of(region, day, hour)])];
    }

    std::span<const SpatialFeatureRow> rows() const { return rows_; }
    int num_regions() const { return regions_; }
    std::int64_t day_lo() const { return day_lo_; }
    std::int64_t day_hi() const { return day_hi_; }
    std::int64_t num_days() const { return day_hi_ - day_lo_ + 1; }

private:
    std::size_t slot_of(int region, std::int64_t day, int hour) const {
        return (static_cast<std::size_t>(region - 1) * static_cast<std::size_t>(num_days()) +
                static_cast<std::size_t>(day - day_lo_)) *
                   24 +
               static_cast<std::size_t>(hour - 1);
    }

    std::vector<SpatialFeatureRow> rows_;
    int regions_ = 0;
    std::int64_t day_lo_ = 0;
    std::int64_t day_hi_ = 0;
    std::vector<std::ptrdiff_t> index_;
};

// ---------------------------------------------------------------------------
// Columnar feature file, so experiments can resume without re-ingesting
// trajectories.

inline constexpr const char* kFeatureFileHeader =
    "# evcast features v1\n"
    "# region date hour f_n v_ave v_var d1 d2 d3 d4 d_var e_sum e_var\n";

inline void write_feature_rows(std::ostream& out, std::span<const SpatialFeatureRow> rows) {
    out << kFeatureFileHeader;
    for (const auto& r : rows) {
        out << r.region << ' ' << format_date(r.day) << ' ' << r.hour << ' ' << fmt_double(r.f_n)
            << ' ' << fmt_double(r.v_ave) << ' ' << fmt_double(r.v_var) << ' ' << fmt_double(r.d1)
            << ' ' << fmt_double(r.d2) << ' ' << fmt_double(r.d3) << ' ' << fmt_double(r.d4)
            << ' ' << fmt_double(r.d_var) << ' ' << fmt_double(r.e_sum) << ' '
            << fmt_double(r.e_var) << '\n';
    }
}

inline std::vector<SpatialFeatureRow> read_feature_rows(std::istream& in) {
    std::vector<SpatialFeatureRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        auto f = split(sv, ' ');
        if (f.size() != 13) throw ParseError(line_no, "expected 13 columns");
        SpatialFeatureRow r;
        auto region = parse_int(f[0]);
        auto day = parse_date(f[1]);
        auto hour = parse_int(f[2]);
        if (!region || !day || !hour || *hour < 1 || *hour > 24)
            throw ParseError(line_no, "bad region/date/hour");
        r.region = static_cast<int>(*region);
        r.day = *day;
        r.hour = static_cast<int>(*hour);
        double* cols[10] = {&r.f_n, &r.v_ave, &r.v_var, &r.d1, &r.d2,
                            &r.d3,  &r.d4,   &r.d_var, &r.e_sum, &r.e_var};
        for (int i = 0; i < 10; ++i) {
            auto v = parse_double(f[static_cast<std::size_t>(i + 3)]);
            if (!v) throw ParseError(line_no, "bad numeric column");
            *cols[i] = *v;
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace evcast
