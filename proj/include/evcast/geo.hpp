#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace evcast {

/// Geographic bounding box in WGS-84 degrees.
struct BBox {
    double lon_min = 0.0;
    double lat_min = 0.0;
    double lon_max = 0.0;
    double lat_max = 0.0;

    bool valid() const {
        return lon_min < lon_max && lat_min < lat_max && lon_min >= -180.0 &&
               lon_max <= 180.0 && lat_min >= -90.0 && lat_max <= 90.0;
    }

    bool contains(double lon, double lat) const {
        return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
    }

    double lon_span() const { return lon_max - lon_min; }
    double lat_span() const { return lat_max - lat_min; }
};

inline constexpr double kEarthRadiusM = 6371000.0;

/// Great-circle (haversine) distance in meters.
inline double haversine_m(double lon1, double lat1, double lon2, double lat2) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * deg;
    const double dlon = (lon2 - lon1) * deg;
    const double sa = std::sin(dlat / 2.0);
    const double sb = std::sin(dlon / 2.0);
    const double h = sa * sa + std::cos(lat1 * deg) * std::cos(lat2 * deg) * sb * sb;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

} // namespace evcast
