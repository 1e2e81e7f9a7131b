#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "evcast/errors.hpp"
#include "evcast/geo.hpp"

namespace evcast {

/// Partition of a bounding box into rows x cols equal lon/lat cells.
///
/// Region ids are 1..rows*cols in row-major order with region 1 at the
/// (lon_min, lat_min) corner: ids grow eastward along a row, then northward
/// row by row. Cells are half-open ([lo, hi) on both axes) except the last
/// row/column, which is closed, so every bbox point maps to exactly one
/// region and a point on an interior boundary belongs to the higher-indexed
/// cell.
class RegionGrid {
public:
    RegionGrid(const BBox& bbox, int rows, int cols)
        : bbox_(bbox), rows_(rows), cols_(cols) {
        if (!bbox.valid()) throw ConfigError("grid: degenerate bbox");
        if (rows < 1 || cols < 1) throw ConfigError("grid: rows and cols must be >= 1");
    }

    const BBox& bbox() const { return bbox_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int num_regions() const { return rows_ * cols_; }

    /// Region containing the point, or nullopt outside the bbox.
    std::optional<int> locate(double lon, double lat) const {
        if (!bbox_.contains(lon, lat)) return std::nullopt;
        const int c = cell_index(lon, bbox_.lon_min, bbox_.lon_span(), cols_);
        const int r = cell_index(lat, bbox_.lat_min, bbox_.lat_span(), rows_);
        return r * cols_ + c + 1;
    }

    /// The 8-member padded neighbor set: the 3x3 block around the region's
    /// position, clamped to the grid interior, minus the region itself.
    /// Sorted ascending. Requires at least a 3x3 grid.
    std::array<int, 8> neighbor_set(int k) const {
        if (rows_ < 3 || cols_ < 3)
            throw ConfigError("grid: neighbor sets are undefined below 3x3");
        if (k < 1 || k > num_regions())
            throw ConfigError("grid: region id " + std::to_string(k) + " out of range");
        const int r = (k - 1) / cols_ + 1; // 1-based
        const int c = (k - 1) % cols_ + 1;
        const int rc = std::clamp(r, 2, rows_ - 1);
        const int cc = std::clamp(c, 2, cols_ - 1);
        std::array<int, 8> out{};
        std::size_t n = 0;
        for (int rr = rc - 1; rr <= rc + 1; ++rr) {
            for (int col = cc - 1; col <= cc + 1; ++col) {
                const int id = (rr - 1) * cols_ + col;
                if (id != k) out[n++] = id;
            }
        }
        return out; // row-major scan of an ascending block is already sorted
    }

private:
    static int cell_index(double v, double lo, double span, int n) {
        // Nominal index from the division, then snap to the exact cell edges
        // so a point on an interior boundary always lands in the
        // higher-indexed cell, independent of rounding in the division.
        int i = static_cast<int>(std::floor((v - lo) / span * n));
        i = std::clamp(i, 0, n - 1);
        const auto edge = [&](int k) { return lo + span * k / n; };
        while (i + 1 < n && v >= edge(i + 1)) ++i;
        while (i > 0 && v < edge(i)) --i;
        return i;
    }

    BBox bbox_;
    int rows_;
    int cols_;
};

} // namespace evcast
