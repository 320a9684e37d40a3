#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fieldmap/geometry.hpp"
#include "fieldmap/matrix_io.hpp"

namespace fieldmap {

// Georeferenced h x w scalar grid per timestep. Row 0 is the southern
// edge; pixel centers sit at cell midpoints. Cells outside the domain
// boundary hold the nodata sentinel (quiet NaN).
struct RasterField {
    int width = 0;
    int height = 0;
    int steps = 0;
    Bounds bounds;
    std::vector<float> data;  // [t][row][col]

    static constexpr float nodata = std::numeric_limits<float>::quiet_NaN();

    float& at(int t, int row, int col) {
        return data[(static_cast<size_t>(t) * height + row) * width + col];
    }
    float at(int t, int row, int col) const {
        return data[(static_cast<size_t>(t) * height + row) * width + col];
    }

    Vec2 pixel_center(int row, int col) const {
        return {bounds.min_x + (col + 0.5) / width * bounds.width(),
                bounds.min_y + (row + 0.5) / height * bounds.height()};
    }

    // Bilinear sample at a geographic point for one timestep; returns
    // NaN when any contributing pixel is nodata or the point is outside.
    float sample(int t, const Vec2& p) const {
        double gx = (p.x - bounds.min_x) / bounds.width() * width - 0.5;
        double gy = (p.y - bounds.min_y) / bounds.height() * height - 0.5;
        int c0 = static_cast<int>(std::floor(gx));
        int r0 = static_cast<int>(std::floor(gy));
        double fx = gx - c0;
        double fy = gy - r0;
        c0 = std::clamp(c0, 0, width - 2);
        r0 = std::clamp(r0, 0, height - 2);
        fx = std::clamp(fx, 0.0, 1.0);
        fy = std::clamp(fy, 0.0, 1.0);
        double v00 = at(t, r0, c0), v01 = at(t, r0, c0 + 1);
        double v10 = at(t, r0 + 1, c0), v11 = at(t, r0 + 1, c0 + 1);
        return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                  fy * ((1 - fx) * v10 + fx * v11));
    }
};

inline void save_raster(const std::filesystem::path& dir, const RasterField& r,
                        const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
    nlohmann::ordered_json meta;
    meta["bounds"] = {{"min_lng", r.bounds.min_x},
                      {"min_lat", r.bounds.min_y},
                      {"max_lng", r.bounds.max_x},
                      {"max_lat", r.bounds.max_y}};
    meta["nodata"] = "nan";
    for (auto& [key, value] : extra.items()) meta[key] = value;
    save_matrix(dir, {static_cast<size_t>(r.steps), static_cast<size_t>(r.height),
                      static_cast<size_t>(r.width)},
                r.data, meta);
}

inline RasterField load_raster(const std::filesystem::path& dir) {
    LoadedMatrix m = load_matrix(dir);
    if (m.shape.size() != 3) throw config_error("raster must have shape [t,h,w]: " + dir.string());
    RasterField r;
    r.steps = static_cast<int>(m.shape[0]);
    r.height = static_cast<int>(m.shape[1]);
    r.width = static_cast<int>(m.shape[2]);
    const auto& b = m.header.at("bounds");
    r.bounds = {b.at("min_lng").get<double>(), b.at("min_lat").get<double>(),
                b.at("max_lng").get<double>(), b.at("max_lat").get<double>()};
    r.data = std::move(m.data);
    return r;
}

}  // namespace fieldmap
