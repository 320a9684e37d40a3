#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fieldmap/dataset.hpp"
#include "fieldmap/geometry.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

// Square-cell scalar grid over (a padding of) the boundary bounding box.
// Row 0 is the southern edge, matching RasterField.
struct DensityField {
    int width = 0;
    int height = 0;
    Bounds bounds;               // exact grid coverage: origin + cell_size * dims
    double cell_size = 0.0;      // degrees, square cells
    double bandwidth_x = 0.0;    // Silverman bandwidth per axis, degrees
    double bandwidth_y = 0.0;
    std::vector<double> values;  // row-major h x w
    std::vector<uint8_t> inside; // 1 when the cell center lies inside the boundary

    double at(int row, int col) const { return values[size_t(row) * width + col]; }
    double& at(int row, int col) { return values[size_t(row) * width + col]; }
    bool interior(int row, int col) const { return inside[size_t(row) * width + col] != 0; }
    Vec2 cell_center(int row, int col) const {
        return {bounds.min_x + (col + 0.5) * cell_size, bounds.min_y + (row + 0.5) * cell_size};
    }
    double cell_area() const { return cell_size * cell_size; }
    // Grid-quadrature integral over the covered rectangle.
    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * cell_area();
    }
};

struct KdeOptions {
    int resolution = 256;        // cells along the longer bbox axis
    double pad_bandwidths = 0.0; // extend the bbox by this many bandwidths per side
    bool apply_boundary = true;  // zero cells whose centers fall outside the boundary
};

inline DensityField kde_points(const std::vector<Vec2>& points, const Polygon& boundary,
                               const KdeOptions& opt = {}) {
    if (points.size() < 2) throw pipeline_error("kde: need at least 2 sensors");
    if (opt.resolution < 2) throw config_error("kde: resolution must be >= 2");

    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sx = 0.0, sy = 0.0;
    for (const auto& p : points) {
        sx += (p.x - mx) * (p.x - mx);
        sy += (p.y - my) * (p.y - my);
    }
    sx = std::sqrt(sx / (n - 1.0));
    sy = std::sqrt(sy / (n - 1.0));
    if (sx <= 0.0 || sy <= 0.0)
        throw pipeline_error("kde: degenerate bandwidth (zero spread on an axis)");

    DensityField f;
    f.bandwidth_x = sx * std::pow(n, -1.0 / 6.0);
    f.bandwidth_y = sy * std::pow(n, -1.0 / 6.0);

    Bounds bb = boundary.bounds();
    bb.min_x -= opt.pad_bandwidths * f.bandwidth_x;
    bb.max_x += opt.pad_bandwidths * f.bandwidth_x;
    bb.min_y -= opt.pad_bandwidths * f.bandwidth_y;
    bb.max_y += opt.pad_bandwidths * f.bandwidth_y;
    f.cell_size = std::max(bb.width(), bb.height()) / opt.resolution;
    f.width = std::max(1, static_cast<int>(std::ceil(bb.width() / f.cell_size - 1e-9)));
    f.height = std::max(1, static_cast<int>(std::ceil(bb.height() / f.cell_size - 1e-9)));
    f.bounds = {bb.min_x, bb.min_y, bb.min_x + f.width * f.cell_size,
                bb.min_y + f.height * f.cell_size};
    f.values.assign(size_t(f.width) * f.height, 0.0);
    f.inside.assign(size_t(f.width) * f.height, 0);

    const double norm = 1.0 / (n * 2.0 * M_PI * f.bandwidth_x * f.bandwidth_y);
    for (int r = 0; r < f.height; ++r) {
        for (int c = 0; c < f.width; ++c) {
            Vec2 s = f.cell_center(r, c);
            bool in = boundary.contains(s);
            f.inside[size_t(r) * f.width + c] = in ? 1 : 0;
            if (opt.apply_boundary && !in) continue;
            double acc = 0.0;
            for (const auto& p : points) {
                double dx = (s.x - p.x) / f.bandwidth_x;
                double dy = (s.y - p.y) / f.bandwidth_y;
                acc += std::exp(-0.5 * (dx * dx + dy * dy));
            }
            f.at(r, c) = norm * acc;
        }
    }
    return f;
}

inline DensityField kde(const SensorNetwork& network, int resolution = 256, KdeOptions opt = {}) {
    opt.resolution = resolution;
    return kde_points(network.positions(), network.boundary, opt);
}

// Sampling probability: max(e^{-lambda*D} - theta, 0), min-max normalized over
// interior cells, outside-boundary cells forced to 0.
inline DensityField invert_density(const DensityField& d, double lambda = 5.0,
                                   double theta = 0.05) {
    if (lambda <= 0.0) throw config_error("invert_density: lambda must be > 0");
    if (theta < 0.0 || theta >= 1.0) throw config_error("invert_density: theta must be in [0,1)");
    DensityField out = d;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (size_t i = 0; i < out.values.size(); ++i) {
        if (!out.inside[i]) {
            out.values[i] = 0.0;
            continue;
        }
        double v = std::max(std::exp(-lambda * d.values[i]) - theta, 0.0);
        out.values[i] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) throw pipeline_error("invert_density: no interior cells");
    for (size_t i = 0; i < out.values.size(); ++i) {
        if (!out.inside[i]) continue;
        if (hi > lo)
            out.values[i] = (out.values[i] - lo) / (hi - lo);
        else if (hi > 0.0)
            out.values[i] = 1.0;  // flat nonzero field: keep every cell eligible
    }
    return out;
}

// Draws `count` cells proportional to their values without cell replacement,
// then jitters each point uniformly inside its cell. Jitter draws falling
// outside the boundary are retried; the cell center is the fallback.
inline std::vector<Vec2> sample_virtual(const DensityField& dbar, const Polygon& boundary,
                                        size_t count, uint64_t seed) {
    std::vector<Vec2> out;
    if (count == 0) return out;
    std::vector<size_t> cells;
    for (size_t i = 0; i < dbar.values.size(); ++i)
        if (dbar.values[i] > 0.0) cells.push_back(i);
    if (cells.size() < count)
        throw pipeline_error(strprintf(
            "sample_virtual: only %zu cells with nonzero probability, need %zu", cells.size(),
            count));

    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<double> weight(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) weight[i] = dbar.values[cells[i]];

    for (size_t k = 0; k < count; ++k) {
        double total = 0.0;
        for (double w : weight) total += w;
        double target = u01(rng) * total;
        size_t pick = 0;
        double acc = 0.0;
        for (size_t i = 0; i < weight.size(); ++i) {
            if (weight[i] <= 0.0) continue;
            acc += weight[i];
            pick = i;
            if (target < acc) break;
        }
        size_t cell = cells[pick];
        weight[pick] = 0.0;

        int row = static_cast<int>(cell / dbar.width);
        int col = static_cast<int>(cell % dbar.width);
        double x0 = dbar.bounds.min_x + col * dbar.cell_size;
        double y0 = dbar.bounds.min_y + row * dbar.cell_size;
        Vec2 p = dbar.cell_center(row, col);
        for (int attempt = 0; attempt < 32; ++attempt) {
            Vec2 q{x0 + u01(rng) * dbar.cell_size, y0 + u01(rng) * dbar.cell_size};
            if (boundary.contains(q)) {
                p = q;
                break;
            }
        }
        out.push_back(p);
    }
    return out;
}

namespace detail {

// Voronoi cell of site `i`: bounding-box rectangle cut by the bisector
// half-plane against every other site.
inline Polygon voronoi_cell(const std::vector<Vec2>& sites, size_t i, const Bounds& box) {
    Polygon cell;
    cell.ring = {{box.min_x, box.min_y},
                 {box.max_x, box.min_y},
                 {box.max_x, box.max_y},
                 {box.min_x, box.max_y}};
    for (size_t j = 0; j < sites.size(); ++j) {
        if (j == i) continue;
        Vec2 dir = sites[j] - sites[i];
        if (dir.norm() == 0.0) continue;  // coincident sites: skip the cut
        Vec2 mid{(sites[i].x + sites[j].x) * 0.5, (sites[i].y + sites[j].y) * 0.5};
        cell.ring = clip_half_plane(cell.ring, mid, dir);
        if (cell.ring.size() < 3) break;
    }
    return cell;
}

// A cell counts as interior when every vertex and edge midpoint lies inside
// or on the boundary and no cell edge properly crosses a boundary edge.
inline bool cell_inside_boundary(const Polygon& cell, const Polygon& boundary) {
    const size_t m = cell.ring.size();
    for (size_t a = 0; a < m; ++a) {
        const Vec2& p = cell.ring[a];
        const Vec2& q = cell.ring[(a + 1) % m];
        if (!boundary.contains(p, 1e-9)) return false;
        if (!boundary.contains({(p.x + q.x) * 0.5, (p.y + q.y) * 0.5}, 1e-9)) return false;
        const size_t nb = boundary.ring.size();
        for (size_t b = 0; b < nb; ++b) {
            if (segments_properly_intersect(p, q, boundary.ring[b],
                                            boundary.ring[(b + 1) % nb]))
                return false;
        }
    }
    return true;
}

}  // namespace detail

// Lloyd relaxation restricted to the virtual points: each iteration rebuilds
// the Voronoi diagram of fixed ∪ movable and moves every movable point whose
// cell lies fully inside the boundary to that cell's centroid.
inline std::vector<Vec2> cvt_relax(const std::vector<Vec2>& fixed, std::vector<Vec2> movable,
                                   const Polygon& boundary, int iterations) {
    if (iterations < 0) throw config_error("cvt_relax: iterations must be >= 0");
    if (movable.empty()) return movable;
    Bounds box = boundary.bounds();
    for (int it = 0; it < iterations; ++it) {
        std::vector<Vec2> sites = fixed;
        sites.insert(sites.end(), movable.begin(), movable.end());
        std::vector<Vec2> next = movable;
        for (size_t v = 0; v < movable.size(); ++v) {
            Polygon cell = detail::voronoi_cell(sites, fixed.size() + v, box);
            if (cell.ring.size() < 3) continue;
            if (!detail::cell_inside_boundary(cell, boundary)) continue;
            next[v] = cell.centroid();
        }
        movable = next;
    }
    return movable;
}

struct DensifyConfig {
    double delta = 0.4;   // virtual sensors as a fraction of existing ones
    double lambda = 5.0;
    double theta = 0.05;
    int iterations = 3;
    int resolution = 256;
    uint64_t seed = 0;
};

struct DensifyResult {
    SensorNetwork network;
    ObservationSeries observations;
    DensityField density;          // KDE of the input sensors
    DensityField sampling;         // inverted, normalized field actually sampled
};

// Appends ⌊delta*n⌋ virtual sensors (zero-valued, fully masked observation
// rows) placed by inverted-density sampling plus CVT relaxation.
inline DensifyResult densify(const SensorNetwork& network, const ObservationSeries& observations,
                             const DensifyConfig& cfg = {}) {
    if (cfg.delta < 0.0) throw config_error("densify: delta must be >= 0");
    if (observations.n != network.sensors.size())
        throw pipeline_error("densify: observations do not match network");

    DensifyResult res;
    res.network = network;
    res.observations = observations;
    size_t count = static_cast<size_t>(cfg.delta * static_cast<double>(network.sensors.size()));
    KdeOptions opt;
    opt.resolution = cfg.resolution;
    res.density = kde_points(network.positions(), network.boundary, opt);
    res.sampling = invert_density(res.density, cfg.lambda, cfg.theta);
    if (count == 0) return res;

    std::vector<Vec2> seeds = sample_virtual(res.sampling, network.boundary, count, cfg.seed);
    std::vector<Vec2> placed = cvt_relax(network.positions(), seeds, network.boundary,
                                         cfg.iterations);

    int width_digits = static_cast<int>(std::to_string(count).size());
    ObservationSeries grown = ObservationSeries::zeros(observations.n + count, observations.t);
    grown.time_step = observations.time_step;
    grown.t0_epoch = observations.t0_epoch;
    std::copy(observations.values.begin(), observations.values.end(), grown.values.begin());
    std::copy(observations.mask.begin(), observations.mask.end(), grown.mask.begin());
    for (size_t v = 0; v < placed.size(); ++v) {
        Sensor s;
        s.id = strprintf("v%0*zu", width_digits, v + 1);
        s.lng = placed[v].x;
        s.lat = placed[v].y;
        s.kind = SensorKind::Virtual;
        res.network.sensors.push_back(s);
    }
    res.network.validate();
    res.observations = std::move(grown);
    return res;
}

}  // namespace fieldmap
