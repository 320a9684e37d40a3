#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "fieldmap/dataset.hpp"
#include "fieldmap/densify.hpp"
#include "fieldmap/training.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

// Cross-imputation references: shuffle the observed sensors, mask one half
// and impute it from the other, then swap. Every sensor's reference series
// comes from the pass in which it was hidden.
inline Tensor reference_values(const Model& model, const ForwardContext& fc,
                               const ObservationSeries& obs, uint64_t seed) {
    std::vector<size_t> eligible;
    for (size_t i = 0; i < obs.n; ++i) {
        bool any = false;
        for (size_t t = 0; t < obs.t && !any; ++t) any = obs.observed(i, t);
        if (any) eligible.push_back(i);
    }
    if (eligible.size() < 2) throw pipeline_error("reference_values: need at least 2 sensors");
    Rng rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    size_t half = eligible.size() / 2;
    std::vector<uint8_t> in_a(obs.n, 0);
    for (size_t i = 0; i < half; ++i) in_a[eligible[i]] = 1;

    std::vector<uint8_t> vis_b(obs.n, 0), vis_a(obs.n, 0);
    for (size_t i : eligible) (in_a[i] ? vis_a : vis_b)[i] = 1;
    Tensor pass_a = impute_full(model, fc, obs, vis_b);  // half A hidden
    Tensor pass_b = impute_full(model, fc, obs, vis_a);  // half B hidden

    Tensor ref({obs.n, obs.t});
    for (size_t i = 0; i < obs.n; ++i) {
        const Tensor& src = in_a[i] ? pass_a : pass_b;
        for (size_t t = 0; t < obs.t; ++t) ref.data[i * obs.t + t] = src.data[i * obs.t + t];
    }
    return ref;
}

struct GlyphCell {
    double h_p = std::nan("");     // normalized mean deviation, [-1,1]
    double h_low = std::nan("");   // normalized lower-quartile deviation
    double h_high = std::nan("");  // normalized upper-quartile deviation
    double w = 1.0;                // interpolation-distance width, [0,1]
    int count = 0;                 // sensors contributing deviations
};

struct GlyphGrid {
    int rows = 0;
    int cols = 0;
    Bounds bounds;
    std::vector<GlyphCell> cells;  // row-major, row 0 = southern edge

    const GlyphCell& at(int r, int c) const { return cells[size_t(r) * cols + c]; }
    GlyphCell& at(int r, int c) { return cells[size_t(r) * cols + c]; }
    Vec2 cell_center(int r, int c) const {
        return {bounds.min_x + (c + 0.5) * bounds.width() / cols,
                bounds.min_y + (r + 0.5) * bounds.height() / rows};
    }
};

namespace detail {

// Linear-interpolation quantile between order statistics.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::nan("");
    if (sorted.size() == 1) return sorted[0];
    double pos = q * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace detail

// Per-cell deviation statistics plus the distance-based width. Deviations are
// observation minus reference at the rendered timestep, averaged over an
// optional trailing window. All three height statistics share one global
// normalizer (the largest absolute raw value across cells and statistics).
inline GlyphGrid glyph_metrics(const ObservationSeries& obs, const Tensor& ref,
                               const SensorNetwork& network, int grid_size, int n_neighbors,
                               size_t timestep, size_t window = 1) {
    if (grid_size < 1) throw config_error("glyph_metrics: grid_size must be >= 1");
    if (n_neighbors < 1) throw config_error("glyph_metrics: n_neighbors must be >= 1");
    if (timestep >= obs.t) throw config_error("glyph_metrics: timestep out of range");
    if (ref.rows() != obs.n || ref.cols() != obs.t)
        throw pipeline_error("glyph_metrics: reference shape mismatch");
    if (window < 1) window = 1;

    GlyphGrid grid;
    grid.bounds = network.boundary.bounds();
    grid.rows = grid_size;
    grid.cols = grid_size;
    grid.cells.assign(size_t(grid_size) * grid_size, GlyphCell{});

    auto cell_of = [&](const Vec2& p) {
        int c = std::clamp(static_cast<int>((p.x - grid.bounds.min_x) / grid.bounds.width() *
                                            grid.cols),
                           0, grid.cols - 1);
        int r = std::clamp(static_cast<int>((p.y - grid.bounds.min_y) / grid.bounds.height() *
                                            grid.rows),
                           0, grid.rows - 1);
        return std::pair<int, int>(r, c);
    };

    size_t t_from = timestep + 1 >= window ? timestep + 1 - window : 0;
    std::vector<std::vector<double>> devs(grid.cells.size());
    for (size_t i = 0; i < obs.n; ++i) {
        double acc = 0.0;
        size_t cnt = 0;
        for (size_t t = t_from; t <= timestep; ++t) {
            if (!obs.observed(i, t)) continue;
            acc += obs.value(i, t) - ref.data[i * obs.t + t];
            ++cnt;
        }
        if (cnt == 0) continue;
        auto [r, c] = cell_of(network.sensors[i].position());
        devs[size_t(r) * grid.cols + c].push_back(acc / static_cast<double>(cnt));
    }

    double global_max = 0.0;
    for (size_t ci = 0; ci < grid.cells.size(); ++ci) {
        auto& d = devs[ci];
        GlyphCell& cell = grid.cells[ci];
        cell.count = static_cast<int>(d.size());
        if (d.empty()) continue;
        std::sort(d.begin(), d.end());
        double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
        cell.h_p = mean;
        cell.h_low = detail::quantile_sorted(d, 0.25);
        cell.h_high = detail::quantile_sorted(d, 0.75);
        global_max = std::max({global_max, std::fabs(cell.h_p), std::fabs(cell.h_low),
                               std::fabs(cell.h_high)});
    }
    for (GlyphCell& cell : grid.cells) {
        if (cell.count == 0) continue;
        if (global_max > 0.0) {
            cell.h_p /= global_max;
            cell.h_low /= global_max;
            cell.h_high /= global_max;
        } else {
            cell.h_p = cell.h_low = cell.h_high = 0.0;
        }
    }

    // Width: mean planar distance from each cell center to its N nearest
    // sensors, inverted and normalized over cells.
    std::vector<Vec2> pts = network.positions();
    size_t take = std::min<size_t>(static_cast<size_t>(n_neighbors), pts.size());
    if (take == 0) throw pipeline_error("glyph_metrics: network has no sensors");
    std::vector<double> mean_dist(grid.cells.size(), 0.0);
    double max_mean = 0.0;
    std::vector<double> dists(pts.size());
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            Vec2 center = grid.cell_center(r, c);
            for (size_t i = 0; i < pts.size(); ++i) dists[i] = distance(center, pts[i]);
            std::nth_element(dists.begin(), dists.begin() + (take - 1), dists.end());
            double acc = 0.0;
            for (size_t i = 0; i < take; ++i) acc += dists[i];
            mean_dist[size_t(r) * grid.cols + c] = acc / static_cast<double>(take);
            max_mean = std::max(max_mean, mean_dist[size_t(r) * grid.cols + c]);
        }
    for (size_t ci = 0; ci < grid.cells.size(); ++ci)
        grid.cells[ci].w = max_mean > 0.0 ? 1.0 - mean_dist[ci] / max_mean : 1.0;
    return grid;
}

// ---------------------------------------------------------------------------
// Hatch opacity (sensor-placement sparsity)
// ---------------------------------------------------------------------------

struct HatchField {
    DensityField field;  // values hold opacities in [0,1]
    double threshold = 0.0;
};

inline double mean_interior_density(const DensityField& d) {
    double acc = 0.0;
    size_t cnt = 0;
    for (size_t i = 0; i < d.values.size(); ++i) {
        if (!d.inside[i]) continue;
        acc += d.values[i];
        ++cnt;
    }
    if (cnt == 0) throw pipeline_error("mean_interior_density: no interior cells");
    return acc / static_cast<double>(cnt);
}

// Linear ramp from full opacity at zero density down to zero at the
// threshold. The density comes from the original (physical) sensors only.
inline HatchField hatch_opacity(const SensorNetwork& network, double threshold = 0.0,
                                int resolution = 256) {
    std::vector<Vec2> originals;
    for (const auto& s : network.sensors)
        if (s.kind == SensorKind::Original) originals.push_back(s.position());
    KdeOptions opt;
    opt.resolution = resolution;
    HatchField h;
    h.field = kde_points(originals, network.boundary, opt);
    h.threshold = threshold > 0.0 ? threshold : mean_interior_density(h.field);
    if (h.threshold <= 0.0) throw config_error("hatch_opacity: threshold must be > 0");
    for (size_t i = 0; i < h.field.values.size(); ++i) {
        if (!h.field.inside[i]) {
            h.field.values[i] = 0.0;
            continue;
        }
        h.field.values[i] = std::clamp((h.threshold - h.field.values[i]) / h.threshold, 0.0, 1.0);
    }
    return h;
}

// ---------------------------------------------------------------------------
// GlyphGrid persistence
// ---------------------------------------------------------------------------

inline void save_glyph_grid(const GlyphGrid& g, const std::filesystem::path& path) {
    std::string out = "row,col,h_p,h_low,h_high,w,count\n";
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) {
            const GlyphCell& cell = g.at(r, c);
            out += strprintf("%d,%d,", r, c);
            if (cell.count > 0)
                out += strprintf("%s,%s,%s,", double_repr(cell.h_p).c_str(),
                                 double_repr(cell.h_low).c_str(),
                                 double_repr(cell.h_high).c_str());
            else
                out += ",,,";
            out += strprintf("%s,%d\n", double_repr(cell.w).c_str(), cell.count);
        }
    write_text_file(path, out);
}

inline GlyphGrid load_glyph_grid(const std::filesystem::path& path, const Bounds& bounds) {
    std::vector<std::string> lines = split_lines(read_text_file(path));
    if (lines.empty() || trim(lines[0]) != "row,col,h_p,h_low,h_high,w,count")
        throw config_error("glyph CSV must start with header row,col,h_p,h_low,h_high,w,count");
    int max_r = -1, max_c = -1;
    struct Row {
        int r, c;
        GlyphCell cell;
    };
    std::vector<Row> rows;
    for (size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        auto cells = split_csv_row(lines[li]);
        if (cells.size() != 7)
            throw config_error(strprintf("line %zu: expected 7 glyph columns", li + 1));
        Row row;
        row.r = std::stoi(cells[0]);
        row.c = std::stoi(cells[1]);
        row.cell.count = std::stoi(cells[6]);
        row.cell.w = std::stod(cells[5]);
        if (row.cell.count > 0) {
            row.cell.h_p = std::stod(cells[2]);
            row.cell.h_low = std::stod(cells[3]);
            row.cell.h_high = std::stod(cells[4]);
        }
        max_r = std::max(max_r, row.r);
        max_c = std::max(max_c, row.c);
        rows.push_back(row);
    }
    if (max_r < 0) throw config_error("glyph CSV has no cells");
    GlyphGrid g;
    g.rows = max_r + 1;
    g.cols = max_c + 1;
    g.bounds = bounds;
    g.cells.assign(size_t(g.rows) * g.cols, GlyphCell{});
    for (const Row& row : rows) g.at(row.r, row.c) = row.cell;
    return g;
}

}  // namespace fieldmap
