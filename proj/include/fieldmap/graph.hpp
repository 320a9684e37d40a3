#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "fieldmap/dataset.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

inline constexpr double kEarthRadiusKm = 6371.0;

inline double haversine_km(const Vec2& p, const Vec2& q) {
    double lat1 = p.y * M_PI / 180.0, lat2 = q.y * M_PI / 180.0;
    double dlat = (q.y - p.y) * M_PI / 180.0;
    double dlng = (q.x - p.x) * M_PI / 180.0;
    double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
               std::cos(lat1) * std::cos(lat2) * std::sin(dlng / 2) * std::sin(dlng / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

// Dense n x n weight matrix; n stays in the hundreds for this pipeline so a
// dense layout keeps the message-passing math simple.
struct AdjacencyMatrix {
    size_t n = 0;
    std::vector<double> w;  // row-major, w[i*n+j] = weight of edge i->j

    static AdjacencyMatrix zeros(size_t n_) {
        AdjacencyMatrix a;
        a.n = n_;
        a.w.assign(n_ * n_, 0.0);
        return a;
    }
    double at(size_t i, size_t j) const { return w[i * n + j]; }
    double& at(size_t i, size_t j) { return w[i * n + j]; }
    size_t nonzeros() const {
        size_t c = 0;
        for (double v : w)
            if (v != 0.0) ++c;
        return c;
    }
};

struct SensorGraph {
    AdjacencyMatrix a_first;  // original-to-original edges only
    AdjacencyMatrix a_sub;    // all sensors
    int k = 0;
    double eta_km = 0.0;      // mean pairwise Haversine distance
};

// k-nearest-neighbor graph with weights e^{-H/distance_scale}, symmetrized by
// union, then scaled so the largest a_sub weight is 1. a_first keeps the same
// weights restricted to edges whose two endpoints are both Original sensors.
inline SensorGraph build_graph(const SensorNetwork& network, int k, double distance_scale = 0.0) {
    const size_t n = network.sensors.size();
    if (k < 1) throw config_error("build_graph: k must be >= 1");
    if (static_cast<size_t>(k) >= n)
        throw config_error(strprintf("build_graph: k=%d must be < n=%zu", k, n));

    std::vector<double> dist(n * n, 0.0);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double d = haversine_km(network.sensors[i].position(), network.sensors[j].position());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
            sum += d;
        }
    }
    SensorGraph g;
    g.k = k;
    g.eta_km = n > 1 ? sum / (n * (n - 1) / 2.0) : 0.0;
    double scale = distance_scale > 0.0 ? distance_scale : g.eta_km;
    if (scale <= 0.0) throw pipeline_error("build_graph: zero distance scale");

    g.a_sub = AdjacencyMatrix::zeros(n);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) order[j] = j;
        // Stable sort on distance keeps ties in index order for determinism.
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return dist[i * n + a] < dist[i * n + b];
        });
        int taken = 0;
        for (size_t j : order) {
            if (j == i) continue;
            double raw = std::exp(-dist[i * n + j] / scale);
            g.a_sub.at(i, j) = raw;
            g.a_sub.at(j, i) = raw;  // union symmetrization
            if (++taken == k) break;
        }
    }

    // Scale so the largest weight is 1. A strict min-max over nonzeros would
    // zero out the weakest edge and delete it from the graph, so the lower
    // end of the range is left where the exponential decay puts it.
    double hi = 0.0;
    for (double v : g.a_sub.w) hi = std::max(hi, v);
    if (hi > 0.0)
        for (double& v : g.a_sub.w) v /= hi;

    g.a_first = AdjacencyMatrix::zeros(n);
    for (size_t i = 0; i < n; ++i) {
        if (network.sensors[i].kind != SensorKind::Original) continue;
        for (size_t j = 0; j < n; ++j) {
            if (network.sensors[j].kind != SensorKind::Original) continue;
            g.a_first.at(i, j) = g.a_sub.at(i, j);
        }
    }
    return g;
}

inline void save_adjacency(const AdjacencyMatrix& a, const std::filesystem::path& path) {
    std::string out = "i,j,weight\n";
    for (size_t i = 0; i < a.n; ++i)
        for (size_t j = 0; j < a.n; ++j)
            if (a.at(i, j) != 0.0)
                out += strprintf("%zu,%zu,%s\n", i, j, double_repr(a.at(i, j)).c_str());
    write_text_file(path, out);
}

inline AdjacencyMatrix load_adjacency(const std::filesystem::path& path, size_t n) {
    std::vector<std::string> lines = split_lines(read_text_file(path));
    if (lines.empty() || trim(lines[0]) != "i,j,weight")
        throw config_error("adjacency CSV must start with header i,j,weight: " + path.string());
    AdjacencyMatrix a = AdjacencyMatrix::zeros(n);
    for (size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        auto cells = split_csv_row(lines[li]);
        if (cells.size() != 3)
            throw config_error(strprintf("line %zu: expected i,j,weight", li + 1));
        size_t i = std::stoul(cells[0]), j = std::stoul(cells[1]);
        if (i >= n || j >= n)
            throw config_error(strprintf("line %zu: index out of range for n=%zu", li + 1, n));
        a.at(i, j) = std::stod(cells[2]);
    }
    return a;
}

}  // namespace fieldmap
