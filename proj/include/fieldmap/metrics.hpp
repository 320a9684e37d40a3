#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fieldmap/dataset.hpp"
#include "fieldmap/graph.hpp"
#include "fieldmap/raster.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

struct ErrorStats {
    double rmse = 0.0;
    double mae = 0.0;
    size_t count = 0;
};

inline ErrorStats error_stats(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size()) throw pipeline_error("error_stats: size mismatch");
    if (pred.empty()) throw pipeline_error("error_stats: no evaluation entries");
    ErrorStats s;
    s.count = pred.size();
    double se = 0.0, ae = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double r = pred[i] - truth[i];
        se += r * r;
        ae += std::fabs(r);
    }
    s.rmse = std::sqrt(se / static_cast<double>(s.count));
    s.mae = ae / static_cast<double>(s.count);
    return s;
}

// Per-timestep average of the k nearest observed sensors (Haversine). Rows in
// `targets` get a full predicted series; `visible` rows supply the data.
inline std::vector<double> knn_impute(const SensorNetwork& network,
                                      const ObservationSeries& obs,
                                      const std::vector<size_t>& visible,
                                      const std::vector<size_t>& targets, int k) {
    if (k < 1) throw config_error("knn_impute: k must be >= 1");
    if (visible.size() < static_cast<size_t>(k))
        throw pipeline_error("knn_impute: fewer observed sensors than k");
    std::vector<double> out(targets.size() * obs.t, 0.0);
    for (size_t ti = 0; ti < targets.size(); ++ti) {
        size_t target = targets[ti];
        std::vector<size_t> order = visible;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return haversine_km(network.sensors[target].position(),
                                network.sensors[a].position()) <
                   haversine_km(network.sensors[target].position(),
                                network.sensors[b].position());
        });
        order.resize(static_cast<size_t>(k));
        for (size_t t = 0; t < obs.t; ++t) {
            double sum = 0.0;
            size_t cnt = 0;
            for (size_t j : order) {
                if (!obs.observed(j, t)) continue;
                sum += obs.value(j, t);
                ++cnt;
            }
            if (cnt == 0) {
                // Neighbors all missing at this step: fall back to the mean of
                // every visible observation at the step.
                for (size_t j : visible) {
                    if (!obs.observed(j, t)) continue;
                    sum += obs.value(j, t);
                    ++cnt;
                }
            }
            out[ti * obs.t + t] = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
        }
    }
    return out;
}

// Piecewise-linear upsampling: kept frames at indices tau*sr, values between
// consecutive kept frames interpolated, frames after the last kept frame held.
inline std::vector<double> linear_tsr(const std::vector<double>& coarse, size_t n, size_t t_coarse,
                                      int sr) {
    if (sr < 1) throw config_error("linear_tsr: sr must be >= 1");
    if (coarse.size() != n * t_coarse) throw pipeline_error("linear_tsr: size mismatch");
    size_t t_fine = t_coarse * static_cast<size_t>(sr);
    std::vector<double> out(n * t_fine, 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t tc = 0; tc < t_coarse; ++tc) {
            double a = coarse[i * t_coarse + tc];
            bool has_next = tc + 1 < t_coarse;
            double b = has_next ? coarse[i * t_coarse + tc + 1] : a;
            for (int r = 0; r < sr; ++r) {
                double frac = static_cast<double>(r) / static_cast<double>(sr);
                out[i * t_fine + tc * sr + r] = has_next ? a + (b - a) * frac : a;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// SSIM
// ---------------------------------------------------------------------------

namespace detail {

inline const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        const int half = 5;
        const double sigma = 1.5;
        std::vector<double> g(11 * 11);
        double sum = 0.0;
        for (int r = -half; r <= half; ++r)
            for (int c = -half; c <= half; ++c) {
                double v = std::exp(-(r * r + c * c) / (2.0 * sigma * sigma));
                g[(r + half) * 11 + (c + half)] = v;
                sum += v;
            }
        for (double& v : g) v /= sum;
        return g;
    }();
    return w;
}

}  // namespace detail

// Windowed SSIM between one frame of each raster. Windows containing any
// nodata pixel in either frame are skipped; the dynamic range comes from the
// second (truth) frame.
inline double ssim(const RasterField& a, int frame_a, const RasterField& b, int frame_b) {
    if (a.width != b.width || a.height != b.height)
        throw pipeline_error("ssim: dimension mismatch");
    const int half = 5;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int r = 0; r < b.height; ++r)
        for (int c = 0; c < b.width; ++c) {
            float v = b.at(frame_b, r, c);
            if (std::isnan(v)) continue;
            lo = std::min<double>(lo, v);
            hi = std::max<double>(hi, v);
        }
    if (!(hi >= lo)) throw pipeline_error("ssim: truth frame has no valid pixels");
    const double range = std::max(hi - lo, 1e-12);
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    const auto& win = detail::ssim_window();

    double total = 0.0;
    size_t windows = 0;
    for (int r = half; r < a.height - half; ++r) {
        for (int c = half; c < a.width - half; ++c) {
            double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
            bool valid = true;
            for (int dr = -half; dr <= half && valid; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    double wa = a.at(frame_a, r + dr, c + dc);
                    double wb = b.at(frame_b, r + dr, c + dc);
                    if (std::isnan(wa) || std::isnan(wb)) {
                        valid = false;
                        break;
                    }
                    double w = win[(dr + half) * 11 + (dc + half)];
                    mx += w * wa;
                    my += w * wb;
                    mxx += w * wa * wa;
                    myy += w * wb * wb;
                    mxy += w * wa * wb;
                }
            if (!valid) continue;
            double vx = mxx - mx * mx;
            double vy = myy - my * my;
            double cov = mxy - mx * my;
            double score = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                           ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += score;
            ++windows;
        }
    }
    if (windows == 0) throw pipeline_error("ssim: no fully valid windows");
    return total / static_cast<double>(windows);
}

}  // namespace fieldmap
