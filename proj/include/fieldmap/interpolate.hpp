#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fieldmap/geometry.hpp"
#include "fieldmap/linalg.hpp"
#include "fieldmap/raster.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

struct RbfConfig {
    double epsilon = 1.0;      // Gaussian shape parameter on normalized distances
    double lambda_smooth = 0.5;
    int n_neighbors = 10;      // centers per local solve
    int poly_degree = 1;       // 0: constant tail, 1: linear tail

    int monomials() const { return poly_degree == 0 ? 1 : 3; }
    void validate() const {
        if (epsilon <= 0.0) throw config_error("rbf: epsilon must be > 0");
        if (lambda_smooth < 0.0) throw config_error("rbf: lambda must be >= 0");
        if (poly_degree != 0 && poly_degree != 1)
            throw config_error("rbf: poly_degree must be 0 or 1");
        if (n_neighbors < monomials())
            throw config_error("rbf: n_neighbors must be >= the monomial count");
    }
};

// Distances and monomials are normalized by the domain so epsilon is unitless:
// r' = |p-q| / diagonal, u = (x - min_x)/diagonal, v = (y - min_y)/diagonal.
struct RbfFrame {
    Bounds bounds;
    double diagonal = 0.0;

    explicit RbfFrame(const Bounds& b) : bounds(b), diagonal(b.diagonal()) {
        if (diagonal <= 0.0) throw pipeline_error("rbf: degenerate domain bounds");
    }
    double kernel(const Vec2& p, const Vec2& q, double epsilon) const {
        double r = distance(p, q) / diagonal;
        return std::exp(-epsilon * r * r);
    }
    void monomials(const Vec2& p, int degree, double* out) const {
        out[0] = 1.0;
        if (degree >= 1) {
            out[1] = (p.x - bounds.min_x) / diagonal;
            out[2] = (p.y - bounds.min_y) / diagonal;
        }
    }
};

struct RbfSystem {
    LuFactors factors;
    std::vector<Vec2> centers;
    int q = 1;  // monomial count

    int size() const { return static_cast<int>(centers.size()) + q; }
};

// Augmented symmetric system: [[Phi + lambda I, P], [P^T, 0]] [c; b] = [x; 0].
inline RbfSystem rbf_build(const std::vector<Vec2>& centers, const RbfConfig& cfg,
                           const RbfFrame& frame) {
    cfg.validate();
    const int m = static_cast<int>(centers.size());
    if (m < cfg.monomials())
        throw pipeline_error("rbf: fewer centers than monomials in scope");
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (centers[i].x == centers[j].x && centers[i].y == centers[j].y)
                throw pipeline_error(strprintf("rbf: duplicate centers at index %d and %d", i, j));

    RbfSystem sys;
    sys.centers = centers;
    sys.q = cfg.monomials();
    const int n = m + sys.q;
    std::vector<double> a(size_t(n) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) a[size_t(i) * n + j] = frame.kernel(centers[i], centers[j], cfg.epsilon);
        a[size_t(i) * n + i] += cfg.lambda_smooth;
    }
    std::vector<double> mono(3);
    for (int i = 0; i < m; ++i) {
        frame.monomials(centers[i], cfg.poly_degree, mono.data());
        for (int t = 0; t < sys.q; ++t) {
            a[size_t(i) * n + m + t] = mono[t];
            a[size_t(m + t) * n + i] = mono[t];
        }
    }
    sys.factors = lu_factor(std::move(a), n);
    return sys;
}

struct RbfCoefficients {
    std::vector<double> c;  // per center
    std::vector<double> b;  // per monomial
};

inline RbfCoefficients rbf_solve_system(const RbfSystem& sys, const std::vector<double>& values) {
    const int m = static_cast<int>(sys.centers.size());
    if (static_cast<int>(values.size()) != m) throw pipeline_error("rbf: value count mismatch");
    std::vector<double> rhs(sys.size(), 0.0);
    std::copy(values.begin(), values.end(), rhs.begin());
    std::vector<double> sol = lu_solve(sys.factors, std::move(rhs));
    RbfCoefficients out;
    out.c.assign(sol.begin(), sol.begin() + m);
    out.b.assign(sol.begin() + m, sol.end());
    return out;
}

// One-shot fit over a fixed center set (used directly by tests and small jobs).
inline RbfCoefficients rbf_solve(const std::vector<Vec2>& centers,
                                 const std::vector<double>& values, const RbfConfig& cfg,
                                 const Bounds& domain) {
    RbfFrame frame(domain);
    return rbf_solve_system(rbf_build(centers, cfg, frame), values);
}

inline double rbf_eval(const std::vector<Vec2>& centers, const RbfCoefficients& coef,
                       const RbfConfig& cfg, const Bounds& domain, const Vec2& p) {
    RbfFrame frame(domain);
    double acc = 0.0;
    for (size_t i = 0; i < centers.size(); ++i)
        acc += coef.c[i] * frame.kernel(p, centers[i], cfg.epsilon);
    double mono[3];
    frame.monomials(p, cfg.poly_degree, mono);
    for (size_t t = 0; t < coef.b.size(); ++t) acc += coef.b[t] * mono[t];
    return acc;
}

// Reference-enhanced interpolation: every pixel solves on its N nearest
// centers. The local system depends only on center geometry, so each pixel's
// factorization is computed once and reused for every timestep.
//   centers  - sensor positions (originals plus imputed virtuals)
//   values   - (n_centers x steps) row-major series at those centers
//   width    - raster width in pixels; height follows the bounds aspect
inline RasterField interpolate(const std::vector<Vec2>& centers,
                               const std::vector<double>& values, size_t steps,
                               const Polygon& boundary, int width, const RbfConfig& cfg) {
    cfg.validate();
    const size_t m = centers.size();
    if (m < static_cast<size_t>(cfg.monomials()))
        throw pipeline_error("interpolate: fewer centers than monomials");
    if (values.size() != m * steps) throw pipeline_error("interpolate: value matrix mismatch");
    if (width < 2) throw config_error("interpolate: width must be >= 2");

    Bounds bb = boundary.bounds();
    RbfFrame frame(bb);
    RasterField out;
    out.width = width;
    out.height = std::max(2, static_cast<int>(std::lround(width * bb.height() / bb.width())));
    out.steps = static_cast<int>(steps);
    out.bounds = bb;
    out.data.assign(size_t(width) * out.height * steps,
                    std::numeric_limits<float>::quiet_NaN());

    const int take = std::min<int>(cfg.n_neighbors, static_cast<int>(m));
    struct PixelSystem {
        int row, col;
        std::vector<int> idx;
        RbfSystem sys;
    };
    std::vector<PixelSystem> pixels;
    std::vector<int> order(m);
    for (int r = 0; r < out.height; ++r) {
        for (int col = 0; col < out.width; ++col) {
            Vec2 p = out.pixel_center(r, col);
            if (!boundary.contains(p)) continue;
            std::iota(order.begin(), order.end(), 0);
            std::nth_element(order.begin(), order.begin() + take, order.end(),
                             [&](int a, int b) {
                                 double da = distance(p, centers[a]);
                                 double db = distance(p, centers[b]);
                                 return da != db ? da < db : a < b;
                             });
            PixelSystem ps;
            ps.row = r;
            ps.col = col;
            ps.idx.assign(order.begin(), order.begin() + take);
            std::sort(ps.idx.begin(), ps.idx.end());  // order-independent systems
            std::vector<Vec2> local;
            local.reserve(take);
            for (int i : ps.idx) local.push_back(centers[i]);
            ps.sys = rbf_build(local, cfg, frame);
            pixels.push_back(std::move(ps));
        }
    }

    std::vector<double> local_vals(take);
    double mono[3];
    for (size_t t = 0; t < steps; ++t) {
        for (const auto& ps : pixels) {
            for (int i = 0; i < take; ++i)
                local_vals[i] = values[size_t(ps.idx[i]) * steps + t];
            RbfCoefficients coef = rbf_solve_system(ps.sys, local_vals);
            Vec2 p = out.pixel_center(ps.row, ps.col);
            double acc = 0.0;
            for (int i = 0; i < take; ++i)
                acc += coef.c[i] * frame.kernel(p, ps.sys.centers[i], cfg.epsilon);
            frame.monomials(p, cfg.poly_degree, mono);
            for (size_t q = 0; q < coef.b.size(); ++q) acc += coef.b[q] * mono[q];
            out.at(static_cast<int>(t), ps.row, ps.col) = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace fieldmap
