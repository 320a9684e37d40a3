#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fieldmap/util.hpp"

namespace fieldmap {

// Planar geometry on lng/lat degrees. Domains in this pipeline are
// sub-continental, so all polygon work is done on the plane.

struct Vec2 {
    double x = 0.0;  // lng
    double y = 0.0;  // lat

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

struct Bounds {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double diagonal() const { return std::hypot(width(), height()); }
    bool contains(const Vec2& p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
};

inline Bounds bounds_of(const std::vector<Vec2>& pts) {
    Bounds b;
    if (pts.empty()) return b;
    b.min_x = b.max_x = pts[0].x;
    b.min_y = b.max_y = pts[0].y;
    for (const auto& p : pts) {
        b.min_x = std::min(b.min_x, p.x);
        b.max_x = std::max(b.max_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

inline bool point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double eps) {
    Vec2 ab = b - a;
    Vec2 ap = p - a;
    double len = ab.norm();
    if (len < eps) return distance(p, a) <= eps;
    double cross = std::fabs(ab.cross(ap)) / len;
    if (cross > eps) return false;
    double t = ab.dot(ap) / (len * len);
    return t >= -eps && t <= 1.0 + eps;
}

// Simple closed polygon stored as an open ring (last vertex implicitly
// connects back to the first).
struct Polygon {
    std::vector<Vec2> ring;

    bool empty() const { return ring.size() < 3; }
    Bounds bounds() const { return bounds_of(ring); }

    double signed_area() const {
        double a = 0.0;
        for (size_t i = 0, n = ring.size(); i < n; ++i) {
            const Vec2& p = ring[i];
            const Vec2& q = ring[(i + 1) % n];
            a += p.cross(q);
        }
        return 0.5 * a;
    }
    double area() const { return std::fabs(signed_area()); }

    Vec2 centroid() const {
        double a = signed_area();
        if (std::fabs(a) < 1e-300) {
            // Degenerate ring: fall back to vertex average.
            Vec2 c;
            for (const auto& p : ring) c = c + p;
            return c * (ring.empty() ? 0.0 : 1.0 / double(ring.size()));
        }
        double cx = 0, cy = 0;
        for (size_t i = 0, n = ring.size(); i < n; ++i) {
            const Vec2& p = ring[i];
            const Vec2& q = ring[(i + 1) % n];
            double w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        return {cx / (6.0 * a), cy / (6.0 * a)};
    }

    // Inside-or-on test. Boundary points count as contained.
    bool contains(const Vec2& p, double eps = 1e-9) const {
        size_t n = ring.size();
        if (n < 3) return false;
        for (size_t i = 0; i < n; ++i) {
            if (point_on_segment(p, ring[i], ring[(i + 1) % n], eps)) return true;
        }
        bool inside = false;
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            if ((ring[i].y > p.y) != (ring[j].y > p.y) &&
                p.x < (ring[j].x - ring[i].x) * (p.y - ring[i].y) / (ring[j].y - ring[i].y) +
                          ring[i].x) {
                inside = !inside;
            }
        }
        return inside;
    }
};

// Andrew monotone chain; returns hull in counter-clockwise order.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Vec2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (size_t i = n - 1, t = k + 1; i-- > 0;) {
        while (k >= t && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Default boundary when none is supplied: convex hull of the sensor
// locations with every vertex pushed away from the hull centroid by
// 2% of the hull's bounding-box diagonal. Collinear inputs fall back
// to an inflated bounding box.
inline Polygon expanded_hull_boundary(const std::vector<Vec2>& pts, double expand_fraction = 0.02) {
    std::vector<Vec2> hull = convex_hull(pts);
    Polygon poly;
    if (hull.size() >= 3 && Polygon{hull}.area() > 0.0) {
        double margin = bounds_of(hull).diagonal() * expand_fraction;
        Vec2 c = Polygon{hull}.centroid();
        for (const auto& v : hull) {
            Vec2 d = v - c;
            double len = d.norm();
            Vec2 dir = len > 0 ? d * (1.0 / len) : Vec2{1, 0};
            poly.ring.push_back(v + dir * margin);
        }
        return poly;
    }
    Bounds b = bounds_of(pts);
    double margin = std::max(b.diagonal(), 1e-6) * expand_fraction;
    poly.ring = {{b.min_x - margin, b.min_y - margin},
                 {b.max_x + margin, b.min_y - margin},
                 {b.max_x + margin, b.max_y + margin},
                 {b.min_x - margin, b.max_y + margin}};
    return poly;
}

// Sutherland-Hodgman clip of a convex polygon against the half-plane
// { p : (p - origin) . dir <= 0 }.
inline std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& poly, const Vec2& origin,
                                         const Vec2& dir) {
    std::vector<Vec2> out;
    size_t n = poly.size();
    if (n == 0) return out;
    out.reserve(n + 1);
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        double da = (a - origin).dot(dir);
        double db = (b - origin).dot(dir);
        bool ina = da <= 0.0;
        bool inb = db <= 0.0;
        if (ina) out.push_back(a);
        if (ina != inb) {
            double t = da / (da - db);
            out.push_back(a + (b - a) * t);
        }
    }
    return out;
}

// Strict crossing test: true only if the open segments intersect at a
// single interior point (collinear touching does not count).
inline bool segments_properly_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                                        const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        double v = (q - p).cross(r - p);
        return (v > 0) - (v < 0);
    };
    int o1 = orient(a, b, c), o2 = orient(a, b, d);
    int o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 && o1 != o2 && o3 != o4;
}

}  // namespace fieldmap
