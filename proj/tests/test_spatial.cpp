// ============================================================================
// Spatial modules: kernel density, density inversion, virtual placement,
// centroidal relaxation, sensor graph, RBF interpolation, classical baselines.
// Derived quantities are checked against oracles computed independently here.
// ============================================================================

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "fieldmap/densify.hpp"
#include "fieldmap/graph.hpp"
#include "fieldmap/interpolate.hpp"
#include "fieldmap/metrics.hpp"

using namespace fieldmap;

namespace {

Polygon square(double lo, double hi) {
    return Polygon{{{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}}};
}

// Quadrature oracle for the centroidal energy: sum over grid cells inside the
// boundary of (distance to nearest site)^2 * cell area.
double cvt_energy(const std::vector<Vec2>& sites, const Polygon& boundary, int res = 200) {
    Bounds bb = boundary.bounds();
    double cell = std::max(bb.width(), bb.height()) / res;
    double e = 0.0;
    for (double y = bb.min_y + cell / 2; y < bb.max_y; y += cell)
        for (double x = bb.min_x + cell / 2; x < bb.max_x; x += cell) {
            if (!boundary.contains({x, y})) continue;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& s : sites) {
                double d2 = (Vec2{x, y} - s).dot(Vec2{x, y} - s);
                best = std::min(best, d2);
            }
            e += best * cell * cell;
        }
    return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// kernel density estimate
// ---------------------------------------------------------------------------

TEST_CASE("kde grid values match a direct evaluation of the kernel sum", "[kde]") {
    Rng rng(11);
    std::uniform_real_distribution<double> dist(0.2, 0.8);
    std::vector<Vec2> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({dist(rng), dist(rng)});
    KdeOptions opt;
    opt.resolution = 32;
    DensityField f = kde_points(pts, square(0, 1), opt);

    // Independent oracle: Silverman bandwidths and the kernel sum recomputed
    // from scratch at a handful of cells.
    double mx = 0, my = 0;
    for (auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sx = 0, sy = 0;
    for (auto& p : pts) {
        sx += (p.x - mx) * (p.x - mx);
        sy += (p.y - my) * (p.y - my);
    }
    double n = double(pts.size());
    double hx = std::sqrt(sx / (n - 1)) * std::pow(n, -1.0 / 6.0);
    double hy = std::sqrt(sy / (n - 1)) * std::pow(n, -1.0 / 6.0);
    REQUIRE_THAT(f.bandwidth_x, Catch::Matchers::WithinRel(hx, 1e-12));
    REQUIRE_THAT(f.bandwidth_y, Catch::Matchers::WithinRel(hy, 1e-12));
    for (auto [r, c] : {std::pair{3, 4}, {16, 16}, {30, 7}}) {
        Vec2 s = f.cell_center(r, c);
        double acc = 0.0;
        for (auto& p : pts)
            acc += std::exp(-0.5 * (std::pow((s.x - p.x) / hx, 2) +
                                    std::pow((s.y - p.y) / hy, 2)));
        acc /= n * 2.0 * M_PI * hx * hy;
        REQUIRE_THAT(f.at(r, c), Catch::Matchers::WithinRel(acc, 1e-12));
    }
}

TEST_CASE("kde density ratio between clusters tracks their point counts", "[kde]") {
    // Two clusters, 40 points vs 20: density at the large cluster is about
    // twice the density at the small one.
    Rng rng(3);
    std::uniform_real_distribution<double> jit(-0.05, 0.05);
    std::vector<Vec2> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({0.0 + jit(rng), 0.0 + jit(rng)});
    for (int i = 0; i < 20; ++i) pts.push_back({1.0 + jit(rng), 0.0 + jit(rng)});
    KdeOptions opt;
    opt.resolution = 200;
    opt.apply_boundary = false;
    DensityField f = kde_points(pts, square(-1, 2), opt);
    auto value_at = [&](double x, double y) {
        int c = int((x - f.bounds.min_x) / f.cell_size);
        int r = int((y - f.bounds.min_y) / f.cell_size);
        return f.at(r, c);
    };
    double ratio = value_at(0, 0) / value_at(1, 0);
    REQUIRE_THAT(ratio, Catch::Matchers::WithinAbs(2.0, 0.5));
}

TEST_CASE("kde integrates to one over a padded unbounded grid", "[kde]") {
    Rng rng(5);
    std::uniform_real_distribution<double> dist(0.3, 0.7);
    std::vector<Vec2> pts;
    for (int i = 0; i < 30; ++i) pts.push_back({dist(rng), dist(rng)});
    KdeOptions opt;
    opt.resolution = 256;
    opt.pad_bandwidths = 4.0;
    opt.apply_boundary = false;
    DensityField f = kde_points(pts, square(0, 1), opt);
    double mass = f.integral();
    REQUIRE(mass >= 0.98);
    REQUIRE(mass <= 1.02);
}

TEST_CASE("kde rejects degenerate spreads", "[kde]") {
    std::vector<Vec2> collinear = {{0.5, 0.1}, {0.5, 0.5}, {0.5, 0.9}};
    REQUIRE_THROWS_AS(kde_points(collinear, square(0, 1)), pipeline_error);
    REQUIRE_THROWS_AS(kde_points({{0.5, 0.5}}, square(0, 1)), pipeline_error);
}

// ---------------------------------------------------------------------------
// density inversion
// ---------------------------------------------------------------------------

namespace {

DensityField tiny_field(std::vector<double> vals, std::vector<uint8_t> inside) {
    DensityField d;
    d.width = int(vals.size());
    d.height = 1;
    d.cell_size = 1.0;
    d.bounds = {0, 0, double(vals.size()), 1};
    d.bandwidth_x = d.bandwidth_y = 1.0;
    d.values = std::move(vals);
    d.inside = std::move(inside);
    return d;
}

}  // namespace

TEST_CASE("inverted density matches the closed form with min-max rescale", "[densify]") {
    DensityField d = tiny_field({0.1, 0.5, 1.0}, {1, 1, 1});
    DensityField v = invert_density(d, 5.0, 0.05);
    // Oracle recomputed longhand.
    double a = std::exp(-5.0 * 0.1) - 0.05;
    double b = std::exp(-5.0 * 0.5) - 0.05;
    double c = std::max(std::exp(-5.0 * 1.0) - 0.05, 0.0);  // clamps to 0
    REQUIRE(c == 0.0);
    double hi = a, lo = c;
    REQUIRE_THAT(v.at(0, 0), Catch::Matchers::WithinAbs((a - lo) / (hi - lo), 1e-12));
    REQUIRE_THAT(v.at(0, 1), Catch::Matchers::WithinAbs((b - lo) / (hi - lo), 1e-12));
    REQUIRE(v.at(0, 2) == 0.0);
    REQUIRE(v.at(0, 0) == 1.0);  // densest sampling where sensors are sparsest
}

TEST_CASE("inverted density zeroes exterior cells and keeps flat fields eligible", "[densify]") {
    DensityField d = tiny_field({0.2, 0.2, 0.9}, {1, 1, 0});
    DensityField v = invert_density(d, 5.0, 0.05);
    REQUIRE(v.at(0, 2) == 0.0);          // outside the boundary
    REQUIRE(v.at(0, 0) == 1.0);          // flat interior: everything stays eligible
    REQUIRE(v.at(0, 1) == 1.0);
    DensityField none = tiny_field({0.5}, {0});
    REQUIRE_THROWS_AS(invert_density(none), pipeline_error);
}

// ---------------------------------------------------------------------------
// virtual sensor sampling
// ---------------------------------------------------------------------------

TEST_CASE("sampling frequencies follow cell weights", "[densify]") {
    DensityField d = tiny_field({3.0, 1.0}, {1, 1});
    Polygon box = Polygon{{{0, 0}, {2, 0}, {2, 1}, {0, 1}}};
    int first = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        auto pts = sample_virtual(d, box, 1, uint64_t(i));
        REQUIRE(pts.size() == 1);
        if (pts[0].x < 1.0) ++first;
    }
    REQUIRE_THAT(double(first) / draws, Catch::Matchers::WithinAbs(0.75, 0.01));
}

TEST_CASE("sampling is without cell replacement and respects the boundary", "[densify]") {
    DensityField d = tiny_field({3.0, 1.0}, {1, 1});
    Polygon box = Polygon{{{0, 0}, {2, 0}, {2, 1}, {0, 1}}};
    auto pts = sample_virtual(d, box, 2, 99);
    REQUIRE(pts.size() == 2);
    // One point per cell: cells are exhausted, not reused.
    REQUIRE(((pts[0].x < 1.0) != (pts[1].x < 1.0)));
    for (const auto& p : pts) REQUIRE(box.contains(p));
    REQUIRE_THROWS_AS(sample_virtual(d, box, 3, 1), pipeline_error);
    // Determinism: same seed, same placement.
    auto again = sample_virtual(d, box, 2, 99);
    REQUIRE(again[0].x == pts[0].x);
    REQUIRE(again[1].y == pts[1].y);
}

// ---------------------------------------------------------------------------
// centroidal relaxation
// ---------------------------------------------------------------------------

TEST_CASE("a lone movable point converges to the square center", "[cvt]") {
    Polygon box = square(0, 1);
    std::vector<Vec2> moved = cvt_relax({}, {{0.2, 0.3}}, box, 5);
    REQUIRE_THAT(moved[0].x, Catch::Matchers::WithinAbs(0.5, 0.01));
    REQUIRE_THAT(moved[0].y, Catch::Matchers::WithinAbs(0.5, 0.01));
}

TEST_CASE("relaxation energy is non-increasing", "[cvt]") {
    Polygon box = square(0, 1);
    std::vector<Vec2> fixed = {{0.2, 0.2}, {0.8, 0.3}, {0.5, 0.8}};
    std::vector<Vec2> movable = {{0.4, 0.4}, {0.6, 0.6}, {0.3, 0.7}, {0.7, 0.2}};
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= 3; ++it) {
        std::vector<Vec2> m = cvt_relax(fixed, movable, box, it);
        std::vector<Vec2> sites = fixed;
        sites.insert(sites.end(), m.begin(), m.end());
        double e = cvt_energy(sites, box);
        REQUIRE(e <= prev * (1.0 + 1e-6) + 1e-12);
        prev = e;
        for (const auto& p : m) REQUIRE(box.contains(p));
    }
}

TEST_CASE("cells poking outside the boundary freeze their site", "[cvt]") {
    // A lone site in a triangle owns the whole bounding box, which sticks out
    // of the triangle, so the site must not move.
    Polygon tri{{{0, 0}, {4, 0}, {0, 4}}};
    std::vector<Vec2> moved = cvt_relax({}, {{1.8, 1.7}}, tri, 4);
    REQUIRE(moved[0].x == 1.8);
    REQUIRE(moved[0].y == 1.7);
}

// ---------------------------------------------------------------------------
// sensor graph
// ---------------------------------------------------------------------------

TEST_CASE("haversine reference distances", "[graph]") {
    REQUIRE_THAT(haversine_km({0, 0}, {0, 90}),
                 Catch::Matchers::WithinRel(M_PI / 2 * 6371.0, 1e-9));
    REQUIRE_THAT(haversine_km({0, 0}, {180, 0}),
                 Catch::Matchers::WithinRel(M_PI * 6371.0, 1e-9));
    REQUIRE(haversine_km({116.4, 39.9}, {121.5, 31.2}) ==
            haversine_km({121.5, 31.2}, {116.4, 39.9}));
    REQUIRE(haversine_km({10, 10}, {10, 10}) == 0.0);
}

namespace {

SensorNetwork collinear_net() {
    SensorNetwork net;
    net.sensors = {{"a", 0.0, 0.0, SensorKind::Original},
                   {"b", 1.0, 0.0, SensorKind::Original},
                   {"c", 2.0, 0.0, SensorKind::Original}};
    net.boundary = Polygon{{{-1, -1}, {3, -1}, {3, 1}, {-1, 1}}};
    return net;
}

}  // namespace

TEST_CASE("k=1 graph over three collinear sensors keeps both short edges", "[graph]") {
    SensorNetwork net = collinear_net();
    SensorGraph g = build_graph(net, 1);
    // Union symmetrization: a-b and b-c, never a-c.
    REQUIRE(g.a_sub.at(0, 1) > 0.0);
    REQUIRE(g.a_sub.at(1, 2) > 0.0);
    REQUIRE(g.a_sub.at(0, 2) == 0.0);
    REQUIRE(g.a_sub.at(1, 0) == g.a_sub.at(0, 1));
    // Equal lengths, so after scaling both surviving edges sit at the max.
    REQUIRE_THAT(g.a_sub.at(0, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(g.a_sub.at(1, 2), Catch::Matchers::WithinAbs(1.0, 1e-12));
    // Oracle for eta: mean of the three pairwise distances.
    double d01 = haversine_km({0, 0}, {1, 0});
    double d12 = haversine_km({1, 0}, {2, 0});
    double d02 = haversine_km({0, 0}, {2, 0});
    REQUIRE_THAT(g.eta_km, Catch::Matchers::WithinRel((d01 + d12 + d02) / 3.0, 1e-12));
}

TEST_CASE("raw graph weights follow exp(-distance/eta) before rescaling", "[graph]") {
    SensorNetwork net = collinear_net();
    SensorGraph g = build_graph(net, 2);
    double d01 = haversine_km({0, 0}, {1, 0});
    double d02 = haversine_km({0, 0}, {2, 0});
    // With k=2 every pair is connected; the ratio of weights is scale-free.
    double expect = std::exp(-d01 / g.eta_km) / std::exp(-d02 / g.eta_km);
    REQUIRE_THAT(g.a_sub.at(0, 1) / g.a_sub.at(0, 2),
                 Catch::Matchers::WithinRel(expect, 1e-12));
    double hi = 0.0;
    for (double v : g.a_sub.w) hi = std::max(hi, v);
    REQUIRE(hi == 1.0);
}

TEST_CASE("first-layer adjacency drops edges touching virtual sensors", "[graph]") {
    SensorNetwork net = collinear_net();
    net.sensors[1].kind = SensorKind::Virtual;
    SensorGraph g = build_graph(net, 1);
    REQUIRE(g.a_sub.at(0, 1) > 0.0);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j)
            if (i == 1 || j == 1) REQUIRE(g.a_first.at(i, j) == 0.0);
    REQUIRE(g.a_first.at(0, 2) == g.a_sub.at(0, 2));
}

TEST_CASE("graph rejects k out of range", "[graph]") {
    SensorNetwork net = collinear_net();
    REQUIRE_THROWS_AS(build_graph(net, 0), config_error);
    REQUIRE_THROWS_AS(build_graph(net, 3), config_error);
}

TEST_CASE("adjacency CSV round-trip", "[graph]") {
    SensorGraph g = build_graph(collinear_net(), 2);
    auto dir = std::filesystem::temp_directory_path() / "fieldmap_test_adj";
    std::filesystem::create_directories(dir);
    save_adjacency(g.a_sub, dir / "a.csv");
    AdjacencyMatrix back = load_adjacency(dir / "a.csv", 3);
    for (size_t i = 0; i < 9; ++i) REQUIRE(back.w[i] == g.a_sub.w[i]);
    std::filesystem::remove_all(dir);
}

// ---------------------------------------------------------------------------
// RBF interpolation
// ---------------------------------------------------------------------------

namespace {

std::vector<Vec2> rbf_centers() {
    // Jittered grid: enough scatter to be generic, enough separation to keep
    // the kernel matrix well conditioned.
    Rng rng(21);
    std::uniform_real_distribution<double> jit(-0.08, 0.08);
    std::vector<Vec2> c;
    for (int r = 0; r < 3; ++r)
        for (int q = 0; q < 4; ++q)
            c.push_back({0.15 + 0.23 * q + jit(rng), 0.2 + 0.3 * r + jit(rng)});
    return c;
}

}  // namespace

TEST_CASE("interpolation without smoothing reproduces the data exactly", "[rbf]") {
    auto centers = rbf_centers();
    Rng rng(22);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    std::vector<double> vals;
    for (size_t i = 0; i < centers.size(); ++i) vals.push_back(dist(rng));
    RbfConfig cfg;
    cfg.lambda_smooth = 0.0;
    Bounds domain{0, 0, 1, 1};
    RbfCoefficients coef = rbf_solve(centers, vals, cfg, domain);
    for (size_t i = 0; i < centers.size(); ++i) {
        double got = rbf_eval(centers, coef, cfg, domain, centers[i]);
        REQUIRE_THAT(got, Catch::Matchers::WithinRel(vals[i], 1e-8));
    }
}

TEST_CASE("constant fields are reproduced for any smoothing strength", "[rbf]") {
    auto centers = rbf_centers();
    std::vector<double> vals(centers.size(), 7.5);
    Bounds domain{0, 0, 1, 1};
    for (double lam : {0.0, 0.5, 10.0}) {
        RbfConfig cfg;
        cfg.lambda_smooth = lam;
        RbfCoefficients coef = rbf_solve(centers, vals, cfg, domain);
        for (const Vec2& q : {Vec2{0.31, 0.77}, Vec2{0.05, 0.05}, Vec2{0.9, 0.4}})
            REQUIRE_THAT(rbf_eval(centers, coef, cfg, domain, q),
                         Catch::Matchers::WithinAbs(7.5, 1e-6));
    }
}

TEST_CASE("huge smoothing collapses to the polynomial least-squares fit", "[rbf]") {
    // Dual route: as lambda grows the kernel part vanishes and the prediction
    // approaches the plain linear regression, solved here with Eigen.
    auto centers = rbf_centers();
    Rng rng(23);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> vals;
    for (size_t i = 0; i < centers.size(); ++i)
        vals.push_back(1.0 + 2.0 * centers[i].x - 0.5 * centers[i].y + 0.3 * dist(rng));
    Bounds domain{0, 0, 1, 1};
    RbfFrame frame(domain);

    Eigen::MatrixXd P(centers.size(), 3);
    Eigen::VectorXd y(centers.size());
    double mono[3];
    for (size_t i = 0; i < centers.size(); ++i) {
        frame.monomials(centers[i], 1, mono);
        P(int(i), 0) = mono[0];
        P(int(i), 1) = mono[1];
        P(int(i), 2) = mono[2];
        y(int(i)) = vals[i];
    }
    Eigen::Vector3d beta = (P.transpose() * P).ldlt().solve(P.transpose() * y);

    RbfConfig cfg;
    cfg.lambda_smooth = 1e8;
    RbfCoefficients coef = rbf_solve(centers, vals, cfg, domain);
    for (const Vec2& q : {Vec2{0.25, 0.6}, Vec2{0.7, 0.15}}) {
        frame.monomials(q, 1, mono);
        double ls = beta(0) * mono[0] + beta(1) * mono[1] + beta(2) * mono[2];
        REQUIRE_THAT(rbf_eval(centers, coef, cfg, domain, q),
                     Catch::Matchers::WithinAbs(ls, 1e-3));
    }
}

TEST_CASE("training residual grows monotonically with smoothing", "[rbf]") {
    auto centers = rbf_centers();
    Rng rng(24);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    std::vector<double> vals;
    for (size_t i = 0; i < centers.size(); ++i) vals.push_back(dist(rng));
    Bounds domain{0, 0, 1, 1};
    double prev = -1.0;
    for (double lam : {0.0, 0.1, 0.5, 1.0, 10.0}) {
        RbfConfig cfg;
        cfg.lambda_smooth = lam;
        RbfCoefficients coef = rbf_solve(centers, vals, cfg, domain);
        double ssr = 0.0;
        for (size_t i = 0; i < centers.size(); ++i) {
            double r = rbf_eval(centers, coef, cfg, domain, centers[i]) - vals[i];
            ssr += r * r;
        }
        REQUIRE(ssr >= prev - 1e-10);
        prev = ssr;
    }
}

TEST_CASE("duplicate centers are rejected", "[rbf]") {
    std::vector<Vec2> centers = {{0.2, 0.2}, {0.8, 0.8}, {0.2, 0.2}};
    RbfConfig cfg;
    REQUIRE_THROWS_AS(rbf_solve(centers, {1.0, 2.0, 3.0}, cfg, Bounds{0, 0, 1, 1}),
                      pipeline_error);
}

TEST_CASE("rasterization is invariant to center ordering", "[rbf]") {
    auto centers = rbf_centers();
    Rng rng(25);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> vals;
    for (size_t i = 0; i < centers.size(); ++i) vals.push_back(dist(rng));
    Polygon box = square(0, 1);
    RbfConfig cfg;
    cfg.n_neighbors = 6;
    RasterField a = interpolate(centers, vals, 1, box, 24, cfg);

    std::vector<size_t> perm(centers.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec2> c2;
    std::vector<double> v2;
    for (size_t i : perm) {
        c2.push_back(centers[i]);
        v2.push_back(vals[i]);
    }
    RasterField b = interpolate(c2, v2, 1, box, 24, cfg);
    for (size_t i = 0; i < a.data.size(); ++i) {
        if (std::isnan(a.data[i])) {
            REQUIRE(std::isnan(b.data[i]));
        } else {
            REQUIRE_THAT(b.data[i], Catch::Matchers::WithinAbs(a.data[i], 1e-5));
        }
    }
}

TEST_CASE("tripling the resolution keeps co-located pixel values", "[rbf]") {
    // Pixel centers (r, c) at width w coincide with (3r+1, 3c+1) at width 3w
    // on a square domain, and co-located pixels solve identical systems.
    auto centers = rbf_centers();
    std::vector<double> vals;
    for (size_t i = 0; i < centers.size(); ++i) vals.push_back(std::sin(3.0 * i));
    Polygon box = square(0, 1);
    RbfConfig cfg;
    cfg.n_neighbors = 8;
    RasterField lo = interpolate(centers, vals, 1, box, 16, cfg);
    RasterField hi = interpolate(centers, vals, 1, box, 48, cfg);
    REQUIRE(hi.height == 3 * lo.height);
    for (int r = 0; r < lo.height; ++r)
        for (int c = 0; c < lo.width; ++c) {
            Vec2 pl = lo.pixel_center(r, c);
            Vec2 ph = hi.pixel_center(3 * r + 1, 3 * c + 1);
            REQUIRE_THAT(ph.x, Catch::Matchers::WithinAbs(pl.x, 1e-12));
            REQUIRE_THAT(ph.y, Catch::Matchers::WithinAbs(pl.y, 1e-12));
            REQUIRE(lo.at(0, r, c) == hi.at(0, 3 * r + 1, 3 * c + 1));
        }
}

TEST_CASE("pixels outside the boundary are nodata", "[rbf]") {
    Polygon tri{{{0, 0}, {1, 0}, {0, 1}}};
    std::vector<Vec2> centers = {{0.1, 0.1}, {0.5, 0.2}, {0.2, 0.5}, {0.1, 0.4}};
    std::vector<double> vals = {1, 2, 3, 4};
    RbfConfig cfg;
    cfg.n_neighbors = 4;
    RasterField r = interpolate(centers, vals, 1, tri, 20, cfg);
    int nan_count = 0, val_count = 0;
    for (int row = 0; row < r.height; ++row)
        for (int col = 0; col < r.width; ++col) {
            bool in = tri.contains(r.pixel_center(row, col));
            if (std::isnan(r.at(0, row, col))) {
                ++nan_count;
                REQUIRE_FALSE(in);
            } else {
                ++val_count;
                REQUIRE(in);
            }
        }
    REQUIRE(nan_count > 0);
    REQUIRE(val_count > 0);
}

// ---------------------------------------------------------------------------
// baselines and scores
// ---------------------------------------------------------------------------

TEST_CASE("error stats on a known vector", "[metrics]") {
    ErrorStats s = error_stats({1.0, 2.0, 5.0}, {1.0, 4.0, 1.0});
    REQUIRE_THAT(s.mae, Catch::Matchers::WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(s.rmse, Catch::Matchers::WithinAbs(std::sqrt(20.0 / 3.0), 1e-12));
    REQUIRE(s.count == 3);
    REQUIRE_THROWS_AS(error_stats({}, {}), pipeline_error);
}

TEST_CASE("knn imputation averages the k nearest visible sensors", "[metrics]") {
    SensorNetwork net;
    net.sensors = {{"a", 0.0, 0.0, SensorKind::Original},
                   {"b", 0.2, 0.0, SensorKind::Original},
                   {"c", 3.0, 0.0, SensorKind::Original},
                   {"t", 0.1, 0.0, SensorKind::Original}};
    net.boundary = Polygon{{{-1, -1}, {4, -1}, {4, 1}, {-1, 1}}};
    ObservationSeries obs = ObservationSeries::zeros(4, 2);
    obs.set(0, 0, 10.0f, true);
    obs.set(1, 0, 20.0f, true);
    obs.set(2, 0, 90.0f, true);
    // Step 1: the two nearest are missing, fall back to the visible mean.
    obs.set(2, 1, 60.0f, true);
    auto pred = knn_impute(net, obs, {0, 1, 2}, {3}, 2);
    REQUIRE_THAT(pred[0], Catch::Matchers::WithinAbs(15.0, 1e-6));
    REQUIRE_THAT(pred[1], Catch::Matchers::WithinAbs(60.0, 1e-6));
    REQUIRE_THROWS_AS(knn_impute(net, obs, {0}, {3}, 2), pipeline_error);
}

TEST_CASE("linear upsampling interpolates between kept frames and holds the tail", "[metrics]") {
    std::vector<double> coarse = {0.0, 2.0, 1.0};
    auto fine = linear_tsr(coarse, 1, 3, 2);
    REQUIRE(fine == std::vector<double>{0.0, 1.0, 2.0, 1.5, 1.0, 1.0});
    auto x4 = linear_tsr({0.0, 4.0}, 1, 2, 4);
    REQUIRE(x4 == std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0, 4.0});
}

namespace {

RasterField pattern_raster(int w, int h) {
    RasterField r;
    r.width = w;
    r.height = h;
    r.steps = 1;
    r.bounds = {0, 0, double(w), double(h)};
    r.data.resize(size_t(w) * h);
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < w; ++col)
            r.at(0, row, col) = float(std::sin(0.7 * row) + std::cos(0.4 * col));
    return r;
}

}  // namespace

TEST_CASE("ssim is 1 for identical frames and drops under distortion", "[metrics]") {
    RasterField a = pattern_raster(32, 24);
    REQUIRE_THAT(ssim(a, 0, a, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
    RasterField shifted = a;
    for (auto& v : shifted.data) v += 1.5f;
    double s = ssim(shifted, 0, a, 0);
    REQUIRE(s < 0.9);
    RasterField noisy = a;
    Rng rng(31);
    std::normal_distribution<float> noise(0.0f, 0.8f);
    for (auto& v : noisy.data) v += noise(rng);
    REQUIRE(ssim(noisy, 0, a, 0) < ssim(a, 0, a, 0));
}

TEST_CASE("ssim skips windows containing nodata", "[metrics]") {
    RasterField a = pattern_raster(32, 24);
    RasterField b = a;
    b.at(0, 12, 16) = RasterField::nodata;
    double s = ssim(b, 0, a, 0);  // remaining windows still perfect
    REQUIRE_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-12));
    RasterField tiny = pattern_raster(12, 12);
    RasterField tiny_nan = tiny;
    tiny_nan.at(0, 5, 5) = RasterField::nodata;
    REQUIRE_THROWS_AS(ssim(tiny_nan, 0, tiny, 0), pipeline_error);
}

TEST_CASE("constant identical frames score 1", "[metrics]") {
    RasterField a = pattern_raster(16, 16);
    for (auto& v : a.data) v = 3.25f;
    REQUIRE_THAT(ssim(a, 0, a, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
}
