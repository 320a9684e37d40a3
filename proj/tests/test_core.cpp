// ============================================================================
// Core plumbing: string helpers, planar geometry, matrix/raster persistence,
// PNG encoding, dataset CSV/JSON formats, synthetic generator sanity.
// ============================================================================

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include <zlib.h>

#include "fieldmap/dataset.hpp"
#include "fieldmap/png.hpp"
#include "fieldmap/raster.hpp"
#include "fieldmap/util.hpp"

using namespace fieldmap;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("fieldmap_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// util
// ---------------------------------------------------------------------------

TEST_CASE("split_lines handles LF, CRLF, and missing trailing newline", "[util]") {
    auto lines = split_lines("a\r\nb\nc");
    REQUIRE(lines == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(split_lines("").empty());
    REQUIRE(split_lines("x\n") == std::vector<std::string>{"x"});
}

TEST_CASE("split_csv_row keeps empty cells", "[util]") {
    auto cells = split_csv_row("a,,c,");
    REQUIRE(cells == std::vector<std::string>{"a", "", "c", ""});
}

TEST_CASE("trim strips spaces and tabs only", "[util]") {
    REQUIRE(trim(" \tx y\t ") == "x y");
    REQUIRE(trim("   ").empty());
}

TEST_CASE("float_repr round-trips arbitrary floats", "[util]") {
    Rng rng(123);
    std::uniform_real_distribution<float> dist(-1e6f, 1e6f);
    for (int i = 0; i < 1000; ++i) {
        float v = dist(rng);
        REQUIRE(std::stof(float_repr(v)) == v);
    }
    REQUIRE(std::stof(float_repr(1.0f / 3.0f)) == 1.0f / 3.0f);
}

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

TEST_CASE("polygon containment counts edges and vertices as inside", "[geometry]") {
    Polygon square{{{0, 0}, {2, 0}, {2, 2}, {0, 2}}};
    REQUIRE(square.contains({1, 1}));
    REQUIRE(square.contains({0, 1}));     // edge
    REQUIRE(square.contains({2, 2}));     // vertex
    REQUIRE_FALSE(square.contains({2.1, 1}));
    REQUIRE_FALSE(square.contains({-0.1, -0.1}));
}

TEST_CASE("polygon area and centroid", "[geometry]") {
    Polygon square{{{0, 0}, {2, 0}, {2, 2}, {0, 2}}};
    REQUIRE_THAT(square.area(), Catch::Matchers::WithinAbs(4.0, 1e-12));
    Vec2 c = square.centroid();
    REQUIRE_THAT(c.x, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(c.y, Catch::Matchers::WithinAbs(1.0, 1e-12));

    Polygon tri{{{0, 0}, {3, 0}, {0, 3}}};
    Vec2 tc = tri.centroid();
    REQUIRE_THAT(tc.x, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(tc.y, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("convex hull drops interior points and orders CCW", "[geometry]") {
    std::vector<Vec2> pts = {{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {0.5, 0.5}};
    auto hull = convex_hull(pts);
    REQUIRE(hull.size() == 4);
    REQUIRE(Polygon{hull}.signed_area() > 0.0);  // CCW
}

TEST_CASE("expanded hull boundary contains every input point strictly", "[geometry]") {
    Rng rng(7);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<Vec2> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({dist(rng), dist(rng)});
    Polygon b = expanded_hull_boundary(pts);
    for (const auto& p : pts) REQUIRE(b.contains(p));
    // Hull vertices end up strictly interior after expansion.
    for (const auto& v : convex_hull(pts)) REQUIRE(b.contains(v, 1e-12));
}

TEST_CASE("half-plane clip cuts a square in half", "[geometry]") {
    std::vector<Vec2> square = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
    // Keep x <= 1: origin (1,0), direction +x.
    auto clipped = clip_half_plane(square, {1, 0}, {1, 0});
    REQUIRE_THAT(Polygon{clipped}.area(), Catch::Matchers::WithinAbs(2.0, 1e-12));
    for (const auto& p : clipped) REQUIRE(p.x <= 1.0 + 1e-12);
}

TEST_CASE("proper segment intersection excludes shared endpoints", "[geometry]") {
    REQUIRE(segments_properly_intersect({0, 0}, {2, 2}, {0, 2}, {2, 0}));
    REQUIRE_FALSE(segments_properly_intersect({0, 0}, {1, 1}, {1, 1}, {2, 0}));
    REQUIRE_FALSE(segments_properly_intersect({0, 0}, {1, 0}, {0, 1}, {1, 1}));
    REQUIRE_FALSE(segments_properly_intersect({0, 0}, {2, 0}, {1, 0}, {3, 0}));  // collinear
}

// ---------------------------------------------------------------------------
// matrix and raster persistence
// ---------------------------------------------------------------------------

TEST_CASE("matrix round-trip is bit exact", "[io]") {
    fs::path dir = temp_dir("matrix");
    std::vector<float> data = {1.0f, -2.5f, 3.14159f, 0.0f, 1e-38f, 7.25e37f};
    save_matrix(dir / "m", {2, 3}, data, {{"note", "x"}});
    LoadedMatrix m = load_matrix(dir / "m");
    REQUIRE(m.shape == std::vector<size_t>{2, 3});
    REQUIRE(m.data.size() == data.size());
    for (size_t i = 0; i < data.size(); ++i)
        REQUIRE(std::memcmp(&m.data[i], &data[i], sizeof(float)) == 0);
    REQUIRE(m.header.at("note") == "x");
    fs::remove_all(dir);
}

TEST_CASE("matrix loader rejects shape/payload mismatch", "[io]") {
    fs::path dir = temp_dir("matrix_bad");
    std::vector<float> data(6, 1.0f);
    save_matrix(dir / "m", {2, 3}, data);
    // Corrupt the payload length.
    std::ofstream((dir / "m" / "data.bin"), std::ios::binary | std::ios::trunc) << "abc";
    REQUIRE_THROWS_AS(load_matrix(dir / "m"), config_error);
    fs::remove_all(dir);
}

TEST_CASE("raster round-trip preserves NaN nodata and bounds", "[io]") {
    RasterField r;
    r.width = 4;
    r.height = 3;
    r.steps = 2;
    r.bounds = {10.0, 20.0, 14.0, 23.0};
    r.data.assign(size_t(4) * 3 * 2, 1.5f);
    r.at(1, 2, 3) = RasterField::nodata;
    r.at(0, 0, 0) = -9.75f;
    fs::path dir = temp_dir("raster");
    save_raster(dir / "r", r);
    RasterField s = load_raster(dir / "r");
    REQUIRE(s.width == 4);
    REQUIRE(s.height == 3);
    REQUIRE(s.steps == 2);
    REQUIRE(s.bounds.min_x == 10.0);
    REQUIRE(s.bounds.max_y == 23.0);
    REQUIRE(std::isnan(s.at(1, 2, 3)));
    REQUIRE(s.at(0, 0, 0) == -9.75f);
    fs::remove_all(dir);
}

TEST_CASE("raster pixel centers and bilinear sampling agree", "[io]") {
    RasterField r;
    r.width = 8;
    r.height = 4;
    r.steps = 1;
    r.bounds = {0.0, 0.0, 8.0, 4.0};
    r.data.resize(32);
    // Plane f(x, y) = 2x + 3y is reproduced exactly by bilinear interpolation.
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 8; ++col) {
            Vec2 p = r.pixel_center(row, col);
            r.at(0, row, col) = static_cast<float>(2.0 * p.x + 3.0 * p.y);
        }
    REQUIRE_THAT(r.sample(0, {4.0, 2.0}), Catch::Matchers::WithinAbs(2 * 4.0 + 3 * 2.0, 1e-5));
    REQUIRE_THAT(r.sample(0, {1.3, 2.7}), Catch::Matchers::WithinAbs(2 * 1.3 + 3 * 2.7, 1e-5));
    Vec2 c = r.pixel_center(0, 0);
    REQUIRE(c.x == 0.5);
    REQUIRE(c.y == 0.5);
}

// ---------------------------------------------------------------------------
// PNG + base64
// ---------------------------------------------------------------------------

TEST_CASE("base64 matches reference vectors", "[png]") {
    auto enc = [](const std::string& s) {
        return base64_encode(std::vector<uint8_t>(s.begin(), s.end()));
    };
    REQUIRE(enc("Man") == "TWFu");
    REQUIRE(enc("Ma") == "TWE=");
    REQUIRE(enc("M") == "TQ==");
    REQUIRE(enc("") == "");
    REQUIRE(enc("light work.") == "bGlnaHQgd29yay4=");
}

TEST_CASE("PNG encoder is deterministic and the payload inflates back", "[png]") {
    std::vector<uint8_t> rgba(4 * 2 * 3 * 4);
    for (size_t i = 0; i < rgba.size(); ++i) rgba[i] = static_cast<uint8_t>(i * 37 % 251);
    std::vector<uint8_t> png1 = encode_png_rgba(4, 6, rgba);
    std::vector<uint8_t> png2 = encode_png_rgba(4, 6, rgba);
    REQUIRE(png1 == png2);
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    REQUIRE(std::memcmp(png1.data(), sig, 8) == 0);

    // Locate the IDAT chunk and inflate it; scanlines are filter 0 + raw rows.
    size_t pos = 8;
    std::vector<uint8_t> idat;
    while (pos + 8 <= png1.size()) {
        uint32_t len = (png1[pos] << 24) | (png1[pos + 1] << 16) | (png1[pos + 2] << 8) |
                       png1[pos + 3];
        std::string type(png1.begin() + pos + 4, png1.begin() + pos + 8);
        if (type == "IDAT")
            idat.insert(idat.end(), png1.begin() + pos + 8, png1.begin() + pos + 8 + len);
        pos += 12 + len;
    }
    REQUIRE_FALSE(idat.empty());
    std::vector<uint8_t> raw(6 * (1 + 4 * 4));
    uLongf raw_len = raw.size();
    REQUIRE(uncompress(raw.data(), &raw_len, idat.data(), idat.size()) == Z_OK);
    REQUIRE(raw_len == raw.size());
    for (int row = 0; row < 6; ++row) {
        REQUIRE(raw[row * 17] == 0);  // filter byte
        REQUIRE(std::memcmp(&raw[row * 17 + 1], &rgba[row * 16], 16) == 0);
    }
}

// ---------------------------------------------------------------------------
// timestamps and boundary JSON
// ---------------------------------------------------------------------------

TEST_CASE("ISO-8601 parse and format round-trip", "[dataset]") {
    REQUIRE(parse_iso8601("1970-01-01T00:00:00Z") == 0);
    REQUIRE(parse_iso8601("1970-01-02") == 86400);
    REQUIRE(parse_iso8601("2024-01-01T00:00:00") == 1704067200);
    REQUIRE(parse_iso8601("2024-02-29T12:30:45Z") == 1709209845);  // leap day
    REQUIRE(format_iso8601(1709209845) == "2024-02-29T12:30:45Z");
    for (int64_t t : {int64_t(0), int64_t(951782400), int64_t(4102444799)})
        REQUIRE(parse_iso8601(format_iso8601(t)) == t);
    REQUIRE_THROWS_AS(parse_iso8601("not a date"), config_error);
    REQUIRE_THROWS_AS(parse_iso8601("2024-13-01"), config_error);
}

TEST_CASE("boundary JSON accepts raw rings and GeoJSON polygons", "[dataset]") {
    Polygon a = parse_boundary_json("[[0,0],[4,0],[4,4],[0,4]]");
    REQUIRE(a.ring.size() == 4);
    // GeoJSON-style with explicit ring closure; the closing vertex is dropped.
    Polygon b = parse_boundary_json(
        R"({"type":"Polygon","coordinates":[[[0,0],[4,0],[4,4],[0,4],[0,0]]]})");
    REQUIRE(b.ring.size() == 4);
    REQUIRE_THAT(b.area(), Catch::Matchers::WithinAbs(16.0, 1e-12));
    REQUIRE_THROWS_AS(parse_boundary_json("[[0,0],[1,1]]"), config_error);
}

// ---------------------------------------------------------------------------
// network and observation CSV formats
// ---------------------------------------------------------------------------

TEST_CASE("network and observations survive a save/load round-trip", "[dataset]") {
    fs::path dir = temp_dir("dataset_rt");
    SensorNetwork net;
    net.boundary.ring = {{116, 39}, {118, 39}, {118, 41}, {116, 41}};
    net.sensors = {{"a", 116.5, 39.5, SensorKind::Original},
                   {"b", 117.5, 40.5, SensorKind::Original},
                   {"v1", 117.0, 40.0, SensorKind::Virtual}};
    ObservationSeries obs = ObservationSeries::zeros(3, 4);
    obs.time_step = 3600.0;
    obs.t0_epoch = parse_iso8601("2024-01-01T00:00:00Z");
    obs.set(0, 0, 1.25f, true);
    obs.set(0, 1, -2.5f, true);
    obs.set(1, 2, 0.333333343f, true);
    // Row 2 (virtual) and several entries stay missing.

    save_network(net, dir / "sensors.csv", dir / "boundary.json");
    save_observations(obs, net, dir / "observations.csv");
    SensorNetwork net2 = load_network(dir / "sensors.csv", dir / "boundary.json");
    ObservationSeries obs2 = load_observations(dir / "observations.csv", net2);

    REQUIRE(net2.sensors.size() == 3);
    REQUIRE(net2.sensors[2].kind == SensorKind::Virtual);
    REQUIRE(net2.sensors[0].lng == 116.5);
    REQUIRE(net2.boundary.ring.size() == 4);
    REQUIRE(obs2.n == 3);
    REQUIRE(obs2.t == 4);
    REQUIRE(obs2.time_step == 3600.0);
    REQUIRE(obs2.t0_epoch == obs.t0_epoch);
    for (size_t i = 0; i < 3; ++i)
        for (size_t t = 0; t < 4; ++t) {
            REQUIRE(obs2.observed(i, t) == obs.observed(i, t));
            if (obs.observed(i, t)) REQUIRE(obs2.value(i, t) == obs.value(i, t));
        }
    fs::remove_all(dir);
}

TEST_CASE("network loader reports bad rows", "[dataset]") {
    fs::path dir = temp_dir("dataset_bad");
    write_text_file(dir / "dup.csv", "id,lng,lat\na,116,39\na,117,40\n");
    try {
        load_network(dir / "dup.csv");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        REQUIRE(std::string(e.what()).find("a") != std::string::npos);
    }
    write_text_file(dir / "range.csv", "id,lng,lat\na,116,39\nb,117,95\n");
    try {
        load_network(dir / "range.csv");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        REQUIRE(std::string(e.what()).find("b") != std::string::npos);
    }
    write_text_file(dir / "cols.csv", "id,lng,lat\na,116\n");
    try {
        load_network(dir / "cols.csv");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("observation loader rejects unknown ids and uneven spacing", "[dataset]") {
    fs::path dir = temp_dir("obs_bad");
    SensorNetwork net;
    net.sensors = {{"a", 116.5, 39.5, SensorKind::Original},
                   {"b", 117.5, 40.5, SensorKind::Original}};
    net.boundary = expanded_hull_boundary(net.positions());

    write_text_file(dir / "unknown.csv",
                    "id,2024-01-01T00:00:00Z,2024-01-01T01:00:00Z\na,1,3\nzz,2,4\n");
    REQUIRE_THROWS_AS(load_observations(dir / "unknown.csv", net), config_error);

    write_text_file(dir / "uneven.csv",
                    "id,2024-01-01T00:00:00Z,2024-01-01T01:00:00Z,2024-01-01T03:00:00Z\n"
                    "a,1,3,5\nb,2,4,6\n");
    REQUIRE_THROWS_AS(load_observations(dir / "uneven.csv", net), config_error);

    // Empty cells are missing entries, not errors.
    write_text_file(dir / "gaps.csv",
                    "id,2024-01-01T00:00:00Z,2024-01-01T01:00:00Z\na,1,\nb,,4\n");
    ObservationSeries obs = load_observations(dir / "gaps.csv", net);
    REQUIRE(obs.observed(0, 0));
    REQUIRE_FALSE(obs.observed(1, 0));
    REQUIRE_FALSE(obs.observed(0, 1));
    REQUIRE(obs.value(1, 1) == 4.0f);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

TEST_CASE("synthetic dataset is fully observed, in bounds, deterministic", "[dataset]") {
    SynthConfig cfg;
    cfg.n_sensors = 24;
    cfg.n_steps = 32;
    SyntheticDataset a = synthesize(cfg);
    SyntheticDataset b = synthesize(cfg);
    REQUIRE(a.network.sensors.size() == 24);
    REQUIRE(a.observations.t == 32);
    for (size_t i = 0; i < a.observations.n; ++i)
        for (size_t t = 0; t < a.observations.t; ++t) {
            REQUIRE(a.observations.observed(i, t));
            REQUIRE(a.observations.value(i, t) == b.observations.value(i, t));
        }
    for (const auto& s : a.network.sensors) {
        REQUIRE(s.kind == SensorKind::Original);
        REQUIRE(a.network.boundary.contains(s.position()));
    }
    REQUIRE(a.truth.steps == 32);
    REQUIRE(a.truth.width == cfg.truth_width);
    // Sensor readings equal the analytic field at the sensor location.
    const Sensor& s = a.network.sensors[5];
    double expect = a.field.eval(s.position(), 7.0);
    REQUIRE_THAT(a.observations.value(5, 7), Catch::Matchers::WithinAbs(expect, 1e-4));
}

TEST_CASE("synthetic truth raster matches the analytic field", "[dataset]") {
    SynthConfig cfg;
    cfg.n_sensors = 12;
    cfg.n_steps = 16;
    cfg.truth_width = 32;
    SyntheticDataset ds = synthesize(cfg);
    Vec2 p = ds.truth.pixel_center(3, 10);
    REQUIRE_THAT(ds.truth.at(5, 3, 10),
                 Catch::Matchers::WithinAbs(ds.field.eval(p, 5.0), 1e-4));
}
