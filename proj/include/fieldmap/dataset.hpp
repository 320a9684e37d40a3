#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "fieldmap/geometry.hpp"
#include "fieldmap/raster.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

enum class SensorKind { Original, Virtual };

struct Sensor {
    std::string id;
    double lng = 0.0;
    double lat = 0.0;
    SensorKind kind = SensorKind::Original;

    Vec2 position() const { return {lng, lat}; }
};

struct SensorNetwork {
    std::vector<Sensor> sensors;
    Polygon boundary;

    size_t size() const { return sensors.size(); }
    size_t original_count() const {
        size_t n = 0;
        for (const auto& s : sensors)
            if (s.kind == SensorKind::Original) ++n;
        return n;
    }
    std::vector<Vec2> positions() const {
        std::vector<Vec2> pts;
        pts.reserve(sensors.size());
        for (const auto& s : sensors) pts.push_back(s.position());
        return pts;
    }

    void validate() const {
        std::unordered_set<std::string> seen;
        for (const auto& s : sensors) {
            if (!seen.insert(s.id).second)
                throw config_error("duplicate sensor id: " + s.id);
            if (!std::isfinite(s.lng) || !std::isfinite(s.lat))
                throw config_error("non-finite coordinate for sensor " + s.id);
            if (s.lng < -180.0 || s.lng > 180.0 || s.lat < -90.0 || s.lat > 90.0)
                throw config_error(strprintf("coordinate out of range for sensor %s: (%g, %g)",
                                             s.id.c_str(), s.lng, s.lat));
        }
        if (boundary.empty()) throw config_error("network boundary polygon is empty");
        for (const auto& s : sensors) {
            if (!boundary.contains(s.position(), 1e-7))
                throw config_error("sensor " + s.id + " lies outside the boundary polygon");
        }
    }
};

// n x t readings aligned to SensorNetwork row order. Missing entries are
// stored as 0 with mask=false; downstream metrics skip them.
struct ObservationSeries {
    size_t n = 0;
    size_t t = 0;
    std::vector<float> values;   // row-major n x t
    std::vector<uint8_t> mask;   // 1 = observed
    double time_step = 0.0;      // seconds between columns
    int64_t t0_epoch = 0;        // epoch seconds of the first column

    float value(size_t i, size_t j) const { return values[i * t + j]; }
    float& value(size_t i, size_t j) { return values[i * t + j]; }
    bool observed(size_t i, size_t j) const { return mask[i * t + j] != 0; }
    void set(size_t i, size_t j, float v, bool obs) {
        values[i * t + j] = v;
        mask[i * t + j] = obs ? 1 : 0;
    }
    static ObservationSeries zeros(size_t n_, size_t t_) {
        ObservationSeries o;
        o.n = n_;
        o.t = t_;
        o.values.assign(n_ * t_, 0.0f);
        o.mask.assign(n_ * t_, 0);
        return o;
    }
};

// ---------------------------------------------------------------------------
// ISO-8601 timestamps (UTC / naive; no timezone offsets)
// ---------------------------------------------------------------------------

namespace detail {

// Days from civil date, Howard Hinnant's algorithm.
inline int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return int64_t(era) * 146097 + int64_t(doe) - 719468;
}

inline void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yr = int64_t(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

}  // namespace detail

// Accepts YYYY-MM-DD with an optional THH:MM[:SS] part and optional Z.
inline int64_t parse_iso8601(const std::string& raw) {
    std::string s = trim(raw);
    if (!s.empty() && s.back() == 'Z') s.pop_back();
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    int fields = 0;
    if (s.size() >= 16 && (s[10] == 'T' || s[10] == ' ')) {
        fields = sscanf(s.c_str(), "%4d-%2d-%2d%*c%2d:%2d:%2d", &y, &mo, &d, &h, &mi, &sec);
        if (fields < 5) fields = 0;
    } else if (s.size() == 10) {
        fields = sscanf(s.c_str(), "%4d-%2d-%2d", &y, &mo, &d);
        if (fields != 3) fields = 0;
    }
    if (fields == 0 || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60)
        throw config_error("unparseable ISO-8601 timestamp: '" + raw + "'");
    return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + sec;
}

inline std::string format_iso8601(int64_t epoch) {
    int64_t days = epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400;
    int64_t rem = epoch - days * 86400;
    int y, m, d;
    detail::civil_from_days(days, y, m, d);
    return strprintf("%04d-%02d-%02dT%02lld:%02lld:%02lldZ", y, m, d,
                     static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                     static_cast<long long>(rem % 60));
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

inline Polygon parse_boundary_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const nlohmann::json* ring = nullptr;
    if (j.is_array()) {
        ring = &j;
    } else if (j.is_object() && j.contains("coordinates")) {
        const auto& coords = j["coordinates"];
        // GeoJSON polygon: coordinates = [ring, holes...]; take the outer ring.
        if (coords.is_array() && !coords.empty() && coords[0].is_array() && !coords[0].empty() &&
            coords[0][0].is_array()) {
            ring = &coords[0];
        } else {
            ring = &coords;
        }
    }
    if (!ring) throw config_error("boundary JSON must be a ring array or a Polygon object");
    Polygon poly;
    for (const auto& pair : *ring) {
        if (!pair.is_array() || pair.size() < 2)
            throw config_error("boundary ring entries must be [lng, lat] pairs");
        poly.ring.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    if (poly.ring.size() >= 2) {
        const Vec2& a = poly.ring.front();
        const Vec2& b = poly.ring.back();
        if (a.x == b.x && a.y == b.y) poly.ring.pop_back();  // drop explicit closure
    }
    if (poly.ring.size() < 3) throw config_error("boundary ring needs at least 3 distinct points");
    return poly;
}

// Reads sensors.csv (header id,lng,lat with optional kind column). When no
// boundary file is given the boundary defaults to the sensors' convex hull
// expanded by 2% of its diagonal.
inline SensorNetwork load_network(const std::filesystem::path& csv_path,
                                  const std::optional<std::filesystem::path>& boundary_path = {}) {
    std::vector<std::string> lines = split_lines(read_text_file(csv_path));
    if (lines.empty()) throw config_error("empty sensors file: " + csv_path.string());
    std::vector<std::string> header = split_csv_row(lines[0]);
    if (header.size() < 3 || trim(header[0]) != "id" || trim(header[1]) != "lng" ||
        trim(header[2]) != "lat")
        throw config_error("sensors CSV must start with header id,lng,lat: " + csv_path.string());
    bool has_kind = header.size() >= 4 && trim(header[3]) == "kind";

    SensorNetwork net;
    for (size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        std::vector<std::string> cells = split_csv_row(lines[li]);
        if (cells.size() < 3)
            throw config_error(strprintf("line %zu: expected id,lng,lat", li + 1));
        Sensor s;
        s.id = trim(cells[0]);
        size_t pos = 0;
        try {
            s.lng = std::stod(cells[1], &pos);
            if (trim(cells[1].substr(pos)) != "") throw std::invalid_argument("trailing");
            s.lat = std::stod(cells[2], &pos);
            if (trim(cells[2].substr(pos)) != "") throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw config_error(strprintf("line %zu: unparseable coordinate", li + 1));
        }
        if (has_kind && cells.size() >= 4) {
            std::string kind = trim(cells[3]);
            if (kind == "virtual" || kind == "Virtual")
                s.kind = SensorKind::Virtual;
            else if (kind == "original" || kind == "Original" || kind.empty())
                s.kind = SensorKind::Original;
            else
                throw config_error(strprintf("line %zu: unknown sensor kind '%s'", li + 1,
                                             kind.c_str()));
        }
        net.sensors.push_back(std::move(s));
    }
    if (net.sensors.empty()) throw config_error("sensors CSV has no rows: " + csv_path.string());

    if (boundary_path) {
        net.boundary = parse_boundary_json(read_text_file(*boundary_path));
    } else {
        net.boundary = expanded_hull_boundary(net.positions());
    }
    net.validate();
    return net;
}

// Wide CSV: one row per sensor id, columns are ISO-8601 timestamps at
// uniform spacing, empty cell = missing. Rows are aligned to the network
// order; sensors without a row come back fully masked.
inline ObservationSeries load_observations(const std::filesystem::path& csv_path,
                                           const SensorNetwork& network) {
    std::vector<std::string> lines = split_lines(read_text_file(csv_path));
    if (lines.empty()) throw config_error("empty observations file: " + csv_path.string());
    std::vector<std::string> header = split_csv_row(lines[0]);
    if (header.size() < 2 || trim(header[0]) != "id")
        throw config_error("observations CSV must start with header id,<timestamps...>");

    std::vector<int64_t> stamps;
    for (size_t c = 1; c < header.size(); ++c) stamps.push_back(parse_iso8601(header[c]));
    int64_t step = 0;
    if (stamps.size() >= 2) {
        step = stamps[1] - stamps[0];
        if (step <= 0) throw config_error("timestamps must be strictly increasing");
        for (size_t c = 2; c < stamps.size(); ++c) {
            if (stamps[c] - stamps[c - 1] != step)
                throw config_error(strprintf(
                    "non-uniform timestamp spacing at column %zu: %lld s vs %lld s", c + 1,
                    static_cast<long long>(stamps[c] - stamps[c - 1]),
                    static_cast<long long>(step)));
        }
    }

    std::unordered_map<std::string, size_t> row_of;
    for (size_t i = 0; i < network.sensors.size(); ++i) row_of[network.sensors[i].id] = i;

    ObservationSeries obs = ObservationSeries::zeros(network.sensors.size(), stamps.size());
    obs.time_step = static_cast<double>(step);
    obs.t0_epoch = stamps.empty() ? 0 : stamps[0];

    std::vector<bool> filled(network.sensors.size(), false);
    for (size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        std::vector<std::string> cells = split_csv_row(lines[li]);
        std::string id = trim(cells[0]);
        auto it = row_of.find(id);
        if (it == row_of.end())
            throw config_error(strprintf("line %zu: unknown sensor id '%s'", li + 1, id.c_str()));
        if (filled[it->second])
            throw config_error(strprintf("line %zu: duplicate row for sensor '%s'", li + 1,
                                         id.c_str()));
        filled[it->second] = true;
        if (cells.size() != stamps.size() + 1)
            throw config_error(strprintf("line %zu: expected %zu value columns, got %zu", li + 1,
                                         stamps.size(), cells.size() - 1));
        for (size_t c = 1; c < cells.size(); ++c) {
            std::string cell = trim(cells[c]);
            if (cell.empty()) continue;  // missing: stays 0 with mask=false
            size_t pos = 0;
            float v;
            try {
                v = std::stof(cell, &pos);
                if (trim(cell.substr(pos)) != "") throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw config_error(strprintf("line %zu: non-numeric cell in column %zu", li + 1,
                                             c + 1));
            }
            if (!std::isfinite(v))
                throw config_error(strprintf("line %zu: non-finite value in column %zu", li + 1,
                                             c + 1));
            obs.set(it->second, c - 1, v, true);
        }
    }
    return obs;
}

// ---------------------------------------------------------------------------
// Saving
// ---------------------------------------------------------------------------

inline void save_network(const SensorNetwork& net, const std::filesystem::path& csv_path,
                         const std::optional<std::filesystem::path>& boundary_path = {}) {
    std::string out = "id,lng,lat,kind\n";
    for (const auto& s : net.sensors) {
        out += s.id + "," + double_repr(s.lng) + "," + double_repr(s.lat) + "," +
               (s.kind == SensorKind::Virtual ? "virtual" : "original") + "\n";
    }
    write_text_file(csv_path, out);
    if (boundary_path) {
        nlohmann::ordered_json j;
        j["type"] = "Polygon";
        nlohmann::ordered_json ring = nlohmann::ordered_json::array();
        for (const auto& p : net.boundary.ring) ring.push_back({p.x, p.y});
        if (!net.boundary.ring.empty())
            ring.push_back({net.boundary.ring[0].x, net.boundary.ring[0].y});
        j["coordinates"] = nlohmann::ordered_json::array({ring});
        write_text_file(*boundary_path, j.dump(2) + "\n");
    }
}

inline void save_observations(const ObservationSeries& obs, const SensorNetwork& net,
                              const std::filesystem::path& csv_path) {
    if (obs.n != net.sensors.size())
        throw pipeline_error("save_observations: row count does not match network");
    std::string out = "id";
    for (size_t c = 0; c < obs.t; ++c)
        out += "," + format_iso8601(obs.t0_epoch + static_cast<int64_t>(c * obs.time_step));
    out += "\n";
    for (size_t i = 0; i < obs.n; ++i) {
        out += net.sensors[i].id;
        for (size_t c = 0; c < obs.t; ++c) {
            out += ",";
            if (obs.observed(i, c)) out += float_repr(obs.value(i, c));
        }
        out += "\n";
    }
    write_text_file(csv_path, out);
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generator
// ---------------------------------------------------------------------------

// Analytic field: a base level plus a gentle planar trend plus drifting
// Gaussian bumps whose centers orbit and whose amplitudes oscillate, so
// both spatial and temporal dynamics are smooth but nonlinear.
struct SynthConfig {
    int n_sensors = 100;
    int n_steps = 512;
    uint64_t seed = 42;
    double lng_min = 116.0, lat_min = 39.0, lng_max = 118.0, lat_max = 40.5;
    int n_bumps = 7;
    // Bump shape/dynamics draws (uniform ranges, domain-normalized units).
    // Broad bumps on wide drift orbits: distance-weighted averaging smears the
    // moving geography, while the bump positions stay recoverable from nearby
    // readings. Amplitudes oscillate fast enough that frame-to-frame change is
    // far from piecewise linear.
    double bump_sigma_min = 0.12, bump_sigma_max = 0.22;
    double bump_amp_min = 4.0, bump_amp_max = 8.0;
    double drift_radius_min = 0.10, drift_radius_max = 0.25;
    double drift_period_min = 32.0, drift_period_max = 64.0;
    double amp_period_min = 12.0, amp_period_max = 32.0;
    double amp_mod = 0.45;      // relative amplitude of the oscillation
    // Domain-filling bumps: so wide they read as a shared level for every
    // sensor, with amplitude cycles short enough that a coarsely sampled frame
    // sequence cannot reconstruct them by connecting the kept frames.
    int n_broad = 2;
    double broad_sigma_min = 2.2, broad_sigma_max = 3.2;
    double broad_amp_min = 12.0, broad_amp_max = 16.0;
    double broad_period_min = 9.0, broad_period_max = 14.0;
    double broad_amp_mod = 0.55;
    double cluster_bias = 0.5;  // 0 = uniform sensor placement, 1 = fully clustered
    int n_clusters = 3;
    double base_level = 10.0;
    double trend_amp = 5.0;
    double noise_std = 0.0;
    int truth_width = 96;  // truth raster width in pixels; height follows aspect
    double time_step = 3600.0;
};

struct SynthField {
    struct Bump {
        double cx, cy, rx, ry, sigma, amp, drift_period, amp_period, phase_d, phase_a;
        double amp_mod = 0.0;
    };
    SynthConfig cfg;
    std::vector<Bump> bumps;

    // u,v are domain-normalized coordinates in [0,1].
    double eval_uv(double u, double v, double step) const {
        double val = cfg.base_level + cfg.trend_amp * (0.3 * u + 0.2 * v);
        for (const auto& b : bumps) {
            double cu = b.cx + b.rx * std::cos(2.0 * M_PI * step / b.drift_period + b.phase_d);
            double cv = b.cy + b.ry * std::sin(2.0 * M_PI * step / b.drift_period + b.phase_d);
            double amp = b.amp * (1.0 + b.amp_mod * std::sin(2.0 * M_PI * step / b.amp_period +
                                                             b.phase_a));
            double du = u - cu, dv = v - cv;
            val += amp * std::exp(-(du * du + dv * dv) / (2.0 * b.sigma * b.sigma));
        }
        return val;
    }

    double eval(const Vec2& p, double step) const {
        double u = (p.x - cfg.lng_min) / (cfg.lng_max - cfg.lng_min);
        double v = (p.y - cfg.lat_min) / (cfg.lat_max - cfg.lat_min);
        return eval_uv(u, v, step);
    }
};

struct SyntheticDataset {
    SensorNetwork network;
    ObservationSeries observations;
    RasterField truth;
    SynthField field;
};

inline SyntheticDataset synthesize(const SynthConfig& cfg) {
    if (cfg.n_sensors < 10) throw config_error("synthesize: n_sensors must be >= 10");
    if (cfg.n_steps < 16) throw config_error("synthesize: n_steps must be >= 16");
    if (cfg.n_bumps < 0 || cfg.n_broad < 0)
        throw config_error("synthesize: bump counts must be >= 0");
    if (cfg.lng_max <= cfg.lng_min || cfg.lat_max <= cfg.lat_min)
        throw config_error("synthesize: zero-area domain");

    Rng rng(cfg.seed);
    auto unif = [&](double a, double b) {
        return a + (b - a) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    };

    SyntheticDataset ds;
    ds.field.cfg = cfg;
    for (int k = 0; k < cfg.n_bumps + cfg.n_broad; ++k) {
        bool broad = k >= cfg.n_bumps;
        SynthField::Bump b;
        b.cx = unif(0.2, 0.8);
        b.cy = unif(0.2, 0.8);
        b.rx = unif(cfg.drift_radius_min, cfg.drift_radius_max);
        b.ry = unif(cfg.drift_radius_min, cfg.drift_radius_max);
        b.sigma = broad ? unif(cfg.broad_sigma_min, cfg.broad_sigma_max)
                        : unif(cfg.bump_sigma_min, cfg.bump_sigma_max);
        b.amp = broad ? unif(cfg.broad_amp_min, cfg.broad_amp_max)
                      : unif(cfg.bump_amp_min, cfg.bump_amp_max);
        b.drift_period = unif(cfg.drift_period_min, cfg.drift_period_max);
        b.amp_period = broad ? unif(cfg.broad_period_min, cfg.broad_period_max)
                             : unif(cfg.amp_period_min, cfg.amp_period_max);
        b.phase_d = unif(0.0, 2.0 * M_PI);
        b.phase_a = unif(0.0, 2.0 * M_PI);
        b.amp_mod = broad ? cfg.broad_amp_mod : cfg.amp_mod;
        ds.field.bumps.push_back(b);
    }

    // Sensor placement: mixture of uniform and cluster-attracted draws so a
    // nonzero bias yields visibly dense and sparse regions.
    std::vector<Vec2> cluster_centers;
    for (int c = 0; c < cfg.n_clusters; ++c)
        cluster_centers.push_back({unif(0.2, 0.8), unif(0.2, 0.8)});
    double csigma = 0.08;
    int width_digits = static_cast<int>(std::to_string(cfg.n_sensors).size());
    for (int i = 0; i < cfg.n_sensors; ++i) {
        double u, v;
        if (unif(0.0, 1.0) < cfg.cluster_bias) {
            const Vec2& c = cluster_centers[static_cast<size_t>(
                std::min<double>(cfg.n_clusters - 1, unif(0.0, cfg.n_clusters)))];
            do {
                u = c.x + csigma * std::normal_distribution<double>(0.0, 1.0)(rng);
                v = c.y + csigma * std::normal_distribution<double>(0.0, 1.0)(rng);
            } while (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0);
        } else {
            u = unif(0.0, 1.0);
            v = unif(0.0, 1.0);
        }
        Sensor s;
        s.id = strprintf("s%0*d", width_digits, i + 1);
        s.lng = cfg.lng_min + u * (cfg.lng_max - cfg.lng_min);
        s.lat = cfg.lat_min + v * (cfg.lat_max - cfg.lat_min);
        ds.network.sensors.push_back(s);
    }
    ds.network.boundary.ring = {{cfg.lng_min, cfg.lat_min},
                                {cfg.lng_max, cfg.lat_min},
                                {cfg.lng_max, cfg.lat_max},
                                {cfg.lng_min, cfg.lat_max}};
    ds.network.validate();

    ds.observations = ObservationSeries::zeros(cfg.n_sensors, cfg.n_steps);
    ds.observations.time_step = cfg.time_step;
    ds.observations.t0_epoch = parse_iso8601("2024-01-01T00:00:00");
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < cfg.n_sensors; ++i) {
        Vec2 p = ds.network.sensors[i].position();
        for (int k = 0; k < cfg.n_steps; ++k) {
            double v = ds.field.eval(p, k);
            if (cfg.noise_std > 0) v += cfg.noise_std * noise(rng);
            ds.observations.set(i, k, static_cast<float>(v), true);
        }
    }

    double aspect = (cfg.lat_max - cfg.lat_min) / (cfg.lng_max - cfg.lng_min);
    ds.truth.width = cfg.truth_width;
    ds.truth.height = std::max(2, static_cast<int>(std::lround(cfg.truth_width * aspect)));
    ds.truth.steps = cfg.n_steps;
    ds.truth.bounds = {cfg.lng_min, cfg.lat_min, cfg.lng_max, cfg.lat_max};
    ds.truth.data.resize(static_cast<size_t>(cfg.n_steps) * ds.truth.height * ds.truth.width);
    for (int k = 0; k < cfg.n_steps; ++k)
        for (int r = 0; r < ds.truth.height; ++r)
            for (int c = 0; c < ds.truth.width; ++c)
                ds.truth.at(k, r, c) =
                    static_cast<float>(ds.field.eval(ds.truth.pixel_center(r, c), k));
    return ds;
}

}  // namespace fieldmap
