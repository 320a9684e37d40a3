#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fieldmap/autodiff.hpp"
#include "fieldmap/dataset.hpp"
#include "fieldmap/graph.hpp"
#include "fieldmap/matrix_io.hpp"
#include "fieldmap/optim.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

struct ModelConfig {
    int hidden = 32;
    int gpe_scales = 3;       // M
    int blocks = 2;           // PNA + temporal-conv pairs
    int kernel_width = 3;     // temporal kernel, odd
    int t_sr = 1;             // temporal super-resolution factor
    int k = 8;                // graph neighbors
    int window = 16;          // training window length p
    // Edge-weight length scale in km for every graph this model touches.
    // 0 falls back to each graph's own mean pairwise distance, which lets the
    // weight scale drift between the training and inference graphs.
    double distance_scale = 0.0;
    double dropout = 0.05;
    double gamma = 1.0;       // Huber threshold in normalized units
    double eps_std = 1e-8;
    bool use_pna = true;      // ablation: false = single mean aggregator, identity scaler
    bool use_gpe = true;      // ablation: false = drop positional encoding

    int gpe_dim() const { return 4 * gpe_scales; }
    int input_channels() const { return use_gpe ? 1 + gpe_dim() : 1; }
    int pna_input(int block) const { return block == 0 ? input_channels() : hidden; }
    int pna_expanded(int block) const {
        return use_pna ? 18 * pna_input(block) : pna_input(block);
    }

    void validate() const {
        if (hidden < 1) throw config_error("model: hidden must be >= 1");
        if (gpe_scales < 1) throw config_error("model: gpe_scales must be >= 1");
        if (blocks < 1) throw config_error("model: blocks must be >= 1");
        if (kernel_width < 1 || kernel_width % 2 == 0)
            throw config_error("model: kernel_width must be odd and >= 1");
        if (t_sr < 1) throw config_error("model: t_sr must be >= 1");
        if (k < 1) throw config_error("model: k must be >= 1");
        if (window < 2) throw config_error("model: window must be >= 2");
        if (distance_scale < 0.0) throw config_error("model: distance_scale must be >= 0");
        if (dropout < 0.0 || dropout >= 1.0) throw config_error("model: dropout must be in [0,1)");
        if (gamma <= 0.0) throw config_error("model: gamma must be > 0");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["hidden"] = hidden;
        j["gpe_scales"] = gpe_scales;
        j["blocks"] = blocks;
        j["kernel_width"] = kernel_width;
        j["t_sr"] = t_sr;
        j["k"] = k;
        j["window"] = window;
        j["distance_scale"] = distance_scale;
        j["dropout"] = dropout;
        j["gamma"] = gamma;
        j["eps_std"] = eps_std;
        j["use_pna"] = use_pna;
        j["use_gpe"] = use_gpe;
        return j;
    }
    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.hidden = j.value("hidden", c.hidden);
        c.gpe_scales = j.value("gpe_scales", c.gpe_scales);
        c.blocks = j.value("blocks", c.blocks);
        c.kernel_width = j.value("kernel_width", c.kernel_width);
        c.t_sr = j.value("t_sr", c.t_sr);
        c.k = j.value("k", c.k);
        c.window = j.value("window", c.window);
        c.distance_scale = j.value("distance_scale", c.distance_scale);
        c.dropout = j.value("dropout", c.dropout);
        c.gamma = j.value("gamma", c.gamma);
        c.eps_std = j.value("eps_std", c.eps_std);
        c.use_pna = j.value("use_pna", c.use_pna);
        c.use_gpe = j.value("use_gpe", c.use_gpe);
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Geographical positional encoding
// ---------------------------------------------------------------------------

// Pre-projection features: coordinates shifted to the centroid, scaled so the
// largest |delta| per axis is 1, then sinusoids at scales 1/2^{m-1}. Layout
// per scale: [cos x, sin x, cos y, sin y].
inline Tensor gpe_features(const std::vector<Vec2>& positions, int scales) {
    const size_t n = positions.size();
    if (n == 0) throw pipeline_error("gpe_features: empty network");
    double mx = 0.0, my = 0.0;
    for (const auto& p : positions) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double ex = 0.0, ey = 0.0;
    for (const auto& p : positions) {
        ex = std::max(ex, std::fabs(p.x - mx));
        ey = std::max(ey, std::fabs(p.y - my));
    }
    Tensor f({n, static_cast<size_t>(4 * scales)});
    for (size_t i = 0; i < n; ++i) {
        double x = ex > 0.0 ? (positions[i].x - mx) / ex : 0.0;
        double y = ey > 0.0 ? (positions[i].y - my) / ey : 0.0;
        for (int m = 0; m < scales; ++m) {
            double s = std::ldexp(1.0, -m);  // 1 / 2^{m}
            f.at(i, 4 * m + 0) = std::cos(x * s);
            f.at(i, 4 * m + 1) = std::sin(x * s);
            f.at(i, 4 * m + 2) = std::cos(y * s);
            f.at(i, 4 * m + 3) = std::sin(y * s);
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Per-adjacency constants used by PNA layers
// ---------------------------------------------------------------------------

struct GraphFeatures {
    std::shared_ptr<ad::PnaContext> ctx;
    std::vector<double> s_amp;  // log(weighted degree + 1) / eta
    std::vector<double> s_att;  // inverse of the clamped amplifier
};

inline GraphFeatures make_graph_features(const AdjacencyMatrix& a, double eta_km,
                                         double eps_std) {
    if (eta_km <= 0.0) throw pipeline_error("make_graph_features: eta must be > 0");
    const size_t n = a.n;
    auto ctx = std::make_shared<ad::PnaContext>();
    ctx->eps = eps_std;
    ctx->neighbors.resize(n);
    ctx->dmean.assign(n, 0.0);
    ctx->dstd.assign(n, 0.0);
    GraphFeatures gf;
    gf.s_amp.assign(n, 1.0);
    gf.s_att.assign(n, 1.0);
    for (size_t i = 0; i < n; ++i) {
        auto& nb = ctx->neighbors[i];
        for (size_t j = 0; j < n; ++j)
            if (a.at(i, j) > 0.0) nb.push_back(static_cast<int>(j));
        if (nb.empty()) continue;  // isolated: zero aggregates, identity scalers
        double in_sum = 0.0, out_sum = 0.0, out_sq = 0.0;
        for (int j : nb) {
            in_sum += a.at(static_cast<size_t>(j), i);
            double w = a.at(i, static_cast<size_t>(j));
            out_sum += w;
            out_sq += w * w;
        }
        double inv = 1.0 / static_cast<double>(nb.size());
        ctx->dmean[i] = in_sum * inv;
        double var = out_sq * inv - (out_sum * inv) * (out_sum * inv);
        ctx->dstd[i] = std::sqrt(std::max(var, 0.0) + eps_std);
        double amp = std::log(out_sum + 1.0) / eta_km;
        gf.s_amp[i] = amp;
        gf.s_att[i] = 1.0 / std::max(amp, 1e-3);
    }
    gf.ctx = std::move(ctx);
    return gf;
}

struct ForwardContext {
    size_t n = 0;
    GraphFeatures first;  // layer-1 adjacency (original-to-original)
    GraphFeatures sub;    // deeper layers (all sensors)
    Tensor gpe_pre;       // (n, 4M) pre-projection features; empty when GPE is off
};

inline ForwardContext make_forward_context(const SensorNetwork& network, const SensorGraph& graph,
                                           const ModelConfig& cfg) {
    if (graph.a_sub.n != network.sensors.size())
        throw pipeline_error("make_forward_context: graph does not match network");
    ForwardContext fc;
    fc.n = network.sensors.size();
    fc.first = make_graph_features(graph.a_first, graph.eta_km, cfg.eps_std);
    fc.sub = make_graph_features(graph.a_sub, graph.eta_km, cfg.eps_std);
    if (cfg.use_gpe) fc.gpe_pre = gpe_features(network.positions(), cfg.gpe_scales);
    return fc;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Model {
    ModelConfig cfg;
    double norm_mean = 0.0;  // z-normalization constants, set by training
    double norm_std = 1.0;

    ad::NodePtr gpe_w, gpe_b;
    std::vector<ad::NodePtr> pna_w, pna_b;
    std::vector<ad::NodePtr> tc_wv, tc_bv, tc_wg, tc_bg;
    ad::NodePtr out_w, out_b;

    static Model init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        Rng rng(seed);
        auto uniform_init = [&](size_t rows, size_t cols, size_t fan_in) {
            double a = std::sqrt(1.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-a, a);
            Tensor t({rows, cols});
            for (double& v : t.data) v = dist(rng);
            return ad::param(std::move(t));
        };
        auto zeros_param = [&](size_t len) { return ad::param(Tensor({len})); };

        size_t g = static_cast<size_t>(cfg.gpe_dim());
        if (cfg.use_gpe) {
            m.gpe_w = uniform_init(g, g, g);
            m.gpe_b = zeros_param(g);
        }
        size_t h = static_cast<size_t>(cfg.hidden);
        size_t w = static_cast<size_t>(cfg.kernel_width);
        for (int b = 0; b < cfg.blocks; ++b) {
            size_t zin = static_cast<size_t>(cfg.pna_expanded(b));
            m.pna_w.push_back(uniform_init(zin, h, zin));
            m.pna_b.push_back(zeros_param(h));
            size_t cout = h * (b == cfg.blocks - 1 ? static_cast<size_t>(cfg.t_sr) : 1);
            m.tc_wv.push_back(uniform_init(w * h, cout, w * h));
            m.tc_bv.push_back(zeros_param(cout));
            m.tc_wg.push_back(uniform_init(w * h, cout, w * h));
            ad::NodePtr gate_bias = zeros_param(cout);
            if (b == cfg.blocks - 1)
                std::fill(gate_bias->value.data.begin(), gate_bias->value.data.end(), 1.0);
            m.tc_bg.push_back(std::move(gate_bias));
        }
        m.out_w = uniform_init(h, 1, h);
        m.out_b = zeros_param(1);
        return m;
    }

    std::vector<std::pair<std::string, ad::NodePtr>> named_parameters() const {
        std::vector<std::pair<std::string, ad::NodePtr>> out;
        if (cfg.use_gpe) {
            out.emplace_back("gpe_w", gpe_w);
            out.emplace_back("gpe_b", gpe_b);
        }
        for (int b = 0; b < cfg.blocks; ++b) {
            std::string tag = std::to_string(b);
            out.emplace_back("pna" + tag + "_w", pna_w[b]);
            out.emplace_back("pna" + tag + "_b", pna_b[b]);
            out.emplace_back("tc" + tag + "_wv", tc_wv[b]);
            out.emplace_back("tc" + tag + "_bv", tc_bv[b]);
            out.emplace_back("tc" + tag + "_wg", tc_wg[b]);
            out.emplace_back("tc" + tag + "_bg", tc_bg[b]);
        }
        out.emplace_back("out_w", out_w);
        out.emplace_back("out_b", out_b);
        return out;
    }
    std::vector<ad::NodePtr> parameters() const {
        std::vector<ad::NodePtr> out;
        for (auto& [name, p] : named_parameters()) out.push_back(p);
        return out;
    }

    // x0: (n, p) input values with masked/virtual rows zeroed, already
    // normalized. Returns (n, p * t_sr) predictions in normalized units.
    // dropout_rng enables train-time dropout; null disables it.
    ad::NodePtr forward(const Tensor& x0, const ForwardContext& fc, Rng* dropout_rng) const {
        if (x0.rows() != fc.n) throw pipeline_error("forward: input rows do not match context");
        size_t p = x0.cols();
        size_t h = static_cast<size_t>(cfg.hidden);
        ad::NodePtr x = ad::constant(x0);
        size_t z = 1;
        if (cfg.use_gpe) {
            ad::NodePtr pre = ad::constant(fc.gpe_pre);
            ad::NodePtr enc = ad::add_rowvec(ad::matmul(pre, gpe_w), gpe_b);
            x = ad::concat_channels({x, ad::repeat_time(enc, p)}, p);
            z = 1 + static_cast<size_t>(cfg.gpe_dim());
        }
        for (int b = 0; b < cfg.blocks; ++b) {
            const GraphFeatures& gf = b == 0 ? fc.first : fc.sub;
            ad::NodePtr s;
            if (cfg.use_pna) {
                ad::NodePtr agg = ad::pna_aggregate(x, gf.ctx, p, z);
                s = ad::concat_channels(
                    {agg, ad::scale_rows(agg, gf.s_att), ad::scale_rows(agg, gf.s_amp)}, p);
            } else {
                s = ad::mean_aggregate(x, gf.ctx, p, z);
            }
            x = ad::relu(ad::add_bias_time(ad::linear_time(s, pna_w[b], p), pna_b[b], p));
            if (dropout_rng && cfg.dropout > 0.0) x = ad::dropout(x, cfg.dropout, *dropout_rng);
            ad::NodePtr cols = ad::im2col_time(x, p, h, static_cast<size_t>(cfg.kernel_width));
            ad::NodePtr val = ad::add_bias_time(ad::linear_time(cols, tc_wv[b], p), tc_bv[b], p);
            ad::NodePtr gate = ad::add_bias_time(ad::linear_time(cols, tc_wg[b], p), tc_bg[b], p);
            x = ad::glu(val, gate);
            z = h;
            if (b == cfg.blocks - 1 && cfg.t_sr > 1) {
                // Channel blocks become subframes: (n, p*(t_sr*h)) and
                // (n, (p*t_sr)*h) share the same memory layout.
                p *= static_cast<size_t>(cfg.t_sr);
            }
        }
        return ad::add_bias_time(ad::linear_time(x, out_w, p), out_b, p);
    }

    // -----------------------------------------------------------------------
    // Checkpointing: manifest.json plus one matrix directory per tensor.
    // -----------------------------------------------------------------------

    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        nlohmann::ordered_json manifest;
        manifest["format"] = "fieldmap-checkpoint-v1";
        manifest["config"] = cfg.to_json();
        manifest["normalization"] = {{"mean", norm_mean}, {"std", norm_std}};
        nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
        for (auto& [name, node] : named_parameters()) {
            std::vector<float> f(node->value.size());
            for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(node->value.data[i]);
            std::vector<size_t> shape = node->value.shape;
            save_matrix(dir / name, shape, f);
            nlohmann::ordered_json entry;
            entry["name"] = name;
            entry["shape"] = shape;
            tensors.push_back(entry);
        }
        manifest["tensors"] = std::move(tensors);
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    }

    static Model load(const std::filesystem::path& dir) {
        nlohmann::json manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
        if (manifest.value("format", "") != "fieldmap-checkpoint-v1")
            throw config_error("unrecognized checkpoint format in " + dir.string());
        Model m = Model::init(ModelConfig::from_json(manifest.at("config")), 0);
        m.norm_mean = manifest.at("normalization").at("mean").get<double>();
        m.norm_std = manifest.at("normalization").at("std").get<double>();
        for (auto& [name, node] : m.named_parameters()) {
            LoadedMatrix lm = load_matrix(dir / name);
            if (lm.shape != node->value.shape)
                throw config_error("checkpoint tensor " + name + " has unexpected shape");
            for (size_t i = 0; i < lm.data.size(); ++i)
                node->value.data[i] = static_cast<double>(lm.data[i]);
        }
        return m;
    }
};

}  // namespace fieldmap
