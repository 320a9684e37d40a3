#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fieldmap/dataset.hpp"
#include "fieldmap/densify.hpp"
#include "fieldmap/graph.hpp"
#include "fieldmap/interpolate.hpp"
#include "fieldmap/metrics.hpp"
#include "fieldmap/model.hpp"
#include "fieldmap/training.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

// ---------------------------------------------------------------------------
// Benchmark driver: synthetic dataset -> densify -> train -> evaluate against
// the classical baselines, writing checkpoints, logs, and report.json. All
// randomness is seeded; artifacts carry no timestamps, so two runs with the
// same config are byte-identical.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    SynthConfig synth;
    ModelConfig model;          // t_sr is forced to 1 for the main model
    TrainConfig train;
    DensifyConfig densify;
    RbfConfig rbf;

    double unknown_fraction = 0.5;   // sensors held out of training entirely
    double train_alpha = 0.3;        // per-epoch masking rate during training
    std::vector<double> eval_alphas = {0.2, 0.4, 0.5};
    std::vector<int> sr_rates = {2, 4};
    std::vector<double> ssim_deltas = {0.0, 0.2, 0.4};
    double ssim_alpha = 0.3;         // sensors hidden for the heatmap experiment
    double ablation_alpha = 0.3;
    int knn_k = 5;
    int tsr_epochs = 0;              // 0: inherit train.epochs
    int ablation_epochs = 0;         // 0: inherit train.epochs
    bool run_imputation = true;
    bool run_tsr = true;
    bool run_ssim = true;
    bool run_ablations = true;
    uint64_t eval_seed = 7;

    void validate() const {
        model.validate();
        train.validate();
        if (unknown_fraction <= 0.0 || unknown_fraction >= 1.0)
            throw config_error("experiment: unknown_fraction must be in (0,1)");
        if (train_alpha <= 0.0 || train_alpha >= 1.0)
            throw config_error("experiment: train_alpha must be in (0,1)");
        for (double a : eval_alphas)
            if (a <= 0.0 || a > unknown_fraction + 1e-12)
                throw config_error("experiment: eval alphas must be in (0, unknown_fraction]");
        for (int r : sr_rates)
            if (r < 2) throw config_error("experiment: super-resolution rates must be >= 2");
        if (knn_k < 1) throw config_error("experiment: knn_k must be >= 1");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["synth"] = {{"n_sensors", synth.n_sensors}, {"n_steps", synth.n_steps},
                      {"seed", synth.seed},           {"n_bumps", synth.n_bumps},
                      {"bump_sigma_min", synth.bump_sigma_min},
                      {"bump_sigma_max", synth.bump_sigma_max},
                      {"bump_amp_min", synth.bump_amp_min},
                      {"bump_amp_max", synth.bump_amp_max},
                      {"drift_radius_min", synth.drift_radius_min},
                      {"drift_radius_max", synth.drift_radius_max},
                      {"drift_period_min", synth.drift_period_min},
                      {"drift_period_max", synth.drift_period_max},
                      {"amp_period_min", synth.amp_period_min},
                      {"amp_period_max", synth.amp_period_max},
                      {"amp_mod", synth.amp_mod},
                      {"n_broad", synth.n_broad},
                      {"broad_sigma_min", synth.broad_sigma_min},
                      {"broad_sigma_max", synth.broad_sigma_max},
                      {"broad_amp_min", synth.broad_amp_min},
                      {"broad_amp_max", synth.broad_amp_max},
                      {"broad_period_min", synth.broad_period_min},
                      {"broad_period_max", synth.broad_period_max},
                      {"broad_amp_mod", synth.broad_amp_mod},
                      {"cluster_bias", synth.cluster_bias}, {"n_clusters", synth.n_clusters},
                      {"base_level", synth.base_level},     {"trend_amp", synth.trend_amp},
                      {"noise_std", synth.noise_std},       {"truth_width", synth.truth_width}};
        j["model"] = model.to_json();
        j["train"] = {{"epochs", train.epochs},       {"seed", train.seed},
                      {"lr", train.adam.lr},          {"log_every", train.log_every},
                      {"patience", train.patience},   {"alpha_lo", train.alpha_lo},
                      {"alpha_hi", train.alpha_hi},
                      {"virtual_keep_min", train.virtual_keep_min}};
        j["densify"] = {{"delta", densify.delta},     {"lambda", densify.lambda},
                        {"theta", densify.theta},     {"iterations", densify.iterations},
                        {"resolution", densify.resolution}, {"seed", densify.seed}};
        j["rbf"] = {{"epsilon", rbf.epsilon},
                    {"lambda_smooth", rbf.lambda_smooth},
                    {"n_neighbors", rbf.n_neighbors},
                    {"poly_degree", rbf.poly_degree}};
        j["unknown_fraction"] = unknown_fraction;
        j["train_alpha"] = train_alpha;
        j["eval_alphas"] = eval_alphas;
        j["sr_rates"] = sr_rates;
        j["ssim_deltas"] = ssim_deltas;
        j["ssim_alpha"] = ssim_alpha;
        j["ablation_alpha"] = ablation_alpha;
        j["knn_k"] = knn_k;
        j["tsr_epochs"] = tsr_epochs;
        j["ablation_epochs"] = ablation_epochs;
        j["run_imputation"] = run_imputation;
        j["run_tsr"] = run_tsr;
        j["run_ssim"] = run_ssim;
        j["run_ablations"] = run_ablations;
        j["eval_seed"] = eval_seed;
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            c.synth.n_sensors = s.value("n_sensors", c.synth.n_sensors);
            c.synth.n_steps = s.value("n_steps", c.synth.n_steps);
            c.synth.seed = s.value("seed", c.synth.seed);
            c.synth.n_bumps = s.value("n_bumps", c.synth.n_bumps);
            c.synth.bump_sigma_min = s.value("bump_sigma_min", c.synth.bump_sigma_min);
            c.synth.bump_sigma_max = s.value("bump_sigma_max", c.synth.bump_sigma_max);
            c.synth.bump_amp_min = s.value("bump_amp_min", c.synth.bump_amp_min);
            c.synth.bump_amp_max = s.value("bump_amp_max", c.synth.bump_amp_max);
            c.synth.drift_radius_min = s.value("drift_radius_min", c.synth.drift_radius_min);
            c.synth.drift_radius_max = s.value("drift_radius_max", c.synth.drift_radius_max);
            c.synth.drift_period_min = s.value("drift_period_min", c.synth.drift_period_min);
            c.synth.drift_period_max = s.value("drift_period_max", c.synth.drift_period_max);
            c.synth.amp_period_min = s.value("amp_period_min", c.synth.amp_period_min);
            c.synth.amp_period_max = s.value("amp_period_max", c.synth.amp_period_max);
            c.synth.amp_mod = s.value("amp_mod", c.synth.amp_mod);
            c.synth.n_broad = s.value("n_broad", c.synth.n_broad);
            c.synth.broad_sigma_min = s.value("broad_sigma_min", c.synth.broad_sigma_min);
            c.synth.broad_sigma_max = s.value("broad_sigma_max", c.synth.broad_sigma_max);
            c.synth.broad_amp_min = s.value("broad_amp_min", c.synth.broad_amp_min);
            c.synth.broad_amp_max = s.value("broad_amp_max", c.synth.broad_amp_max);
            c.synth.broad_period_min = s.value("broad_period_min", c.synth.broad_period_min);
            c.synth.broad_period_max = s.value("broad_period_max", c.synth.broad_period_max);
            c.synth.broad_amp_mod = s.value("broad_amp_mod", c.synth.broad_amp_mod);
            c.synth.cluster_bias = s.value("cluster_bias", c.synth.cluster_bias);
            c.synth.n_clusters = s.value("n_clusters", c.synth.n_clusters);
            c.synth.base_level = s.value("base_level", c.synth.base_level);
            c.synth.trend_amp = s.value("trend_amp", c.synth.trend_amp);
            c.synth.noise_std = s.value("noise_std", c.synth.noise_std);
            c.synth.truth_width = s.value("truth_width", c.synth.truth_width);
        }
        if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
        if (j.contains("train")) {
            const auto& t = j.at("train");
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.seed = t.value("seed", c.train.seed);
            c.train.adam.lr = t.value("lr", c.train.adam.lr);
            c.train.log_every = t.value("log_every", c.train.log_every);
            c.train.patience = t.value("patience", c.train.patience);
            c.train.alpha_lo = t.value("alpha_lo", c.train.alpha_lo);
            c.train.alpha_hi = t.value("alpha_hi", c.train.alpha_hi);
            c.train.virtual_keep_min = t.value("virtual_keep_min", c.train.virtual_keep_min);
        }
        if (j.contains("densify")) {
            const auto& d = j.at("densify");
            c.densify.delta = d.value("delta", c.densify.delta);
            c.densify.lambda = d.value("lambda", c.densify.lambda);
            c.densify.theta = d.value("theta", c.densify.theta);
            c.densify.iterations = d.value("iterations", c.densify.iterations);
            c.densify.resolution = d.value("resolution", c.densify.resolution);
            c.densify.seed = d.value("seed", c.densify.seed);
        }
        if (j.contains("rbf")) {
            const auto& r = j.at("rbf");
            c.rbf.epsilon = r.value("epsilon", c.rbf.epsilon);
            c.rbf.lambda_smooth = r.value("lambda_smooth", c.rbf.lambda_smooth);
            c.rbf.n_neighbors = r.value("n_neighbors", c.rbf.n_neighbors);
            c.rbf.poly_degree = r.value("poly_degree", c.rbf.poly_degree);
        }
        c.unknown_fraction = j.value("unknown_fraction", c.unknown_fraction);
        c.train_alpha = j.value("train_alpha", c.train_alpha);
        c.eval_alphas = j.value("eval_alphas", c.eval_alphas);
        c.sr_rates = j.value("sr_rates", c.sr_rates);
        c.ssim_deltas = j.value("ssim_deltas", c.ssim_deltas);
        c.ssim_alpha = j.value("ssim_alpha", c.ssim_alpha);
        c.ablation_alpha = j.value("ablation_alpha", c.ablation_alpha);
        c.knn_k = j.value("knn_k", c.knn_k);
        c.tsr_epochs = j.value("tsr_epochs", c.tsr_epochs);
        c.ablation_epochs = j.value("ablation_epochs", c.ablation_epochs);
        c.run_imputation = j.value("run_imputation", c.run_imputation);
        c.run_tsr = j.value("run_tsr", c.run_tsr);
        c.run_ssim = j.value("run_ssim", c.run_ssim);
        c.run_ablations = j.value("run_ablations", c.run_ablations);
        c.eval_seed = j.value("eval_seed", c.eval_seed);
        c.validate();
        return c;
    }
};

namespace detail {

inline nlohmann::ordered_json stats_json(const ErrorStats& s) {
    return {{"rmse", s.rmse}, {"mae", s.mae}, {"count", s.count}};
}

// Draws `count` evaluation sensors out of the held-out pool. The pool is what
// keeps evaluation inductive: these rows never entered a training assembly.
inline std::vector<size_t> draw_masked(const std::vector<size_t>& pool, size_t count,
                                       uint64_t seed) {
    std::vector<size_t> p = pool;
    Rng rng(seed);
    std::shuffle(p.begin(), p.end(), rng);
    count = std::min(count, p.size());
    p.resize(count);
    std::sort(p.begin(), p.end());
    if (p.empty()) throw pipeline_error("evaluation: empty masked set");
    return p;
}

inline ErrorStats score_predictions(const std::vector<double>& pred,
                                    const ObservationSeries& obs,
                                    const std::vector<size_t>& rows) {
    std::vector<double> ph, th;
    for (size_t ri = 0; ri < rows.size(); ++ri)
        for (size_t t = 0; t < obs.t; ++t) {
            if (!obs.observed(rows[ri], t)) continue;
            ph.push_back(pred[ri * obs.t + t]);
            th.push_back(obs.value(rows[ri], t));
        }
    return error_stats(ph, th);
}

}  // namespace detail

inline nlohmann::ordered_json run_experiment(const ExperimentConfig& cfg,
                                             const std::filesystem::path& outdir,
                                             std::ostream* progress = nullptr) {
    cfg.validate();
    std::filesystem::create_directories(outdir);
    auto say = [&](const std::string& msg) {
        if (progress) (*progress) << "[eval] " << msg << "\n" << std::flush;
    };
    // Wall-clock numbers go to their own file: report.json must stay
    // byte-identical across reruns of the same config.
    nlohmann::ordered_json timing;
    auto clock_now = [] { return std::chrono::steady_clock::now(); };
    auto seconds_since = [](std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto t_run = clock_now();

    ModelConfig mc_main = cfg.model;
    mc_main.t_sr = 1;

    say("generating synthetic dataset");
    SyntheticDataset ds = synthesize(cfg.synth);
    say(strprintf("densifying network (delta=%.2f)", cfg.densify.delta));
    DensifyResult dens = densify(ds.network, ds.observations, cfg.densify);
    const ObservationSeries& obs = dens.observations;

    SplitSpec split = make_split(obs, cfg.unknown_fraction, cfg.train_alpha, mc_main.window,
                                 detail::mix_seed(cfg.eval_seed, 0x5197));
    std::vector<size_t> eligible = split.known;
    eligible.insert(eligible.end(), split.unknown.begin(), split.unknown.end());
    std::sort(eligible.begin(), eligible.end());

    SensorGraph graph_full = build_graph(dens.network, mc_main.k, mc_main.distance_scale);
    ForwardContext fc_full = make_forward_context(dens.network, graph_full, mc_main);

    nlohmann::ordered_json rep;
    rep["dataset"] = {{"sensors", ds.network.sensors.size()},
                      {"virtual", dens.network.sensors.size() - ds.network.sensors.size()},
                      {"steps", obs.t},
                      {"known", split.known.size()},
                      {"unknown", split.unknown.size()},
                      {"train_steps", split.train_steps}};

    say(strprintf("training main model (%d epochs)", cfg.train.epochs));
    Model model = Model::init(mc_main, detail::mix_seed(cfg.train.seed, 0xc0de));
    TrainResult tr_main;
    {
        auto t0 = clock_now();
        std::ofstream log(outdir / "train_main.jsonl");
        tr_main = train(model, dens.network, obs, split, cfg.train, &log);
        timing["train_main_s"] = seconds_since(t0);
    }
    model.save(outdir / "model_main");
    rep["training"] = {{"epochs_run", tr_main.epochs_run},
                       {"final_loss", tr_main.loss.empty() ? 0.0 : tr_main.loss.back()},
                       {"final_val_rmse",
                        tr_main.val_rmse.empty() ? 0.0 : tr_main.val_rmse.back()}};

    // --- masked-sensor imputation vs k-nearest-neighbor averaging -----------
    if (cfg.run_imputation) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (size_t ai = 0; ai < cfg.eval_alphas.size(); ++ai) {
            double alpha = cfg.eval_alphas[ai];
            size_t want = static_cast<size_t>(alpha * static_cast<double>(eligible.size()));
            std::vector<size_t> masked = detail::draw_masked(
                split.unknown, want, detail::mix_seed(cfg.eval_seed, 0xa000 + ai));
            say(strprintf("imputation eval alpha=%.2f (%zu masked)", alpha, masked.size()));
            ErrorStats ms = evaluate_imputation(model, fc_full, obs, masked);

            std::vector<size_t> visible;
            for (size_t i : eligible)
                if (!std::binary_search(masked.begin(), masked.end(), i)) visible.push_back(i);
            std::vector<double> knn = knn_impute(dens.network, obs, visible, masked, cfg.knn_k);
            ErrorStats ks = detail::score_predictions(knn, obs, masked);

            rows.push_back({{"alpha", alpha},
                            {"masked", masked.size()},
                            {"model", detail::stats_json(ms)},
                            {"knn", detail::stats_json(ks)}});
        }
        rep["imputation"] = rows;
    }

    // --- temporal super-resolution vs linear interpolation -------------------
    if (cfg.run_tsr) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int rate : cfg.sr_rates) {
            ModelConfig mc = cfg.model;
            mc.t_sr = rate;
            TrainConfig tc = cfg.train;
            if (cfg.tsr_epochs > 0) tc.epochs = cfg.tsr_epochs;
            say(strprintf("training x%d super-resolution model (%d epochs)", rate, tc.epochs));
            Model mtsr = Model::init(mc, detail::mix_seed(tc.seed, 0x5a00 + rate));
            TrainResult tr;
            {
                auto t0 = clock_now();
                std::ofstream log(outdir / strprintf("train_tsr%d.jsonl", rate));
                tr = train(mtsr, dens.network, obs, split, tc, &log);
                timing[strprintf("train_tsr%d_s", rate)] = seconds_since(t0);
            }
            mtsr.save(outdir / strprintf("model_tsr%d", rate));

            size_t t_coarse = obs.t / static_cast<size_t>(rate);
            ObservationSeries coarse = ObservationSeries::zeros(obs.n, t_coarse);
            coarse.time_step = obs.time_step * rate;
            coarse.t0_epoch = obs.t0_epoch;
            std::vector<double> coarse_vals(obs.n * t_coarse, 0.0);
            for (size_t i = 0; i < obs.n; ++i)
                for (size_t t = 0; t < t_coarse; ++t) {
                    if (!obs.observed(i, t * rate)) continue;
                    coarse.set(i, t, obs.value(i, t * rate), true);
                    coarse_vals[i * t_coarse + t] = obs.value(i, t * rate);
                }
            Tensor pred = tsr_infer(mtsr, fc_full, coarse);
            std::vector<double> lin = linear_tsr(coarse_vals, obs.n, t_coarse, rate);

            // Score the frames the coarse series dropped; the run-out past the
            // last kept frame is extrapolation for both methods, so skip it.
            size_t fine_end = (t_coarse - 1) * static_cast<size_t>(rate);
            std::vector<double> mp, lp, th;
            for (size_t i : eligible)
                for (size_t f = 0; f < fine_end; ++f) {
                    if (f % static_cast<size_t>(rate) == 0) continue;
                    if (!obs.observed(i, f)) continue;
                    mp.push_back(pred.data[i * pred.cols() + f]);
                    lp.push_back(lin[i * t_coarse * rate + f]);
                    th.push_back(obs.value(i, f));
                }
            rows.push_back({{"rate", rate},
                            {"epochs_run", tr.epochs_run},
                            {"model", detail::stats_json(error_stats(mp, th))},
                            {"linear", detail::stats_json(error_stats(lp, th))}});
        }
        rep["tsr"] = rows;
    }

    // --- heatmap fidelity as densification grows ----------------------------
    if (cfg.run_ssim) {
        size_t want = static_cast<size_t>(cfg.ssim_alpha * static_cast<double>(eligible.size()));
        std::vector<size_t> masked =
            detail::draw_masked(split.unknown, want, detail::mix_seed(cfg.eval_seed, 0x55ab));
        std::vector<size_t> vis;
        for (size_t i : eligible)
            if (!std::binary_search(masked.begin(), masked.end(), i)) vis.push_back(i);

        SensorNetwork vnet;
        vnet.boundary = ds.network.boundary;
        ObservationSeries vobs = ObservationSeries::zeros(vis.size(), obs.t);
        vobs.time_step = obs.time_step;
        vobs.t0_epoch = obs.t0_epoch;
        for (size_t ri = 0; ri < vis.size(); ++ri) {
            vnet.sensors.push_back(ds.network.sensors[vis[ri]]);
            for (size_t t = 0; t < obs.t; ++t)
                if (obs.observed(vis[ri], t)) vobs.set(ri, t, obs.value(vis[ri], t), true);
        }

        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        std::vector<std::vector<double>> series_by_delta;
        for (double delta : cfg.ssim_deltas) {
            say(strprintf("heatmap eval delta=%.2f", delta));
            std::vector<Vec2> centers;
            std::vector<double> values;
            if (delta <= 0.0) {
                for (size_t ri = 0; ri < vis.size(); ++ri) {
                    centers.push_back(vnet.sensors[ri].position());
                    for (size_t t = 0; t < obs.t; ++t) values.push_back(vobs.value(ri, t));
                }
            } else {
                DensifyConfig dc = cfg.densify;
                dc.delta = delta;
                DensifyResult dd = densify(vnet, vobs, dc);
                SensorGraph g = build_graph(dd.network, mc_main.k, mc_main.distance_scale);
                ForwardContext fc = make_forward_context(dd.network, g, mc_main);
                std::vector<uint8_t> visible(dd.network.sensors.size(), 0);
                for (size_t i = 0; i < vis.size(); ++i) visible[i] = 1;
                Tensor pred = impute_full(model, fc, dd.observations, visible);
                for (size_t i = 0; i < dd.network.sensors.size(); ++i) {
                    centers.push_back(dd.network.sensors[i].position());
                    for (size_t t = 0; t < obs.t; ++t)
                        values.push_back(i < vis.size() ? static_cast<double>(vobs.value(i, t))
                                                        : pred.data[i * obs.t + t]);
                }
            }
            RasterField field = interpolate(centers, values, obs.t, ds.network.boundary,
                                            ds.truth.width, cfg.rbf);
            std::vector<double> s(obs.t);
            double mean = 0.0;
            for (size_t t = 0; t < obs.t; ++t) {
                s[t] = ssim(field, static_cast<int>(t), ds.truth, static_cast<int>(t));
                mean += s[t];
            }
            mean /= static_cast<double>(obs.t);
            series_by_delta.push_back(std::move(s));
            rows.push_back({{"delta", delta}, {"mean_ssim", mean}});
        }
        for (size_t di = 1; di < series_by_delta.size(); ++di) {
            size_t gt = 0;
            for (size_t t = 0; t < series_by_delta[di].size(); ++t)
                if (series_by_delta[di][t] > series_by_delta[0][t]) ++gt;
            rows[di]["frac_steps_above_baseline"] =
                static_cast<double>(gt) / static_cast<double>(series_by_delta[di].size());
        }
        rep["ssim"] = {{"alpha", cfg.ssim_alpha}, {"masked", masked.size()}, {"rows", rows}};
    }

    // --- ablations ------------------------------------------------------------
    if (cfg.run_ablations) {
        size_t want =
            static_cast<size_t>(cfg.ablation_alpha * static_cast<double>(eligible.size()));
        std::vector<size_t> masked =
            detail::draw_masked(split.unknown, want, detail::mix_seed(cfg.eval_seed, 0xab1e));
        nlohmann::ordered_json ab;
        ab["alpha"] = cfg.ablation_alpha;
        ab["masked"] = masked.size();
        ab["full"] = detail::stats_json(evaluate_imputation(model, fc_full, obs, masked));
        struct Variant {
            const char* name;
            bool use_pna, use_gpe;
        };
        for (const Variant& v : {Variant{"no_pna", false, true}, Variant{"no_gpe", true, false}}) {
            ModelConfig mc = mc_main;
            mc.use_pna = v.use_pna;
            mc.use_gpe = v.use_gpe;
            TrainConfig tc = cfg.train;
            if (cfg.ablation_epochs > 0) tc.epochs = cfg.ablation_epochs;
            say(strprintf("training %s ablation (%d epochs)", v.name, tc.epochs));
            Model m = Model::init(mc, detail::mix_seed(tc.seed, 0xab00 + (v.use_pna ? 1 : 0)));
            TrainResult tr;
            {
                std::ofstream log(outdir / strprintf("train_%s.jsonl", v.name));
                tr = train(m, dens.network, obs, split, tc, &log);
            }
            m.save(outdir / strprintf("model_%s", v.name));
            ForwardContext fc = make_forward_context(dens.network, graph_full, mc);
            nlohmann::ordered_json row = detail::stats_json(evaluate_imputation(m, fc, obs, masked));
            row["epochs_run"] = tr.epochs_run;
            ab[v.name] = row;
        }
        rep["ablations"] = ab;
    }

    rep["config"] = cfg.to_json();
    write_text_file(outdir / "report.json", rep.dump(2) + "\n");
    timing["total_s"] = seconds_since(t_run);
    write_text_file(outdir / "timing.json", timing.dump(2) + "\n");
    say("report written");
    return rep;
}

}  // namespace fieldmap
