// ============================================================================
// fieldmap CLI: dataset ingestion, synthetic benchmarks, network densification,
// model training, imputation, temporal super-resolution, field interpolation,
// uncertainty summaries, SVG rendering, and the evaluation harness.
//
// Exit codes: 0 success, 1 pipeline failure, 2 configuration error.
// ============================================================================

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fieldmap/dataset.hpp"
#include "fieldmap/densify.hpp"
#include "fieldmap/eval.hpp"
#include "fieldmap/graph.hpp"
#include "fieldmap/interpolate.hpp"
#include "fieldmap/metrics.hpp"
#include "fieldmap/model.hpp"
#include "fieldmap/render.hpp"
#include "fieldmap/training.hpp"
#include "fieldmap/uncertainty.hpp"
#include "fieldmap/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json load_config(const std::optional<std::string>& path) {
    if (!path) return json::object();
    return json::parse(fieldmap::read_text_file(*path));
}

struct Dataset {
    fieldmap::SensorNetwork net;
    fieldmap::ObservationSeries obs;
};

Dataset load_dataset(const fs::path& dir) {
    std::optional<fs::path> boundary;
    if (fs::exists(dir / "boundary.json")) boundary = dir / "boundary.json";
    Dataset d;
    d.net = fieldmap::load_network(dir / "sensors.csv", boundary);
    d.obs = fieldmap::load_observations(dir / "observations.csv", d.net);
    return d;
}

void save_dataset(const Dataset& d, const fs::path& dir) {
    fs::create_directories(dir);
    fieldmap::save_network(d.net, dir / "sensors.csv", dir / "boundary.json");
    fieldmap::save_observations(d.obs, d.net, dir / "observations.csv");
}

fieldmap::RasterField density_raster(const fieldmap::DensityField& d) {
    fieldmap::RasterField r;
    r.width = d.width;
    r.height = d.height;
    r.steps = 1;
    r.bounds = d.bounds;
    r.data.assign(d.values.begin(), d.values.end());
    return r;
}

fieldmap::ModelConfig model_config(const json& cfg) {
    return cfg.contains("model") ? fieldmap::ModelConfig::from_json(cfg.at("model"))
                                 : fieldmap::ModelConfig{};
}

fieldmap::TrainConfig train_config(const json& cfg) {
    fieldmap::TrainConfig t;
    if (!cfg.contains("train")) return t;
    const json& j = cfg.at("train");
    t.epochs = j.value("epochs", t.epochs);
    t.seed = j.value("seed", t.seed);
    t.adam.lr = j.value("lr", t.adam.lr);
    t.log_every = j.value("log_every", t.log_every);
    t.patience = j.value("patience", t.patience);
    t.alpha_lo = j.value("alpha_lo", t.alpha_lo);
    t.alpha_hi = j.value("alpha_hi", t.alpha_hi);
    t.virtual_keep_min = j.value("virtual_keep_min", t.virtual_keep_min);
    return t;
}

fieldmap::DensifyConfig densify_config(const json& cfg) {
    fieldmap::DensifyConfig d;
    if (!cfg.contains("densify")) return d;
    const json& j = cfg.at("densify");
    d.delta = j.value("delta", d.delta);
    d.lambda = j.value("lambda", d.lambda);
    d.theta = j.value("theta", d.theta);
    d.iterations = j.value("iterations", d.iterations);
    d.resolution = j.value("resolution", d.resolution);
    d.seed = j.value("seed", d.seed);
    return d;
}

fieldmap::RbfConfig rbf_config(const json& cfg) {
    fieldmap::RbfConfig r;
    if (!cfg.contains("rbf")) return r;
    const json& j = cfg.at("rbf");
    r.epsilon = j.value("epsilon", r.epsilon);
    r.lambda_smooth = j.value("lambda_smooth", r.lambda_smooth);
    r.n_neighbors = j.value("n_neighbors", r.n_neighbors);
    r.poly_degree = j.value("poly_degree", r.poly_degree);
    return r;
}

fieldmap::ForwardContext full_context(const fieldmap::SensorNetwork& net,
                                      const fieldmap::ModelConfig& cfg) {
    fieldmap::SensorGraph g = fieldmap::build_graph(net, cfg.k, cfg.distance_scale);
    return fieldmap::make_forward_context(net, g, cfg);
}

std::vector<uint8_t> observed_rows(const fieldmap::ObservationSeries& obs) {
    std::vector<uint8_t> vis(obs.n, 0);
    for (size_t i = 0; i < obs.n; ++i)
        for (size_t t = 0; t < obs.t; ++t)
            if (obs.observed(i, t)) {
                vis[i] = 1;
                break;
            }
    return vis;
}

void emit(const ordered_json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive sensor densification, graph-based imputation, and field rendering"};
    app.require_subcommand(1);

    // --- synth ---------------------------------------------------------------
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    struct {
        std::optional<std::string> config;
        std::string out;
        std::optional<int> sensors, steps;
        std::optional<uint64_t> seed;
    } o_synth;
    c_synth->add_option("--config", o_synth.config, "JSON config file");
    c_synth->add_option("--out", o_synth.out, "output dataset directory")->required();
    c_synth->add_option("--sensors", o_synth.sensors, "sensor count override");
    c_synth->add_option("--steps", o_synth.steps, "timestep count override");
    c_synth->add_option("--seed", o_synth.seed, "generator seed override");

    // --- ingest ----------------------------------------------------------------
    auto* c_ingest = app.add_subcommand("ingest", "validate raw CSVs into a dataset directory");
    struct {
        std::string sensors, observations, out;
        std::optional<std::string> boundary;
    } o_ingest;
    c_ingest->add_option("--sensors", o_ingest.sensors, "sensor CSV (id,lng,lat[,kind])")
        ->required();
    c_ingest->add_option("--observations", o_ingest.observations, "wide observation CSV")
        ->required();
    c_ingest->add_option("--boundary", o_ingest.boundary, "boundary polygon JSON");
    c_ingest->add_option("--out", o_ingest.out, "output dataset directory")->required();

    // --- densify -----------------------------------------------------------------
    auto* c_dens = app.add_subcommand("densify", "add virtual sensors in sparse regions");
    struct {
        std::optional<std::string> config;
        std::string data, out;
        std::optional<double> delta, lambda, theta;
        std::optional<int> iterations, resolution;
        std::optional<uint64_t> seed;
    } o_dens;
    c_dens->add_option("--config", o_dens.config, "JSON config file");
    c_dens->add_option("--data", o_dens.data, "input dataset directory")->required();
    c_dens->add_option("--out", o_dens.out, "output dataset directory")->required();
    c_dens->add_option("--delta", o_dens.delta, "virtual fraction of existing sensors");
    c_dens->add_option("--lambda", o_dens.lambda, "density inversion rate");
    c_dens->add_option("--theta", o_dens.theta, "density inversion cutoff");
    c_dens->add_option("--iterations", o_dens.iterations, "centroidal relaxation iterations");
    c_dens->add_option("--resolution", o_dens.resolution, "density grid resolution");
    c_dens->add_option("--seed", o_dens.seed, "sampling seed");

    // --- train ------------------------------------------------------------------
    auto* c_train = app.add_subcommand("train", "train an imputation model");
    struct {
        std::optional<std::string> config;
        std::string data, out;
        std::optional<int> epochs, t_sr, hidden, window, k, patience;
        std::optional<uint64_t> seed;
        std::optional<double> alpha, unknown_fraction, lr;
        bool no_pna = false, no_gpe = false;
    } o_train;
    c_train->add_option("--config", o_train.config, "JSON config file");
    c_train->add_option("--data", o_train.data, "dataset directory")->required();
    c_train->add_option("--out", o_train.out, "checkpoint directory")->required();
    c_train->add_option("--epochs", o_train.epochs, "training epochs");
    c_train->add_option("--t-sr", o_train.t_sr, "temporal super-resolution factor");
    c_train->add_option("--hidden", o_train.hidden, "hidden channels");
    c_train->add_option("--window", o_train.window, "training window length");
    c_train->add_option("--k", o_train.k, "graph neighbors");
    c_train->add_option("--patience", o_train.patience, "early-stop patience (checks)");
    c_train->add_option("--seed", o_train.seed, "training seed");
    c_train->add_option("--alpha", o_train.alpha, "per-epoch masking rate");
    c_train->add_option("--unknown-fraction", o_train.unknown_fraction,
                        "sensors held out of training");
    c_train->add_option("--lr", o_train.lr, "learning rate");
    c_train->add_flag("--no-pna", o_train.no_pna, "ablation: mean aggregation only");
    c_train->add_flag("--no-gpe", o_train.no_gpe, "ablation: drop positional encoding");

    // --- impute --------------------------------------------------------------
    auto* c_imp = app.add_subcommand("impute", "fill missing readings with a trained model");
    struct {
        std::string data, model, out;
    } o_imp;
    c_imp->add_option("--data", o_imp.data, "dataset directory")->required();
    c_imp->add_option("--model", o_imp.model, "checkpoint directory")->required();
    c_imp->add_option("--out", o_imp.out, "output directory")->required();

    // --- tsr ---------------------------------------------------------------------
    auto* c_tsr = app.add_subcommand("tsr", "upsample a coarse series in time");
    struct {
        std::string data, model, out;
    } o_tsr;
    c_tsr->add_option("--data", o_tsr.data, "coarse dataset directory")->required();
    c_tsr->add_option("--model", o_tsr.model, "checkpoint directory (t_sr >= 2)")->required();
    c_tsr->add_option("--out", o_tsr.out, "output directory")->required();

    // --- interpolate -----------------------------------------------------------
    auto* c_itp = app.add_subcommand("interpolate", "rasterize sensor series to a field");
    struct {
        std::optional<std::string> config, values;
        std::string data, out;
        int width = 256;
        std::optional<double> epsilon, lambda;
        std::optional<int> neighbors, degree;
    } o_itp;
    c_itp->add_option("--config", o_itp.config, "JSON config file");
    c_itp->add_option("--data", o_itp.data, "dataset directory")->required();
    c_itp->add_option("--values", o_itp.values, "matrix directory replacing raw observations");
    c_itp->add_option("--out", o_itp.out, "output raster directory")->required();
    c_itp->add_option("--width", o_itp.width, "raster width in pixels");
    c_itp->add_option("--epsilon", o_itp.epsilon, "kernel shape parameter");
    c_itp->add_option("--lambda", o_itp.lambda, "smoothing strength");
    c_itp->add_option("--neighbors", o_itp.neighbors, "centers per local solve");
    c_itp->add_option("--degree", o_itp.degree, "polynomial tail degree (0 or 1)");

    // --- uncertainty --------------------------------------------------------------
    auto* c_unc = app.add_subcommand("uncertainty", "glyph metrics and coverage hatching");
    struct {
        std::string data, model, out;
        int grid = 12, neighbors = 5, resolution = 256;
        std::optional<int> timestep;
        int window = 1;
        uint64_t seed = 17;
    } o_unc;
    c_unc->add_option("--data", o_unc.data, "dataset directory")->required();
    c_unc->add_option("--model", o_unc.model, "checkpoint directory")->required();
    c_unc->add_option("--out", o_unc.out, "output directory")->required();
    c_unc->add_option("--grid", o_unc.grid, "glyph grid cells per axis");
    c_unc->add_option("--neighbors", o_unc.neighbors, "neighbors for glyph width");
    c_unc->add_option("--timestep", o_unc.timestep, "timestep to summarize (default: last)");
    c_unc->add_option("--window", o_unc.window, "trailing steps averaged into deviations");
    c_unc->add_option("--resolution", o_unc.resolution, "hatch density grid resolution");
    c_unc->add_option("--seed", o_unc.seed, "half-split seed");

    // --- render ---------------------------------------------------------------
    auto* c_ren = app.add_subcommand("render", "compose a raster frame into an SVG");
    struct {
        std::string raster, data, out;
        int frame = 0;
        std::optional<std::string> glyphs;
        bool hatch = false;
        int width = 800;
        std::string colormap = "viridis", title;
        std::optional<double> vmin, vmax;
    } o_ren;
    c_ren->add_option("--raster", o_ren.raster, "raster directory")->required();
    c_ren->add_option("--data", o_ren.data, "dataset directory (boundary, sensors)")->required();
    c_ren->add_option("--out", o_ren.out, "output SVG path")->required();
    c_ren->add_option("--frame", o_ren.frame, "frame index");
    c_ren->add_option("--glyphs", o_ren.glyphs, "glyph CSV from the uncertainty step");
    c_ren->add_flag("--hatch", o_ren.hatch, "hatch low-coverage regions");
    c_ren->add_option("--width", o_ren.width, "SVG width in px");
    c_ren->add_option("--colormap", o_ren.colormap, "viridis, magma, or grays");
    c_ren->add_option("--vmin", o_ren.vmin, "color range lower bound");
    c_ren->add_option("--vmax", o_ren.vmax, "color range upper bound");
    c_ren->add_option("--title", o_ren.title, "legend caption");

    // --- eval --------------------------------------------------------------------
    auto* c_eval = app.add_subcommand("eval", "run the synthetic evaluation suite");
    struct {
        std::optional<std::string> config;
        std::string out;
        std::optional<int> epochs, tsr_epochs, ablation_epochs, sensors, steps;
        std::optional<uint64_t> seed;
        bool no_pna = false, no_gpe = false;
        bool skip_imputation = false, skip_tsr = false, skip_ssim = false,
             skip_ablations = false;
        bool quiet = false;
    } o_eval;
    c_eval->add_option("--config", o_eval.config, "JSON experiment config");
    c_eval->add_option("--out", o_eval.out, "output directory")->required();
    c_eval->add_option("--epochs", o_eval.epochs, "main training epochs");
    c_eval->add_option("--tsr-epochs", o_eval.tsr_epochs, "super-resolution training epochs");
    c_eval->add_option("--ablation-epochs", o_eval.ablation_epochs, "ablation training epochs");
    c_eval->add_option("--sensors", o_eval.sensors, "synthetic sensor count");
    c_eval->add_option("--steps", o_eval.steps, "synthetic timestep count");
    c_eval->add_option("--seed", o_eval.seed, "training seed");
    c_eval->add_flag("--no-pna", o_eval.no_pna, "main model: mean aggregation only");
    c_eval->add_flag("--no-gpe", o_eval.no_gpe, "main model: drop positional encoding");
    c_eval->add_flag("--skip-imputation", o_eval.skip_imputation, "skip masked-sensor eval");
    c_eval->add_flag("--skip-tsr", o_eval.skip_tsr, "skip super-resolution eval");
    c_eval->add_flag("--skip-ssim", o_eval.skip_ssim, "skip heatmap fidelity eval");
    c_eval->add_flag("--skip-ablations", o_eval.skip_ablations, "skip ablation runs");
    c_eval->add_flag("--quiet", o_eval.quiet, "suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*c_synth) {
            json cfg = load_config(o_synth.config);
            fieldmap::SynthConfig sc;
            if (cfg.contains("synth")) {
                fieldmap::ExperimentConfig tmp = fieldmap::ExperimentConfig::from_json(
                    json{{"synth", cfg.at("synth")}});
                sc = tmp.synth;
            }
            if (o_synth.sensors) sc.n_sensors = *o_synth.sensors;
            if (o_synth.steps) sc.n_steps = *o_synth.steps;
            if (o_synth.seed) sc.seed = *o_synth.seed;
            fieldmap::SyntheticDataset ds = fieldmap::synthesize(sc);
            save_dataset({ds.network, ds.observations}, o_synth.out);
            fieldmap::save_raster(fs::path(o_synth.out) / "truth", ds.truth);
            emit({{"sensors", ds.network.sensors.size()},
                  {"steps", ds.observations.t},
                  {"truth", (fs::path(o_synth.out) / "truth").string()}});
        } else if (*c_ingest) {
            std::optional<fs::path> boundary;
            if (o_ingest.boundary) boundary = *o_ingest.boundary;
            Dataset d;
            d.net = fieldmap::load_network(o_ingest.sensors, boundary);
            d.obs = fieldmap::load_observations(o_ingest.observations, d.net);
            save_dataset(d, o_ingest.out);
            size_t missing = 0;
            for (uint8_t m : d.obs.mask) missing += m == 0;
            emit({{"sensors", d.net.sensors.size()},
                  {"steps", d.obs.t},
                  {"missing_entries", missing}});
        } else if (*c_dens) {
            json cfg = load_config(o_dens.config);
            fieldmap::DensifyConfig dc = densify_config(cfg);
            if (o_dens.delta) dc.delta = *o_dens.delta;
            if (o_dens.lambda) dc.lambda = *o_dens.lambda;
            if (o_dens.theta) dc.theta = *o_dens.theta;
            if (o_dens.iterations) dc.iterations = *o_dens.iterations;
            if (o_dens.resolution) dc.resolution = *o_dens.resolution;
            if (o_dens.seed) dc.seed = *o_dens.seed;
            Dataset d = load_dataset(o_dens.data);
            size_t before = d.net.sensors.size();
            fieldmap::DensifyResult res = fieldmap::densify(d.net, d.obs, dc);
            save_dataset({res.network, res.observations}, o_dens.out);
            fieldmap::save_raster(fs::path(o_dens.out) / "density",
                                  density_raster(res.density));
            fieldmap::save_raster(fs::path(o_dens.out) / "sampling",
                                  density_raster(res.sampling));
            emit({{"sensors", before},
                  {"virtual_added", res.network.sensors.size() - before},
                  {"out", o_dens.out}});
        } else if (*c_train) {
            json cfg = load_config(o_train.config);
            fieldmap::ModelConfig mc = model_config(cfg);
            fieldmap::TrainConfig tc = train_config(cfg);
            double alpha = cfg.value("train_alpha", 0.3);
            double unknown = cfg.value("unknown_fraction", 0.0);
            if (o_train.epochs) tc.epochs = *o_train.epochs;
            if (o_train.seed) tc.seed = *o_train.seed;
            if (o_train.lr) tc.adam.lr = *o_train.lr;
            if (o_train.patience) tc.patience = *o_train.patience;
            if (o_train.t_sr) mc.t_sr = *o_train.t_sr;
            if (o_train.hidden) mc.hidden = *o_train.hidden;
            if (o_train.window) mc.window = *o_train.window;
            if (o_train.k) mc.k = *o_train.k;
            if (o_train.no_pna) mc.use_pna = false;
            if (o_train.no_gpe) mc.use_gpe = false;
            if (o_train.alpha) alpha = *o_train.alpha;
            if (o_train.unknown_fraction) unknown = *o_train.unknown_fraction;
            mc.validate();
            Dataset d = load_dataset(o_train.data);
            fieldmap::SplitSpec split = fieldmap::make_split(
                d.obs, unknown, alpha, static_cast<size_t>(mc.window),
                fieldmap::detail::mix_seed(tc.seed, 0x5197));
            fieldmap::Model model =
                fieldmap::Model::init(mc, fieldmap::detail::mix_seed(tc.seed, 0xc0de));
            fs::create_directories(o_train.out);
            fieldmap::TrainResult tr;
            {
                std::ofstream log(fs::path(o_train.out) / "train.jsonl");
                tr = fieldmap::train(model, d.net, d.obs, split, tc, &log);
            }
            model.save(o_train.out);
            emit({{"epochs_run", tr.epochs_run},
                  {"final_loss", tr.loss.empty() ? 0.0 : tr.loss.back()},
                  {"final_val_rmse", tr.val_rmse.empty() ? 0.0 : tr.val_rmse.back()},
                  {"checkpoint", o_train.out}});
        } else if (*c_imp) {
            Dataset d = load_dataset(o_imp.data);
            fieldmap::Model model = fieldmap::Model::load(o_imp.model);
            fieldmap::ForwardContext fc = full_context(d.net, model.cfg);
            std::vector<uint8_t> visible = observed_rows(d.obs);
            fieldmap::Tensor pred = fieldmap::impute_full(model, fc, d.obs, visible);
            fs::create_directories(o_imp.out);
            std::vector<float> f32(pred.data.begin(), pred.data.end());
            fieldmap::save_matrix(fs::path(o_imp.out) / "predicted", {d.obs.n, d.obs.t}, f32);
            fieldmap::ObservationSeries filled = d.obs;
            size_t filled_count = 0;
            for (size_t i = 0; i < d.obs.n; ++i)
                for (size_t t = 0; t < d.obs.t; ++t)
                    if (!d.obs.observed(i, t)) {
                        filled.set(i, t, static_cast<float>(pred.data[i * d.obs.t + t]), true);
                        ++filled_count;
                    }
            fieldmap::save_observations(filled, d.net, fs::path(o_imp.out) / "filled.csv");
            emit({{"rows", d.obs.n}, {"steps", d.obs.t}, {"filled_entries", filled_count}});
        } else if (*c_tsr) {
            Dataset d = load_dataset(o_tsr.data);
            fieldmap::Model model = fieldmap::Model::load(o_tsr.model);
            fieldmap::ForwardContext fc = full_context(d.net, model.cfg);
            fieldmap::Tensor pred = fieldmap::tsr_infer(model, fc, d.obs);
            const int sr = model.cfg.t_sr;
            fs::create_directories(o_tsr.out);
            std::vector<float> f32(pred.data.begin(), pred.data.end());
            fieldmap::save_matrix(fs::path(o_tsr.out) / "predicted",
                                  {d.obs.n, d.obs.t * static_cast<size_t>(sr)}, f32);
            fieldmap::ObservationSeries up =
                fieldmap::ObservationSeries::zeros(d.obs.n, d.obs.t * static_cast<size_t>(sr));
            up.time_step = d.obs.time_step / sr;
            up.t0_epoch = d.obs.t0_epoch;
            for (size_t i = 0; i < up.n; ++i)
                for (size_t t = 0; t < up.t; ++t) {
                    // Source frames stay exact; the model fills between them.
                    if (t % static_cast<size_t>(sr) == 0 && d.obs.observed(i, t / sr))
                        up.set(i, t, d.obs.value(i, t / sr), true);
                    else
                        up.set(i, t, static_cast<float>(pred.data[i * up.t + t]), true);
                }
            fieldmap::save_observations(up, d.net, fs::path(o_tsr.out) / "upsampled.csv");
            emit({{"rows", up.n}, {"steps", up.t}, {"rate", sr}});
        } else if (*c_itp) {
            json cfg = load_config(o_itp.config);
            fieldmap::RbfConfig rc = rbf_config(cfg);
            if (o_itp.epsilon) rc.epsilon = *o_itp.epsilon;
            if (o_itp.lambda) rc.lambda_smooth = *o_itp.lambda;
            if (o_itp.neighbors) rc.n_neighbors = *o_itp.neighbors;
            if (o_itp.degree) rc.poly_degree = *o_itp.degree;
            Dataset d = load_dataset(o_itp.data);
            std::vector<fieldmap::Vec2> centers;
            std::vector<double> values;
            size_t skipped = 0;
            if (o_itp.values) {
                fieldmap::LoadedMatrix m = fieldmap::load_matrix(*o_itp.values);
                if (m.shape.size() != 2 || m.shape[0] != d.obs.n || m.shape[1] != d.obs.t)
                    throw fieldmap::config_error("interpolate: values matrix must be n x t");
                centers = d.net.positions();
                values.assign(m.data.begin(), m.data.end());
            } else {
                for (size_t i = 0; i < d.obs.n; ++i) {
                    bool full = true;
                    for (size_t t = 0; t < d.obs.t && full; ++t) full = d.obs.observed(i, t);
                    if (!full) {
                        ++skipped;
                        continue;
                    }
                    centers.push_back(d.net.sensors[i].position());
                    for (size_t t = 0; t < d.obs.t; ++t) values.push_back(d.obs.value(i, t));
                }
            }
            fieldmap::RasterField out = fieldmap::interpolate(centers, values, d.obs.t,
                                                              d.net.boundary, o_itp.width, rc);
            fieldmap::save_raster(o_itp.out, out);
            emit({{"width", out.width},
                  {"height", out.height},
                  {"steps", out.steps},
                  {"centers", centers.size()},
                  {"skipped_rows", skipped}});
        } else if (*c_unc) {
            Dataset d = load_dataset(o_unc.data);
            fieldmap::Model model = fieldmap::Model::load(o_unc.model);
            fieldmap::ForwardContext fc = full_context(d.net, model.cfg);
            fieldmap::Tensor ref = fieldmap::reference_values(model, fc, d.obs, o_unc.seed);
            size_t step = o_unc.timestep ? static_cast<size_t>(*o_unc.timestep) : d.obs.t - 1;
            fieldmap::GlyphGrid grid = fieldmap::glyph_metrics(
                d.obs, ref, d.net, o_unc.grid, o_unc.neighbors, step,
                static_cast<size_t>(o_unc.window));
            fieldmap::HatchField hatch = fieldmap::hatch_opacity(d.net, 0.0, o_unc.resolution);
            fs::create_directories(o_unc.out);
            fieldmap::save_glyph_grid(grid, fs::path(o_unc.out) / "glyphs.csv");
            fieldmap::save_raster(fs::path(o_unc.out) / "hatch", density_raster(hatch.field),
                                  {{"threshold", hatch.threshold}});
            std::vector<float> f32(ref.data.begin(), ref.data.end());
            fieldmap::save_matrix(fs::path(o_unc.out) / "reference", {d.obs.n, d.obs.t}, f32);
            emit({{"grid", o_unc.grid},
                  {"timestep", step},
                  {"hatch_threshold", hatch.threshold}});
        } else if (*c_ren) {
            Dataset d = load_dataset(o_ren.data);
            fieldmap::RasterField raster = fieldmap::load_raster(o_ren.raster);
            fieldmap::RenderSpec rs;
            rs.width_px = o_ren.width;
            rs.colormap = o_ren.colormap;
            rs.title = o_ren.title;
            if (o_ren.vmin) rs.vmin = *o_ren.vmin;
            if (o_ren.vmax) rs.vmax = *o_ren.vmax;
            std::optional<fieldmap::GlyphGrid> glyphs;
            if (o_ren.glyphs)
                glyphs = fieldmap::load_glyph_grid(*o_ren.glyphs, d.net.boundary.bounds());
            std::optional<fieldmap::HatchField> hatch;
            if (o_ren.hatch) hatch = fieldmap::hatch_opacity(d.net);
            std::string svg = fieldmap::render_svg(raster, o_ren.frame, d.net.boundary,
                                                   glyphs ? &*glyphs : nullptr,
                                                   hatch ? &*hatch : nullptr, rs);
            fieldmap::write_text_file(o_ren.out, svg);
            emit({{"out", o_ren.out},
                  {"frame", o_ren.frame},
                  {"bytes", svg.size()}});
        } else if (*c_eval) {
            json cfg = load_config(o_eval.config);
            fieldmap::ExperimentConfig ec = fieldmap::ExperimentConfig::from_json(cfg);
            if (o_eval.epochs) ec.train.epochs = *o_eval.epochs;
            if (o_eval.tsr_epochs) ec.tsr_epochs = *o_eval.tsr_epochs;
            if (o_eval.ablation_epochs) ec.ablation_epochs = *o_eval.ablation_epochs;
            if (o_eval.sensors) ec.synth.n_sensors = *o_eval.sensors;
            if (o_eval.steps) ec.synth.n_steps = *o_eval.steps;
            if (o_eval.seed) ec.train.seed = *o_eval.seed;
            if (o_eval.no_pna) ec.model.use_pna = false;
            if (o_eval.no_gpe) ec.model.use_gpe = false;
            if (o_eval.skip_imputation) ec.run_imputation = false;
            if (o_eval.skip_tsr) ec.run_tsr = false;
            if (o_eval.skip_ssim) ec.run_ssim = false;
            if (o_eval.skip_ablations) ec.run_ablations = false;
            ordered_json rep =
                fieldmap::run_experiment(ec, o_eval.out, o_eval.quiet ? nullptr : &std::cerr);
            emit(rep);
        }
    } catch (const fieldmap::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
