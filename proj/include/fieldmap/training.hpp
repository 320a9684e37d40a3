#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

#include "fieldmap/dataset.hpp"
#include "fieldmap/graph.hpp"
#include "fieldmap/metrics.hpp"
#include "fieldmap/model.hpp"
#include "fieldmap/optim.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

// Spatial and temporal partitions. `known` rows are available to training;
// `unknown` rows stay untouched until evaluation. The last tenth of the
// timeline is reserved for validation.
struct SplitSpec {
    std::vector<size_t> known;
    std::vector<size_t> unknown;
    size_t train_steps = 0;  // training windows are drawn from [0, train_steps)
    size_t total_steps = 0;
    double alpha = 0.3;      // fraction of known sensors masked per epoch
    size_t window = 16;

    void validate() const {
        if (alpha <= 0.0 || alpha >= 1.0) throw config_error("split: alpha must be in (0,1)");
        if (window < 2) throw config_error("split: window must be >= 2");
        if (known.empty()) throw config_error("split: no known sensors");
        if (train_steps == 0 || train_steps > total_steps)
            throw config_error("split: bad step partition");
        for (size_t u : unknown)
            if (std::find(known.begin(), known.end(), u) != known.end())
                throw config_error("split: known and unknown overlap");
    }
};

// Sensors with at least one observation are eligible; a seeded shuffle sends
// `unknown_fraction` of them to the held-out pool.
inline SplitSpec make_split(const ObservationSeries& obs, double unknown_fraction, double alpha,
                            size_t window, uint64_t seed) {
    if (unknown_fraction < 0.0 || unknown_fraction >= 1.0)
        throw config_error("make_split: unknown_fraction must be in [0,1)");
    std::vector<size_t> eligible;
    for (size_t i = 0; i < obs.n; ++i) {
        bool any = false;
        for (size_t t = 0; t < obs.t && !any; ++t) any = obs.observed(i, t);
        if (any) eligible.push_back(i);
    }
    if (eligible.size() < 2) throw config_error("make_split: need at least 2 observed sensors");
    Rng rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    size_t n_unknown = static_cast<size_t>(unknown_fraction * eligible.size());
    SplitSpec s;
    s.unknown.assign(eligible.begin(), eligible.begin() + n_unknown);
    s.known.assign(eligible.begin() + n_unknown, eligible.end());
    std::sort(s.unknown.begin(), s.unknown.end());
    std::sort(s.known.begin(), s.known.end());
    s.total_steps = obs.t;
    s.train_steps = obs.t - obs.t / 10;
    s.alpha = alpha;
    s.window = window;
    s.validate();
    return s;
}

// Everything the training loop needs, assembled over the known sensors plus
// all virtual sensors. Unknown rows are dropped from the network and the
// graph entirely, so no gradient can depend on their values.
struct TrainAssembly {
    SensorNetwork network;
    std::vector<size_t> full_rows;  // assembly row -> row in the input network
    std::vector<size_t> maskable;   // assembly rows holding real observations
    SensorGraph graph;
    ForwardContext fc;
    Tensor values;                  // (n, total_steps) normalized, unobserved = 0
    std::vector<uint8_t> observed;
    double mean = 0.0;
    double stdev = 1.0;
};

inline TrainAssembly make_train_assembly(const SensorNetwork& net, const ObservationSeries& obs,
                                         const SplitSpec& split, const ModelConfig& cfg) {
    if (obs.n != net.sensors.size())
        throw pipeline_error("train: observations do not match network");
    TrainAssembly a;
    std::vector<uint8_t> is_known(obs.n, 0);
    for (size_t i : split.known) is_known[i] = 1;
    std::vector<uint8_t> is_unknown(obs.n, 0);
    for (size_t i : split.unknown) is_unknown[i] = 1;
    for (size_t i = 0; i < obs.n; ++i) {
        if (is_unknown[i]) continue;
        bool virtual_row = net.sensors[i].kind == SensorKind::Virtual;
        if (!is_known[i] && !virtual_row) continue;  // unobserved original, useless for training
        if (is_known[i]) a.maskable.push_back(a.full_rows.size());
        a.full_rows.push_back(i);
        a.network.sensors.push_back(net.sensors[i]);
    }
    a.network.boundary = net.boundary;
    const size_t n = a.full_rows.size();
    if (a.maskable.empty()) throw pipeline_error("train: no observed sensors in assembly");

    double sum = 0.0, sq = 0.0;
    size_t cnt = 0;
    for (size_t r : a.maskable) {
        size_t src = a.full_rows[r];
        for (size_t t = 0; t < split.train_steps; ++t) {
            if (!obs.observed(src, t)) continue;
            double v = obs.value(src, t);
            sum += v;
            sq += v * v;
            ++cnt;
        }
    }
    if (cnt == 0) throw pipeline_error("train: no observed entries in the training range");
    a.mean = sum / static_cast<double>(cnt);
    double var = sq / static_cast<double>(cnt) - a.mean * a.mean;
    a.stdev = var > 1e-24 ? std::sqrt(var) : 1.0;

    a.values = Tensor({n, obs.t});
    a.observed.assign(n * obs.t, 0);
    for (size_t r = 0; r < n; ++r) {
        size_t src = a.full_rows[r];
        for (size_t t = 0; t < obs.t; ++t) {
            if (!obs.observed(src, t)) continue;
            a.values.data[r * obs.t + t] = (obs.value(src, t) - a.mean) / a.stdev;
            a.observed[r * obs.t + t] = 1;
        }
    }
    a.graph = build_graph(a.network, cfg.k, cfg.distance_scale);
    a.fc = make_forward_context(a.network, a.graph, cfg);
    return a;
}

// Assembly restricted to a subset of its rows, with the graph and forward
// context rebuilt over the survivors. Normalization carries over unchanged so
// predictions stay comparable with the full assembly.
inline TrainAssembly restrict_assembly(const TrainAssembly& a, const std::vector<size_t>& rows,
                                       const ModelConfig& cfg) {
    TrainAssembly s;
    s.mean = a.mean;
    s.stdev = a.stdev;
    s.network.boundary = a.network.boundary;
    const size_t t = a.values.cols();
    s.values = Tensor({rows.size(), t});
    s.observed.assign(rows.size() * t, 0);
    std::vector<uint8_t> can_mask(a.full_rows.size(), 0);
    for (size_t r : a.maskable) can_mask[r] = 1;
    for (size_t i = 0; i < rows.size(); ++i) {
        size_t r = rows[i];
        if (r >= a.full_rows.size()) throw pipeline_error("restrict_assembly: row out of range");
        s.network.sensors.push_back(a.network.sensors[r]);
        s.full_rows.push_back(a.full_rows[r]);
        if (can_mask[r]) s.maskable.push_back(i);
        std::copy_n(a.values.data.begin() + static_cast<long>(r * t), t,
                    s.values.data.begin() + static_cast<long>(i * t));
        std::copy_n(a.observed.begin() + static_cast<long>(r * t), t,
                    s.observed.begin() + static_cast<long>(i * t));
    }
    if (s.maskable.empty()) throw pipeline_error("restrict_assembly: no maskable rows kept");
    s.graph = build_graph(s.network, cfg.k, cfg.distance_scale);
    s.fc = make_forward_context(s.network, s.graph, cfg);
    return s;
}

// One epoch's material: a random window, a random set of hidden rows, inputs
// with hidden/unobserved entries zeroed, and the loss mask. For t_sr > 1 the
// input takes every t_sr-th frame of the window while the target keeps all of
// them; the skipped frames are supervised on every row, the kept frames only
// on hidden rows.
struct SubgraphSample {
    Tensor x0;                      // (n, window)
    Tensor target;                  // (n, window * t_sr)
    std::vector<uint8_t> loss_mask; // target-shaped
    std::vector<uint8_t> hidden;    // per assembly row
    size_t window_start = 0;
};

inline SubgraphSample sample_subgraph(const TrainAssembly& a, const SplitSpec& split,
                                      const ModelConfig& cfg, uint64_t seed,
                                      double alpha_override = -1.0) {
    const size_t n = a.full_rows.size();
    const size_t p = split.window;
    const size_t span = p * static_cast<size_t>(cfg.t_sr);
    if (split.train_steps < span)
        throw pipeline_error("sample_subgraph: window longer than the training range");
    Rng rng(seed);
    SubgraphSample s;
    s.window_start = std::uniform_int_distribution<size_t>(0, split.train_steps - span)(rng);
    std::vector<size_t> pool = a.maskable;
    std::shuffle(pool.begin(), pool.end(), rng);
    double alpha = alpha_override >= 0.0 ? alpha_override : split.alpha;
    size_t n_hidden = static_cast<size_t>(alpha * static_cast<double>(pool.size()));
    s.hidden.assign(n, 0);
    for (size_t i = 0; i < n_hidden; ++i) s.hidden[pool[i]] = 1;

    s.x0 = Tensor({n, p});
    s.target = Tensor({n, span});
    s.loss_mask.assign(n * span, 0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t tau = 0; tau < span; ++tau) {
            size_t src_t = s.window_start + tau;
            bool obs_here = a.observed[r * a.values.cols() + src_t] != 0;
            double v = a.values.data[r * a.values.cols() + src_t];
            s.target.data[r * span + tau] = v;
            bool kept = tau % static_cast<size_t>(cfg.t_sr) == 0;
            if (kept && obs_here && !s.hidden[r]) s.x0.data[r * p + tau / cfg.t_sr] = v;
            if (obs_here && (s.hidden[r] || !kept)) s.loss_mask[r * span + tau] = 1;
        }
    }
    return s;
}

struct TrainConfig {
    int epochs = 2000;
    uint64_t seed = 0;
    AdamConfig adam;
    int log_every = 50;  // validation cadence in epochs; 0 disables validation
    int patience = 0;    // early-stop after this many flat validation checks (0 = off)

    // Per-epoch randomization of the training graph. The inference graph holds
    // every sensor while the training assembly only holds the known half, so a
    // model trained on one fixed graph bakes in that graph's live-row density.
    // Jittering the masking rate and resampling the virtual-sensor subset each
    // epoch sweeps the density range inference actually presents.
    double alpha_lo = 0.0;         // masking-rate range; alpha_hi = 0 keeps the
    double alpha_hi = 0.0;         // fixed split rate
    double virtual_keep_min = 1.0; // lower bound on the kept virtual fraction

    void validate() const {
        if (epochs < 1) throw config_error("train: epochs must be >= 1");
        if (alpha_hi > 0.0) {
            if (alpha_lo <= 0.0 || alpha_lo > alpha_hi || alpha_hi >= 1.0)
                throw config_error("train: alpha jitter needs 0 < alpha_lo <= alpha_hi < 1");
        } else if (alpha_lo != 0.0) {
            throw config_error("train: alpha_lo set without alpha_hi");
        }
        if (virtual_keep_min <= 0.0 || virtual_keep_min > 1.0)
            throw config_error("train: virtual_keep_min must be in (0,1]");
    }
};

struct TrainResult {
    std::vector<double> loss;      // per epoch, normalized units
    std::vector<double> val_rmse;  // per validation check, normalized units
    int epochs_run = 0;
};

namespace detail {

// Deterministic per-epoch seed stream.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::vector<size_t> window_starts(size_t total, size_t span, size_t stride) {
    std::vector<size_t> starts;
    if (total < span) throw pipeline_error("window_starts: series shorter than one window");
    for (size_t s = 0; s + span <= total; s += stride) starts.push_back(s);
    if (starts.back() + span < total) starts.push_back(total - span);
    return starts;
}

// Validation loss: deterministic masks over windows tiling the held-back tail.
inline double validation_rmse(const Model& model, const TrainAssembly& a, const SplitSpec& split,
                              uint64_t seed) {
    const size_t span = split.window * static_cast<size_t>(model.cfg.t_sr);
    if (split.total_steps - split.train_steps < span) return std::nan("");
    double se = 0.0;
    size_t cnt = 0;
    size_t val_len = split.total_steps - split.train_steps;
    for (size_t off : window_starts(val_len, span, span)) {
        SplitSpec shifted = split;
        // Reuse the sampler on a pinned window by collapsing the start range.
        SubgraphSample s = sample_subgraph(a, shifted, model.cfg, mix_seed(seed, off));
        // Overwrite with the validation window contents.
        size_t start = split.train_steps + off;
        const size_t n = a.full_rows.size();
        const size_t p = split.window;
        s.window_start = start;
        std::fill(s.x0.data.begin(), s.x0.data.end(), 0.0);
        std::fill(s.loss_mask.begin(), s.loss_mask.end(), 0);
        for (size_t r = 0; r < n; ++r)
            for (size_t tau = 0; tau < span; ++tau) {
                size_t src_t = start + tau;
                bool obs_here = a.observed[r * a.values.cols() + src_t] != 0;
                double v = a.values.data[r * a.values.cols() + src_t];
                s.target.data[r * span + tau] = v;
                bool kept = tau % static_cast<size_t>(model.cfg.t_sr) == 0;
                if (kept && obs_here && !s.hidden[r]) s.x0.data[r * p + tau / model.cfg.t_sr] = v;
                if (obs_here && (s.hidden[r] || !kept)) s.loss_mask[r * span + tau] = 1;
            }
        ad::NodePtr pred = model.forward(s.x0, a.fc, nullptr);
        for (size_t i = 0; i < s.loss_mask.size(); ++i) {
            if (!s.loss_mask[i]) continue;
            double r = pred->value.data[i] - s.target.data[i];
            se += r * r;
            ++cnt;
        }
    }
    return cnt > 0 ? std::sqrt(se / static_cast<double>(cnt)) : std::nan("");
}

}  // namespace detail

// Masked-subgraph training. Emits one JSON line per epoch to `log` when given.
inline TrainResult train(Model& model, const SensorNetwork& net, const ObservationSeries& obs,
                         const SplitSpec& split, const TrainConfig& tcfg,
                         std::ostream* log = nullptr) {
    split.validate();
    model.cfg.validate();
    tcfg.validate();
    TrainAssembly a = make_train_assembly(net, obs, split, model.cfg);
    model.norm_mean = a.mean;
    model.norm_std = a.stdev;

    const bool jitter = tcfg.alpha_hi > 0.0;
    const bool subset = tcfg.virtual_keep_min < 1.0;
    std::vector<size_t> virt_rows, fixed_rows;
    if (subset)
        for (size_t r = 0; r < a.full_rows.size(); ++r) {
            bool virt = a.network.sensors[r].kind == SensorKind::Virtual;
            (virt ? virt_rows : fixed_rows).push_back(r);
        }

    std::vector<ad::NodePtr> params = model.parameters();
    AdamState adam = AdamState::init(params, tcfg.adam);
    Rng dropout_rng(detail::mix_seed(tcfg.seed, 0x0d0d));

    TrainResult res;
    double best_val = std::numeric_limits<double>::infinity();
    int flat_checks = 0;
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        uint64_t epoch_seed = detail::mix_seed(tcfg.seed, epoch);
        double alpha = -1.0;
        const TrainAssembly* ap = &a;
        TrainAssembly sub;
        if (jitter || subset) {
            Rng erng(detail::mix_seed(epoch_seed, 0x9d1));
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            if (jitter) alpha = tcfg.alpha_lo + (tcfg.alpha_hi - tcfg.alpha_lo) * u01(erng);
            if (subset && !virt_rows.empty()) {
                double f = tcfg.virtual_keep_min + (1.0 - tcfg.virtual_keep_min) * u01(erng);
                std::vector<size_t> kept = virt_rows;
                std::shuffle(kept.begin(), kept.end(), erng);
                kept.resize(static_cast<size_t>(
                    std::llround(f * static_cast<double>(virt_rows.size()))));
                std::vector<size_t> rows = fixed_rows;
                rows.insert(rows.end(), kept.begin(), kept.end());
                std::sort(rows.begin(), rows.end());
                sub = restrict_assembly(a, rows, model.cfg);
                ap = &sub;
            }
        }
        SubgraphSample s = sample_subgraph(*ap, split, model.cfg, epoch_seed, alpha);
        ad::NodePtr pred = model.forward(s.x0, ap->fc, &dropout_rng);
        ad::NodePtr loss = ad::huber_loss(pred, s.target, s.loss_mask, model.cfg.gamma);
        double l = loss->value.data[0];
        if (!std::isfinite(l))
            throw pipeline_error(strprintf("train: loss diverged (non-finite) at epoch %d",
                                           epoch));
        ad::backward(loss);
        adam_step(params, adam);
        res.loss.push_back(l);
        res.epochs_run = epoch + 1;

        bool check = tcfg.log_every > 0 && (epoch + 1) % tcfg.log_every == 0;
        double val = std::nan("");
        if (check) {
            val = detail::validation_rmse(model, a, split, detail::mix_seed(tcfg.seed, 0x7a11));
            res.val_rmse.push_back(val);
        }
        if (log) {
            (*log) << "{\"epoch\":" << epoch << ",\"loss\":" << double_repr(l);
            if (check && std::isfinite(val)) (*log) << ",\"val_rmse\":" << double_repr(val);
            (*log) << "}\n";
        }
        if (check && tcfg.patience > 0 && std::isfinite(val)) {
            if (val < best_val - 1e-6) {
                best_val = val;
                flat_checks = 0;
            } else if (++flat_checks >= tcfg.patience) {
                break;
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

// Slides length-p windows over the series (stride p, final window flush with
// the end) and returns denormalized predictions for every row and timestep.
// `visible` rows feed their observed values in; everything else enters as 0.
inline Tensor impute_full(const Model& model, const ForwardContext& fc,
                          const ObservationSeries& obs, const std::vector<uint8_t>& visible) {
    if (model.cfg.t_sr != 1) throw pipeline_error("impute_full: model must have t_sr == 1");
    const size_t n = obs.n, total = obs.t;
    const size_t p = static_cast<size_t>(model.cfg.window);
    if (visible.size() != n) throw pipeline_error("impute_full: visibility size mismatch");
    if (fc.n != n) throw pipeline_error("impute_full: context size mismatch");
    Tensor out({n, total});
    for (size_t start : detail::window_starts(total, p, p)) {
        Tensor x0({n, p});
        for (size_t r = 0; r < n; ++r) {
            if (!visible[r]) continue;
            for (size_t tau = 0; tau < p; ++tau)
                if (obs.observed(r, start + tau))
                    x0.data[r * p + tau] =
                        (obs.value(r, start + tau) - model.norm_mean) / model.norm_std;
        }
        ad::NodePtr pred = model.forward(x0, fc, nullptr);
        for (size_t r = 0; r < n; ++r)
            for (size_t tau = 0; tau < p; ++tau)
                out.data[r * total + start + tau] =
                    pred->value.data[r * p + tau] * model.norm_std + model.norm_mean;
    }
    return out;
}

// Temporal super-resolution over a coarse series: every input frame is kept,
// the model fills t_sr-1 frames after each. Returns (n, t_coarse * t_sr).
inline Tensor tsr_infer(const Model& model, const ForwardContext& fc,
                        const ObservationSeries& coarse) {
    const int sr = model.cfg.t_sr;
    if (sr < 2) throw pipeline_error("tsr_infer: model must have t_sr >= 2");
    const size_t n = coarse.n, tc = coarse.t;
    const size_t p = static_cast<size_t>(model.cfg.window);
    if (fc.n != n) throw pipeline_error("tsr_infer: context size mismatch");
    Tensor out({n, tc * static_cast<size_t>(sr)});
    const size_t span = p * static_cast<size_t>(sr);
    for (size_t start : detail::window_starts(tc, p, p)) {
        Tensor x0({n, p});
        for (size_t r = 0; r < n; ++r)
            for (size_t tau = 0; tau < p; ++tau)
                if (coarse.observed(r, start + tau))
                    x0.data[r * p + tau] =
                        (coarse.value(r, start + tau) - model.norm_mean) / model.norm_std;
        ad::NodePtr pred = model.forward(x0, fc, nullptr);
        for (size_t r = 0; r < n; ++r)
            for (size_t tau = 0; tau < span; ++tau)
                out.data[r * out.cols() + start * sr + tau] =
                    pred->value.data[r * span + tau] * model.norm_std + model.norm_mean;
    }
    return out;
}

// Masked-sensor evaluation: hide `masked` rows, impute from the remaining
// observed rows, and score only the masked entries that have ground truth.
inline ErrorStats evaluate_imputation(const Model& model, const ForwardContext& fc,
                                      const ObservationSeries& obs,
                                      const std::vector<size_t>& masked) {
    if (masked.empty()) throw pipeline_error("evaluate_imputation: empty masked set");
    std::vector<uint8_t> visible(obs.n, 0);
    for (size_t i = 0; i < obs.n; ++i) {
        bool any = false;
        for (size_t t = 0; t < obs.t && !any; ++t) any = obs.observed(i, t);
        visible[i] = any ? 1 : 0;
    }
    for (size_t m : masked) visible[m] = 0;
    Tensor pred = impute_full(model, fc, obs, visible);
    std::vector<double> ph, th;
    for (size_t m : masked)
        for (size_t t = 0; t < obs.t; ++t) {
            if (!obs.observed(m, t)) continue;
            ph.push_back(pred.data[m * obs.t + t]);
            th.push_back(obs.value(m, t));
        }
    return error_stats(ph, th);
}

}  // namespace fieldmap
