#pragma once

#include <cmath>
#include <vector>

#include "fieldmap/autodiff.hpp"
#include "fieldmap/tensor.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    int64_t step = 0;
    std::vector<Tensor> m;  // first moments, one per parameter tensor
    std::vector<Tensor> v;  // second moments

    static AdamState init(const std::vector<ad::NodePtr>& params, const AdamConfig& cfg = {}) {
        AdamState s;
        s.cfg = cfg;
        for (const auto& p : params) {
            s.m.push_back(Tensor::zeros(p->value.shape));
            s.v.push_back(Tensor::zeros(p->value.shape));
        }
        return s;
    }
};

// Bias-corrected Adam update from the gradients accumulated on each node.
// Gradients are cleared afterwards so the next tape starts fresh.
inline void adam_step(std::vector<ad::NodePtr>& params, AdamState& state) {
    if (params.size() != state.m.size())
        throw pipeline_error("adam_step: state does not match parameter list");
    state.step += 1;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        ad::Node& p = *params[k];
        p.ensure_grad();
        if (!state.m[k].same_shape(p.value))
            throw pipeline_error("adam_step: moment shape mismatch");
        for (size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad.data[i];
            double& mi = state.m[k].data[i];
            double& vi = state.v[k].data[i];
            mi = b1 * mi + (1.0 - b1) * g;
            vi = b2 * vi + (1.0 - b2) * g * g;
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            p.value.data[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
        }
        std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
    }
}

}  // namespace fieldmap
