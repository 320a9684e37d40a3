#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "fieldmap/tensor.hpp"
#include "fieldmap/util.hpp"

namespace fieldmap::ad {

// Tape node. Ops build a DAG of these; backward() replays it in reverse
// creation order. Closures hold shared_ptr copies of their parents, so a
// subgraph stays alive as long as its outputs do.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor::zeros(value.shape);
    }
};

using NodePtr = std::shared_ptr<Node>;

inline uint64_t next_node_id() {
    static uint64_t counter = 0;
    return ++counter;
}

inline NodePtr make_node(Tensor value, std::vector<NodePtr> parents,
                         std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->id = next_node_id();
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

inline NodePtr constant(Tensor v) { return make_node(std::move(v), {}, nullptr); }

inline NodePtr param(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->id = next_node_id();
    n->requires_grad = true;
    return n;
}

inline void backward(const NodePtr& loss) {
    if (loss->value.size() != 1) throw pipeline_error("backward: loss must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{loss.get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (const auto& p : n->parents)
            if (p->requires_grad && !seen.count(p.get())) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
    loss->ensure_grad();
    loss->grad.data[0] = 1.0;
    for (Node* n : order) {
        if (!n->backprop) continue;
        n->ensure_grad();
        n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops
// ---------------------------------------------------------------------------

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw pipeline_error("add: shape mismatch");
    Tensor v = a->value;
    for (size_t i = 0; i < v.size(); ++i) v.data[i] += b->value.data[i];
    return make_node(std::move(v), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) b->grad.data[i] += n.grad.data[i];
        }
    });
}

inline NodePtr sub(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw pipeline_error("sub: shape mismatch");
    Tensor v = a->value;
    for (size_t i = 0; i < v.size(); ++i) v.data[i] -= b->value.data[i];
    return make_node(std::move(v), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) b->grad.data[i] -= n.grad.data[i];
        }
    });
}

inline NodePtr mul(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw pipeline_error("mul: shape mismatch");
    Tensor v = a->value;
    for (size_t i = 0; i < v.size(); ++i) v.data[i] *= b->value.data[i];
    return make_node(std::move(v), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                a->grad.data[i] += n.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                b->grad.data[i] += n.grad.data[i] * a->value.data[i];
        }
    });
}

inline NodePtr scale(const NodePtr& a, double k) {
    Tensor v = a->value;
    for (double& x : v.data) x *= k;
    return make_node(std::move(v), {a}, [a, k](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) a->grad.data[i] += k * n.grad.data[i];
    });
}

inline NodePtr relu(const NodePtr& a) {
    Tensor v = a->value;
    for (double& x : v.data) x = x > 0.0 ? x : 0.0;
    return make_node(std::move(v), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (a->value.data[i] > 0.0) a->grad.data[i] += n.grad.data[i];
    });
}

inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline NodePtr sigmoid(const NodePtr& a) {
    Tensor v = a->value;
    for (double& x : v.data) x = sigmoid_scalar(x);
    return make_node(std::move(v), {a}, [a](Node& n) {
        a->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            double s = n.value.data[i];
            a->grad.data[i] += n.grad.data[i] * s * (1.0 - s);
        }
    });
}

inline NodePtr glu(const NodePtr& value_path, const NodePtr& gate_path) {
    return mul(value_path, sigmoid(gate_path));
}

inline NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    Tensor v = matmul_values(a->value, b->value);
    return make_node(std::move(v), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            as_eigen(a->grad).noalias() += as_eigen(n.grad) * as_eigen(b->value).transpose();
        }
        if (b->requires_grad) {
            b->ensure_grad();
            as_eigen(b->grad).noalias() += as_eigen(a->value).transpose() * as_eigen(n.grad);
        }
    });
}

// y[r,c] = a[r,c] + bias[c]
inline NodePtr add_rowvec(const NodePtr& a, const NodePtr& bias) {
    size_t c = a->value.cols();
    if (bias->value.size() != c) throw pipeline_error("add_rowvec: bias size mismatch");
    Tensor v = a->value;
    size_t r = a->value.rows();
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) v.data[i * c + j] += bias->value.data[j];
    return make_node(std::move(v), {a, bias}, [a, bias, r, c](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) a->grad.data[i] += n.grad.data[i];
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (size_t i = 0; i < r; ++i)
                for (size_t j = 0; j < c; ++j) bias->grad.data[j] += n.grad.data[i * c + j];
        }
    });
}

// ---------------------------------------------------------------------------
// Layout-aware ops. Activations use shape (n, p*z): sensor rows, inner index
// tau*z + channel. Per-timestep linear maps can then run as one GEMM over an
// (n*p, z) view without copying.
// ---------------------------------------------------------------------------

inline EigenConstMap map_rows(const Tensor& t, size_t r, size_t c) {
    return EigenConstMap(t.data.data(), static_cast<Eigen::Index>(r),
                         static_cast<Eigen::Index>(c));
}
inline EigenMap map_rows(Tensor& t, size_t r, size_t c) {
    return EigenMap(t.data.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

// x: (n, p*zin) -> (n, p*zout) applying w: (zin, zout) at every timestep.
inline NodePtr linear_time(const NodePtr& x, const NodePtr& w, size_t p) {
    size_t n = x->value.rows();
    size_t zin = w->value.rows(), zout = w->value.cols();
    if (x->value.cols() != p * zin) throw pipeline_error("linear_time: shape mismatch");
    Tensor v({n, p * zout});
    map_rows(v, n * p, zout).noalias() = map_rows(x->value, n * p, zin) * as_eigen(w->value);
    return make_node(std::move(v), {x, w}, [x, w, n, p, zin, zout](Node& nd) {
        if (x->requires_grad) {
            x->ensure_grad();
            map_rows(x->grad, n * p, zin).noalias() +=
                map_rows(nd.grad, n * p, zout) * as_eigen(w->value).transpose();
        }
        if (w->requires_grad) {
            w->ensure_grad();
            as_eigen(w->grad).noalias() +=
                map_rows(x->value, n * p, zin).transpose() * map_rows(nd.grad, n * p, zout);
        }
    });
}

// bias (zout) added at every (sensor, timestep).
inline NodePtr add_bias_time(const NodePtr& x, const NodePtr& bias, size_t p) {
    size_t n = x->value.rows();
    size_t z = bias->value.size();
    if (x->value.cols() != p * z) throw pipeline_error("add_bias_time: shape mismatch");
    Tensor v = x->value;
    for (size_t i = 0; i < n; ++i)
        for (size_t t = 0; t < p; ++t)
            for (size_t c = 0; c < z; ++c) v.data[(i * p + t) * z + c] += bias->value.data[c];
    return make_node(std::move(v), {x, bias}, [x, bias, n, p, z](Node& nd) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < nd.grad.size(); ++i) x->grad.data[i] += nd.grad.data[i];
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (size_t i = 0; i < n * p; ++i)
                for (size_t c = 0; c < z; ++c) bias->grad.data[c] += nd.grad.data[i * z + c];
        }
    });
}

// g: (n, z) node-constant-in-time features -> (n, p*z) tiled over timesteps.
inline NodePtr repeat_time(const NodePtr& g, size_t p) {
    size_t n = g->value.rows(), z = g->value.cols();
    Tensor v({n, p * z});
    for (size_t i = 0; i < n; ++i)
        for (size_t t = 0; t < p; ++t)
            for (size_t c = 0; c < z; ++c) v.data[(i * p + t) * z + c] = g->value.data[i * z + c];
    return make_node(std::move(v), {g}, [g, n, p, z](Node& nd) {
        g->ensure_grad();
        for (size_t i = 0; i < n; ++i)
            for (size_t t = 0; t < p; ++t)
                for (size_t c = 0; c < z; ++c)
                    g->grad.data[i * z + c] += nd.grad.data[(i * p + t) * z + c];
    });
}

// Concatenates along the channel axis at every timestep.
inline NodePtr concat_channels(const std::vector<NodePtr>& xs, size_t p) {
    if (xs.empty()) throw pipeline_error("concat_channels: empty input");
    size_t n = xs[0]->value.rows();
    std::vector<size_t> zs;
    size_t ztot = 0;
    for (const auto& x : xs) {
        if (x->value.rows() != n) throw pipeline_error("concat_channels: row mismatch");
        if (x->value.cols() % p != 0) throw pipeline_error("concat_channels: not a p multiple");
        zs.push_back(x->value.cols() / p);
        ztot += zs.back();
    }
    Tensor v({n, p * ztot});
    size_t off = 0;
    for (size_t k = 0; k < xs.size(); ++k) {
        const Tensor& src = xs[k]->value;
        for (size_t i = 0; i < n; ++i)
            for (size_t t = 0; t < p; ++t)
                for (size_t c = 0; c < zs[k]; ++c)
                    v.data[(i * p + t) * ztot + off + c] = src.data[(i * p + t) * zs[k] + c];
        off += zs[k];
    }
    return make_node(std::move(v), std::vector<NodePtr>(xs),
                     [xs, zs, n, p, ztot](Node& nd) {
                         size_t off = 0;
                         for (size_t k = 0; k < xs.size(); ++k) {
                             if (xs[k]->requires_grad) {
                                 xs[k]->ensure_grad();
                                 for (size_t i = 0; i < n; ++i)
                                     for (size_t t = 0; t < p; ++t)
                                         for (size_t c = 0; c < zs[k]; ++c)
                                             xs[k]->grad.data[(i * p + t) * zs[k] + c] +=
                                                 nd.grad.data[(i * p + t) * ztot + off + c];
                             }
                             off += zs[k];
                         }
                     });
}

// Per-sensor scaling by a constant vector (the PNA degree scalers).
inline NodePtr scale_rows(const NodePtr& x, std::vector<double> s) {
    size_t n = x->value.rows(), c = x->value.cols();
    if (s.size() != n) throw pipeline_error("scale_rows: scale size mismatch");
    Tensor v = x->value;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < c; ++j) v.data[i * c + j] *= s[i];
    return make_node(std::move(v), {x}, [x, s = std::move(s), n, c](Node& nd) {
        x->ensure_grad();
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < c; ++j) x->grad.data[i * c + j] += s[i] * nd.grad.data[i * c + j];
    });
}

// Inverted dropout; masks are drawn at graph-build time so a fixed seed gives
// a fixed tape.
inline NodePtr dropout(const NodePtr& x, double prob, Rng& rng) {
    if (prob <= 0.0) return x;
    if (prob >= 1.0) throw config_error("dropout: probability must be < 1");
    std::vector<double> factor(x->value.size());
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double keep_scale = 1.0 / (1.0 - prob);
    for (double& f : factor) f = u01(rng) < prob ? 0.0 : keep_scale;
    Tensor v = x->value;
    for (size_t i = 0; i < v.size(); ++i) v.data[i] *= factor[i];
    return make_node(std::move(v), {x}, [x, factor = std::move(factor)](Node& nd) {
        x->ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i)
            x->grad.data[i] += factor[i] * nd.grad.data[i];
    });
}

// SAME-padded sliding windows over the time axis: (n, p*cin) -> (n, p*w*cin),
// inner index d*cin + c for offset d. Feeding the result through linear_time
// with a (w*cin, cout) kernel completes a temporal convolution.
inline NodePtr im2col_time(const NodePtr& x, size_t p, size_t cin, size_t w) {
    if (w % 2 == 0) throw config_error("temporal kernel width must be odd for SAME padding");
    size_t n = x->value.rows();
    if (x->value.cols() != p * cin) throw pipeline_error("im2col_time: shape mismatch");
    long off = static_cast<long>(w / 2);
    Tensor v({n, p * w * cin});
    for (size_t i = 0; i < n; ++i)
        for (size_t t = 0; t < p; ++t)
            for (size_t d = 0; d < w; ++d) {
                long src_t = static_cast<long>(t) + static_cast<long>(d) - off;
                if (src_t < 0 || src_t >= static_cast<long>(p)) continue;
                for (size_t c = 0; c < cin; ++c)
                    v.data[(i * p + t) * w * cin + d * cin + c] =
                        x->value.data[(i * p + static_cast<size_t>(src_t)) * cin + c];
            }
    return make_node(std::move(v), {x}, [x, n, p, cin, w, off](Node& nd) {
        x->ensure_grad();
        for (size_t i = 0; i < n; ++i)
            for (size_t t = 0; t < p; ++t)
                for (size_t d = 0; d < w; ++d) {
                    long src_t = static_cast<long>(t) + static_cast<long>(d) - off;
                    if (src_t < 0 || src_t >= static_cast<long>(p)) continue;
                    for (size_t c = 0; c < cin; ++c)
                        x->grad.data[(i * p + static_cast<size_t>(src_t)) * cin + c] +=
                            nd.grad.data[(i * p + t) * w * cin + d * cin + c];
                }
    });
}

// ---------------------------------------------------------------------------
// PNA aggregation
// ---------------------------------------------------------------------------

// Graph-side constants shared by every forward pass over one adjacency.
struct PnaContext {
    std::vector<std::vector<int>> neighbors;  // Omega_i = { j : A[i,j] > 0 }
    std::vector<double> dmean;                // mean over Omega_i of A[j,i]
    std::vector<double> dstd;                 // sqrt(relu(var of A[i,j]) + eps)
    double eps = 1e-8;
};

// Aggregate block order per channel group: mean, softmax, softmin, std,
// degree-mean, degree-std. x: (n, p*z) -> (n, p*6z). Isolated sensors
// aggregate to zero.
inline NodePtr pna_aggregate(const NodePtr& x, const std::shared_ptr<const PnaContext>& ctx,
                             size_t p, size_t z) {
    size_t n = x->value.rows();
    if (x->value.cols() != p * z) throw pipeline_error("pna_aggregate: shape mismatch");
    if (ctx->neighbors.size() != n) throw pipeline_error("pna_aggregate: context size mismatch");
    const double eps = ctx->eps;
    Tensor v({n, p * 6 * z});
    for (size_t i = 0; i < n; ++i) {
        const auto& nb = ctx->neighbors[i];
        if (nb.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nb.size());
        for (size_t t = 0; t < p; ++t) {
            double* out = &v.data[(i * p + t) * 6 * z];
            for (size_t c = 0; c < z; ++c) {
                double m = 0.0, m2 = 0.0, hi = -std::numeric_limits<double>::infinity(),
                       lo = std::numeric_limits<double>::infinity();
                for (int j : nb) {
                    double xv = x->value.data[(static_cast<size_t>(j) * p + t) * z + c];
                    m += xv;
                    m2 += xv * xv;
                    hi = std::max(hi, xv);
                    lo = std::min(lo, xv);
                }
                m *= inv;
                m2 *= inv;
                double wmax = 0.0, ymax = 0.0, wmin = 0.0, ymin = 0.0;
                for (int j : nb) {
                    double xv = x->value.data[(static_cast<size_t>(j) * p + t) * z + c];
                    double ex = std::exp(xv - hi);
                    wmax += ex;
                    ymax += ex * xv;
                    double en = std::exp(lo - xv);
                    wmin += en;
                    ymin += en * xv;
                }
                out[c] = m;
                out[z + c] = ymax / wmax;
                out[2 * z + c] = ymin / wmin;
                out[3 * z + c] = std::sqrt(std::max(m2 - m * m, 0.0) + eps);
            }
            for (size_t c = 0; c < z; ++c) {
                out[4 * z + c] = ctx->dmean[i];
                out[5 * z + c] = ctx->dstd[i];
            }
        }
    }
    return make_node(std::move(v), {x}, [x, ctx, n, p, z, eps](Node& nd) {
        x->ensure_grad();
        for (size_t i = 0; i < n; ++i) {
            const auto& nb = ctx->neighbors[i];
            if (nb.empty()) continue;
            const double inv = 1.0 / static_cast<double>(nb.size());
            for (size_t t = 0; t < p; ++t) {
                const double* g = &nd.grad.data[(i * p + t) * 6 * z];
                const double* val = &nd.value.data[(i * p + t) * 6 * z];
                for (size_t c = 0; c < z; ++c) {
                    double g_mean = g[c], g_smax = g[z + c], g_smin = g[2 * z + c],
                           g_std = g[3 * z + c];
                    if (g_mean == 0.0 && g_smax == 0.0 && g_smin == 0.0 && g_std == 0.0)
                        continue;
                    double y_smax = val[z + c], y_smin = val[2 * z + c], y_std = val[3 * z + c];
                    double m = val[c];
                    double hi = -std::numeric_limits<double>::infinity(),
                           lo = std::numeric_limits<double>::infinity();
                    for (int j : nb) {
                        double xv = x->value.data[(static_cast<size_t>(j) * p + t) * z + c];
                        hi = std::max(hi, xv);
                        lo = std::min(lo, xv);
                    }
                    double wmax = 0.0, wmin = 0.0, var = 0.0;
                    for (int j : nb) {
                        double xv = x->value.data[(static_cast<size_t>(j) * p + t) * z + c];
                        wmax += std::exp(xv - hi);
                        wmin += std::exp(lo - xv);
                        var += (xv - m) * (xv - m);
                    }
                    var *= inv;
                    bool var_pos = var > 0.0;
                    for (int j : nb) {
                        size_t xi = (static_cast<size_t>(j) * p + t) * z + c;
                        double xv = x->value.data[xi];
                        double acc = g_mean * inv;
                        double smax_w = std::exp(xv - hi) / wmax;
                        acc += g_smax * smax_w * (1.0 + xv - y_smax);
                        double smin_w = std::exp(lo - xv) / wmin;
                        acc += g_smin * smin_w * (1.0 - xv + y_smin);
                        if (var_pos) acc += g_std * (xv - m) * inv / y_std;
                        x->grad.data[xi] += acc;
                    }
                }
            }
        }
    });
}

// Ablation variant: plain neighborhood mean, identity scaler, same layout in
// and out. x: (n, p*z) -> (n, p*z).
inline NodePtr mean_aggregate(const NodePtr& x, const std::shared_ptr<const PnaContext>& ctx,
                              size_t p, size_t z) {
    size_t n = x->value.rows();
    if (x->value.cols() != p * z) throw pipeline_error("mean_aggregate: shape mismatch");
    Tensor v({n, p * z});
    for (size_t i = 0; i < n; ++i) {
        const auto& nb = ctx->neighbors[i];
        if (nb.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nb.size());
        for (size_t t = 0; t < p; ++t)
            for (size_t c = 0; c < z; ++c) {
                double m = 0.0;
                for (int j : nb) m += x->value.data[(static_cast<size_t>(j) * p + t) * z + c];
                v.data[(i * p + t) * z + c] = m * inv;
            }
    }
    return make_node(std::move(v), {x}, [x, ctx, n, p, z](Node& nd) {
        x->ensure_grad();
        for (size_t i = 0; i < n; ++i) {
            const auto& nb = ctx->neighbors[i];
            if (nb.empty()) continue;
            const double inv = 1.0 / static_cast<double>(nb.size());
            for (size_t t = 0; t < p; ++t)
                for (size_t c = 0; c < z; ++c) {
                    double g = nd.grad.data[(i * p + t) * z + c] * inv;
                    if (g == 0.0) continue;
                    for (int j : nb)
                        x->grad.data[(static_cast<size_t>(j) * p + t) * z + c] += g;
                }
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

inline NodePtr dot_const(const NodePtr& x, Tensor w) {
    if (!x->value.same_shape(w)) throw pipeline_error("dot_const: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) s += x->value.data[i] * w.data[i];
    return make_node(Tensor::scalar(s), {x}, [x, w = std::move(w)](Node& nd) {
        x->ensure_grad();
        double g = nd.grad.data[0];
        for (size_t i = 0; i < w.size(); ++i) x->grad.data[i] += g * w.data[i];
    });
}

// Mean over mask=true entries of the Huber penalty on pred - target.
inline NodePtr huber_loss(const NodePtr& pred, Tensor target, std::vector<uint8_t> mask,
                          double gamma) {
    if (gamma <= 0.0) throw config_error("huber: gamma must be > 0");
    if (!pred->value.same_shape(target)) throw pipeline_error("huber: shape mismatch");
    if (mask.size() != target.size()) throw pipeline_error("huber: mask size mismatch");
    size_t count = 0;
    for (uint8_t m : mask)
        if (m) ++count;
    if (count == 0) throw pipeline_error("huber: empty mask");
    double loss = 0.0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        double r = pred->value.data[i] - target.data[i];
        double a = std::fabs(r);
        loss += a <= gamma ? 0.5 * r * r : gamma * (a - 0.5 * gamma);
    }
    loss /= static_cast<double>(count);
    return make_node(Tensor::scalar(loss), {pred},
                     [pred, target = std::move(target), mask = std::move(mask), gamma,
                      count](Node& nd) {
                         pred->ensure_grad();
                         double g = nd.grad.data[0] / static_cast<double>(count);
                         for (size_t i = 0; i < mask.size(); ++i) {
                             if (!mask[i]) continue;
                             double r = pred->value.data[i] - target.data[i];
                             pred->grad.data[i] += g * std::clamp(r, -gamma, gamma);
                         }
                     });
}

}  // namespace fieldmap::ad
