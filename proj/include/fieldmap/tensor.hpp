#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "fieldmap/util.hpp"

namespace fieldmap {

// Dense row-major double tensor. Training math stays in 64-bit; checkpoints
// convert to float32 on save.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        data.assign(count(shape), 0.0);
    }

    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }
    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<size_t> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(double v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }

    size_t size() const { return data.size(); }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }
    double& at(size_t r, size_t c) { return data[r * cols() + c]; }
    double at(size_t r, size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMat>;
using EigenConstMap = Eigen::Map<const EigenRowMat>;

inline EigenConstMap as_eigen(const Tensor& t) {
    return EigenConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                         static_cast<Eigen::Index>(t.cols()));
}
inline EigenMap as_eigen(Tensor& t) {
    return EigenMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
}

// C = A @ B for 2-D tensors.
inline Tensor matmul_values(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw pipeline_error(strprintf("matmul shape mismatch: (%zu,%zu) x (%zu,%zu)", a.rows(),
                                       a.cols(), b.rows(), b.cols()));
    Tensor c({a.shape[0], b.shape[1]});
    as_eigen(c).noalias() = as_eigen(a) * as_eigen(b);
    return c;
}

}  // namespace fieldmap
