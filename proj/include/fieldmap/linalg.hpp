#pragma once

#include <cmath>
#include <vector>

#include "fieldmap/util.hpp"

namespace fieldmap {

// LU factorization with partial pivoting for the small dense systems in the
// RBF solver. Factor once, reuse across timesteps with different right-hand
// sides.
struct LuFactors {
    int n = 0;
    std::vector<double> lu;   // row-major, L below diagonal (unit), U on/above
    std::vector<int> piv;     // row swaps applied in order

    bool valid() const { return n > 0; }
};

inline LuFactors lu_factor(std::vector<double> a, int n) {
    if (static_cast<int>(a.size()) != n * n) throw pipeline_error("lu_factor: bad matrix size");
    LuFactors f;
    f.n = n;
    f.piv.resize(n);
    for (int col = 0; col < n; ++col) {
        int best = col;
        double best_abs = std::fabs(a[size_t(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            double v = std::fabs(a[size_t(r) * n + col]);
            if (v > best_abs) {
                best_abs = v;
                best = r;
            }
        }
        if (best_abs < 1e-300) throw pipeline_error("lu_factor: singular system");
        f.piv[col] = best;
        if (best != col)
            for (int c = 0; c < n; ++c) std::swap(a[size_t(col) * n + c], a[size_t(best) * n + c]);
        double inv_pivot = 1.0 / a[size_t(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            double m = a[size_t(r) * n + col] * inv_pivot;
            a[size_t(r) * n + col] = m;
            if (m == 0.0) continue;
            for (int c = col + 1; c < n; ++c) a[size_t(r) * n + c] -= m * a[size_t(col) * n + c];
        }
    }
    f.lu = std::move(a);
    return f;
}

inline std::vector<double> lu_solve(const LuFactors& f, std::vector<double> b) {
    const int n = f.n;
    if (static_cast<int>(b.size()) != n) throw pipeline_error("lu_solve: bad rhs size");
    for (int col = 0; col < n; ++col)
        if (f.piv[col] != col) std::swap(b[col], b[f.piv[col]]);
    for (int r = 1; r < n; ++r) {
        double s = b[r];
        for (int c = 0; c < r; ++c) s -= f.lu[size_t(r) * n + c] * b[c];
        b[r] = s;
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= f.lu[size_t(r) * n + c] * b[c];
        b[r] = s / f.lu[size_t(r) * n + r];
    }
    return b;
}

}  // namespace fieldmap
