#include "hvq/tensor.hpp"

#include <cmath>

#include "hvq/error.hpp"

namespace hvq {

bool all_finite(const SeqTensor& x) {
    for (double v : x.data)
        if (!std::isfinite(v)) return false;
    return true;
}

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const double* v, int n) { return std::sqrt(dot(v, v, n)); }

double cosine(const double* a, const double* b, int n) {
    double na = l2_norm(a, n);
    double nb = l2_norm(b, n);
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return dot(a, b, n) / (na * nb);
}

std::vector<double> l2_normalize_rows(SeqTensor& x, double eps) {
    std::vector<double> norms(x.rows);
    for (int r = 0; r < x.rows; ++r) {
        double* p = x.row(r);
        double n = l2_norm(p, x.cols);
        norms[r] = n;
        if (n < eps) continue;
        double inv = 1.0 / n;
        for (int c = 0; c < x.cols; ++c) p[c] *= inv;
    }
    return norms;
}

SeqTensor l2_normalize_rows_backward(const SeqTensor& grad_unit, const SeqTensor& unit,
                                     const std::vector<double>& norms, double eps) {
    if (!grad_unit.same_shape(unit) || static_cast<int>(norms.size()) != unit.rows)
        throw UsageError("l2_normalize_rows_backward: shape mismatch with forward cache");
    SeqTensor grad_in(unit.rows, unit.cols);
    for (int r = 0; r < unit.rows; ++r) {
        const double* g = grad_unit.row(r);
        const double* e = unit.row(r);
        double* out = grad_in.row(r);
        if (norms[r] < eps) {
            for (int c = 0; c < unit.cols; ++c) out[c] = g[c];
            continue;
        }
        // d(u/||u||)/du = (I - e e^T) / ||u||
        double ge = dot(g, e, unit.cols);
        double inv = 1.0 / norms[r];
        for (int c = 0; c < unit.cols; ++c) out[c] = (g[c] - e[c] * ge) * inv;
    }
    return grad_in;
}

}  // namespace hvq
