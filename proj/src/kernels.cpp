#include "hvq/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "hvq/error.hpp"

namespace hvq::kernels {

namespace {

void check_conv3_shapes(const SeqTensor& x, const std::vector<double>& kernel,
                        const std::vector<double>& bias, int cout) {
    if (x.rows < 1 || x.cols < 1) throw ConfigError("conv1d3: empty input");
    if (static_cast<int>(kernel.size()) != 3 * x.cols * cout)
        throw ConfigError("conv1d3: kernel size does not match 3*cin*cout");
    if (static_cast<int>(bias.size()) != cout)
        throw ConfigError("conv1d3: bias size does not match cout");
}

void check_conv1x1_shapes(const SeqTensor& x, const std::vector<double>& weight,
                          const std::vector<double>& bias, int cout) {
    if (x.rows < 1 || x.cols < 1) throw ConfigError("conv1x1: empty input");
    if (static_cast<int>(weight.size()) != x.cols * cout)
        throw ConfigError("conv1x1: weight size does not match cin*cout");
    if (static_cast<int>(bias.size()) != cout)
        throw ConfigError("conv1x1: bias size does not match cout");
}

}  // namespace

SeqTensor conv1d3_forward(const SeqTensor& x, const std::vector<double>& kernel,
                          const std::vector<double>& bias, int cout, int dilation) {
    check_conv3_shapes(x, kernel, bias, cout);
    if (dilation < 1) throw ConfigError("conv1d3: dilation must be >= 1");
    const int T = x.rows, cin = x.cols;
    SeqTensor y(T, cout);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
        double* out = y.row(t);
        for (int co = 0; co < cout; ++co) out[co] = bias[co];
        for (int k = 0; k < 3; ++k) {
            const int s = t + (k - 1) * dilation;
            if (s < 0 || s >= T) continue;
            const double* in = x.row(s);
            const double* w = kernel.data() + static_cast<size_t>(k) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
                const double xv = in[ci];
                const double* wr = w + static_cast<size_t>(ci) * cout;
                for (int co = 0; co < cout; ++co) out[co] += wr[co] * xv;
            }
        }
    }
    return y;
}

void conv1d3_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& kernel, int cout, int dilation,
                      SeqTensor& grad_x, std::vector<double>& grad_kernel,
                      std::vector<double>& grad_bias) {
    if (grad_out.rows != x.rows || grad_out.cols != cout)
        throw UsageError("conv1d3_backward: upstream shape does not match forward output");
    const int T = x.rows, cin = x.cols;
    grad_x = SeqTensor(T, cin);
    grad_kernel.assign(kernel.size(), 0.0);
    grad_bias.assign(cout, 0.0);

    // Input gradient as a gather: dL/dx[s] collects from output rows s -+ k*d.
    // Taps run from k=2 down to 0 so contributions arrive in ascending-t
    // order, which keeps the sums bitwise identical to the serial scatter.
#pragma omp parallel for schedule(static)
    for (int s = 0; s < T; ++s) {
        double* gx = grad_x.row(s);
        for (int k = 2; k >= 0; --k) {
            const int t = s - (k - 1) * dilation;
            if (t < 0 || t >= T) continue;
            const double* gy = grad_out.row(t);
            const double* w = kernel.data() + static_cast<size_t>(k) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
                const double* wr = w + static_cast<size_t>(ci) * cout;
                double acc = gx[ci];
                for (int co = 0; co < cout; ++co) acc += wr[co] * gy[co];
                gx[ci] = acc;
            }
        }
    }

    // Each (k,ci) slice of the kernel gradient owns its own serial sum over t.
#pragma omp parallel for schedule(static)
    for (int slice = 0; slice < 3 * cin; ++slice) {
        const int k = slice / cin;
        const int ci = slice % cin;
        double* gw = grad_kernel.data() + static_cast<size_t>(slice) * cout;
        for (int t = 0; t < T; ++t) {
            const int s = t + (k - 1) * dilation;
            if (s < 0 || s >= T) continue;
            const double xv = x.at(s, ci);
            if (xv == 0.0) continue;
            const double* gy = grad_out.row(t);
            for (int co = 0; co < cout; ++co) gw[co] += gy[co] * xv;
        }
    }

    for (int t = 0; t < T; ++t) {
        const double* gy = grad_out.row(t);
        for (int co = 0; co < cout; ++co) grad_bias[co] += gy[co];
    }
}

SeqTensor conv1x1_forward(const SeqTensor& x, const std::vector<double>& weight,
                          const std::vector<double>& bias, int cout) {
    check_conv1x1_shapes(x, weight, bias, cout);
    const int T = x.rows, cin = x.cols;
    SeqTensor y(T, cout);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
        const double* in = x.row(t);
        double* out = y.row(t);
        for (int co = 0; co < cout; ++co) out[co] = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
            const double xv = in[ci];
            const double* wr = weight.data() + static_cast<size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) out[co] += wr[co] * xv;
        }
    }
    return y;
}

void conv1x1_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& weight, int cout,
                      SeqTensor& grad_x, std::vector<double>& grad_weight,
                      std::vector<double>& grad_bias) {
    if (grad_out.rows != x.rows || grad_out.cols != cout)
        throw UsageError("conv1x1_backward: upstream shape does not match forward output");
    const int T = x.rows, cin = x.cols;
    grad_x = SeqTensor(T, cin);
    grad_weight.assign(weight.size(), 0.0);
    grad_bias.assign(cout, 0.0);

#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
        const double* gy = grad_out.row(t);
        double* gx = grad_x.row(t);
        for (int ci = 0; ci < cin; ++ci)
            gx[ci] = dot(weight.data() + static_cast<size_t>(ci) * cout, gy, cout);
    }

#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < cin; ++ci) {
        double* gw = grad_weight.data() + static_cast<size_t>(ci) * cout;
        for (int t = 0; t < T; ++t) {
            const double xv = x.at(t, ci);
            if (xv == 0.0) continue;
            const double* gy = grad_out.row(t);
            for (int co = 0; co < cout; ++co) gw[co] += gy[co] * xv;
        }
    }

    for (int t = 0; t < T; ++t) {
        const double* gy = grad_out.row(t);
        for (int co = 0; co < cout; ++co) grad_bias[co] += gy[co];
    }
}

SeqTensor relu_forward(const SeqTensor& x) {
    SeqTensor y(x.rows, x.cols);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < x.rows; ++t) {
        const double* in = x.row(t);
        double* out = y.row(t);
        for (int c = 0; c < x.cols; ++c) out[c] = in[c] > 0.0 ? in[c] : 0.0;
    }
    return y;
}

SeqTensor relu_backward(const SeqTensor& grad_out, const SeqTensor& cached_input) {
    if (!grad_out.same_shape(cached_input))
        throw UsageError("relu_backward: upstream shape does not match forward cache");
    SeqTensor g(grad_out.rows, grad_out.cols);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < grad_out.rows; ++t) {
        const double* gy = grad_out.row(t);
        const double* in = cached_input.row(t);
        double* out = g.row(t);
        for (int c = 0; c < grad_out.cols; ++c) out[c] = in[c] > 0.0 ? gy[c] : 0.0;
    }
    return g;
}

std::vector<uint8_t> dropout_mask(size_t n, double rate, std::mt19937_64& rng) {
    std::vector<uint8_t> mask(n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (size_t i = 0; i < n; ++i) mask[i] = unit(rng) >= rate ? 1 : 0;
    return mask;
}

void dropout_apply(SeqTensor& x, const std::vector<uint8_t>& mask, double rate) {
    if (mask.size() != x.size()) throw UsageError("dropout_apply: mask size mismatch");
    const double scale = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < mask.size(); ++i) x.data[i] = mask[i] ? x.data[i] * scale : 0.0;
}

void dropout_backward(SeqTensor& grad, const std::vector<uint8_t>& mask, double rate) {
    if (mask.size() != grad.size()) throw UsageError("dropout_backward: mask size mismatch");
    const double scale = 1.0 / (1.0 - rate);
    for (size_t i = 0; i < mask.size(); ++i) grad.data[i] = mask[i] ? grad.data[i] * scale : 0.0;
}

std::vector<int> cosine_argmax_rows(const SeqTensor& e, const SeqTensor& prototypes,
                                    uint64_t* zero_rows) {
    if (e.cols != prototypes.cols)
        throw ConfigError("cosine_argmax_rows: dimension mismatch between inputs and prototypes");
    const int T = e.rows, P = prototypes.rows, D = e.cols;
    std::vector<double> proto_norm(P);
    for (int p = 0; p < P; ++p) proto_norm[p] = l2_norm(prototypes.row(p), D);
    std::vector<int> idx(T, 0);
    uint64_t zeros = 0;
#pragma omp parallel for schedule(static) reduction(+ : zeros)
    for (int t = 0; t < T; ++t) {
        const double* v = e.row(t);
        const double vn = l2_norm(v, D);
        if (vn < 1e-12) {
            ++zeros;
            idx[t] = 0;
            continue;
        }
        int best = 0;
        double best_cos = -2.0;
        for (int p = 0; p < P; ++p) {
            double c = proto_norm[p] < 1e-12 ? 0.0 : dot(v, prototypes.row(p), D) / (vn * proto_norm[p]);
            if (c > best_cos) {
                best_cos = c;
                best = p;
            }
        }
        idx[t] = best;
    }
    if (zero_rows) *zero_rows += zeros;
    return idx;
}

}  // namespace hvq::kernels
