// Plain-loop reference kernels. These mirror the OpenMP versions one to one
// and exist so differential tests and the benchmark have an independent
// implementation to compare against.

#include "hvq/error.hpp"
#include "hvq/kernels.hpp"

namespace hvq::kernels::serial {

SeqTensor conv1d3_forward(const SeqTensor& x, const std::vector<double>& kernel,
                          const std::vector<double>& bias, int cout, int dilation) {
    if (static_cast<int>(kernel.size()) != 3 * x.cols * cout ||
        static_cast<int>(bias.size()) != cout || dilation < 1)
        throw ConfigError("serial conv1d3: bad shapes");
    const int T = x.rows, cin = x.cols;
    SeqTensor y(T, cout);
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < cout; ++co) {
            double acc = bias[co];
            for (int k = 0; k < 3; ++k) {
                const int s = t + (k - 1) * dilation;
                if (s < 0 || s >= T) continue;
                for (int ci = 0; ci < cin; ++ci)
                    acc += kernel[(static_cast<size_t>(k) * cin + ci) * cout + co] * x.at(s, ci);
            }
            y.at(t, co) = acc;
        }
    return y;
}

void conv1d3_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& kernel, int cout, int dilation,
                      SeqTensor& grad_x, std::vector<double>& grad_kernel,
                      std::vector<double>& grad_bias) {
    const int T = x.rows, cin = x.cols;
    grad_x = SeqTensor(T, cin);
    grad_kernel.assign(kernel.size(), 0.0);
    grad_bias.assign(cout, 0.0);
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < 3; ++k) {
            const int s = t + (k - 1) * dilation;
            if (s < 0 || s >= T) continue;
            for (int ci = 0; ci < cin; ++ci)
                for (int co = 0; co < cout; ++co) {
                    const size_t w = (static_cast<size_t>(k) * cin + ci) * cout + co;
                    grad_x.at(s, ci) += kernel[w] * grad_out.at(t, co);
                    grad_kernel[w] += x.at(s, ci) * grad_out.at(t, co);
                }
        }
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < cout; ++co) grad_bias[co] += grad_out.at(t, co);
}

SeqTensor conv1x1_forward(const SeqTensor& x, const std::vector<double>& weight,
                          const std::vector<double>& bias, int cout) {
    if (static_cast<int>(weight.size()) != x.cols * cout || static_cast<int>(bias.size()) != cout)
        throw ConfigError("serial conv1x1: bad shapes");
    const int T = x.rows, cin = x.cols;
    SeqTensor y(T, cout);
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < cout; ++co) {
            double acc = bias[co];
            for (int ci = 0; ci < cin; ++ci) acc += weight[static_cast<size_t>(ci) * cout + co] * x.at(t, ci);
            y.at(t, co) = acc;
        }
    return y;
}

void conv1x1_backward(const SeqTensor& grad_out, const SeqTensor& x,
                      const std::vector<double>& weight, int cout,
                      SeqTensor& grad_x, std::vector<double>& grad_weight,
                      std::vector<double>& grad_bias) {
    const int T = x.rows, cin = x.cols;
    grad_x = SeqTensor(T, cin);
    grad_weight.assign(weight.size(), 0.0);
    grad_bias.assign(cout, 0.0);
    for (int t = 0; t < T; ++t)
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co) {
                grad_x.at(t, ci) += weight[static_cast<size_t>(ci) * cout + co] * grad_out.at(t, co);
                grad_weight[static_cast<size_t>(ci) * cout + co] += x.at(t, ci) * grad_out.at(t, co);
            }
    for (int t = 0; t < T; ++t)
        for (int co = 0; co < cout; ++co) grad_bias[co] += grad_out.at(t, co);
}

std::vector<int> cosine_argmax_rows(const SeqTensor& e, const SeqTensor& prototypes,
                                    uint64_t* zero_rows) {
    const int T = e.rows, P = prototypes.rows, D = e.cols;
    std::vector<int> idx(T, 0);
    for (int t = 0; t < T; ++t) {
        if (l2_norm(e.row(t), D) < 1e-12) {
            if (zero_rows) ++*zero_rows;
            continue;
        }
        int best = 0;
        double best_cos = -2.0;
        for (int p = 0; p < P; ++p) {
            double c = cosine(e.row(t), prototypes.row(p), D);
            if (c > best_cos) {
                best_cos = c;
                best = p;
            }
        }
        idx[t] = best;
    }
    return idx;
}

}  // namespace hvq::kernels::serial
