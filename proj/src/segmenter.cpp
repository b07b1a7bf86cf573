#include "hvq/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hvq/error.hpp"

namespace hvq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void softmax_rows(SeqTensor& x) {
    for (int t = 0; t < x.rows; ++t) {
        double* row = x.row(t);
        double mx = row[0];
        for (int c = 1; c < x.cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < x.cols; ++c) row[c] /= sum;
    }
}

SeqTensor cosine_matrix(const SeqTensor& a, const SeqTensor& b) {
    SeqTensor m(a.rows, b.rows);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) m.at(i, j) = cosine(a.row(i), b.row(j), a.cols);
    return m;
}

SeqTensor matmul(const SeqTensor& a, const SeqTensor& b) {
    SeqTensor out(a.rows, b.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i) {
        double* dst = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double v = a.at(i, k);
            const double* src = b.row(k);
            for (int j = 0; j < b.cols; ++j) dst[j] += v * src[j];
        }
    }
    return out;
}

double log_poisson(double len, double lambda) {
    lambda = std::max(lambda, 1e-12);
    return len * std::log(lambda) - lambda - std::lgamma(len + 1.0);
}

// Digamma via the recurrence into the asymptotic region.
double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
    return result;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// True iff `labels` visits exactly the clusters in `order`, in order, one
// contiguous run each.
bool is_traversal(const std::vector<int>& labels, const std::vector<int>& order) {
    if (labels.empty() || order.empty() || labels.front() != order.front()) return false;
    size_t seg = 0;
    for (size_t t = 1; t < labels.size(); ++t) {
        if (labels[t] == order[seg]) continue;
        if (seg + 1 < order.size() && labels[t] == order[seg + 1]) {
            ++seg;
            continue;
        }
        return false;
    }
    return seg == order.size() - 1;
}

std::vector<double> log_probs_for(const SoftAssignment& probs, int t, const std::vector<int>& order) {
    std::vector<double> lp(order.size());
    for (size_t s = 0; s < order.size(); ++s)
        lp[s] = std::log(std::max(probs.probs.at(t, order[s]), 1e-300));
    return lp;
}

}  // namespace

SoftAssignment soft_assign(const SeqTensor& embeddings, const std::vector<Codebook>& books,
                           SimMode mode) {
    if (books.empty() || books[0].size() < 1) throw ConfigError("soft_assign: empty codebook");
    SoftAssignment out;
    if (mode == SimMode::product) {
        // sim = cos(E,Z) * cos(Z,Q2) * ... * cos(Q_{L-1},Q_L)
        SeqTensor sim = cosine_matrix(embeddings, books[0].prototypes);
        for (size_t l = 0; l + 1 < books.size(); ++l)
            sim = matmul(sim, cosine_matrix(books[l].prototypes, books[l + 1].prototypes));
        out.probs = std::move(sim);
    } else {
        // Printed form: sum_j [(1 - d(e,z_j)) + (1 - d(z_j,q_i))]. The first
        // term is constant in i, so rows differ only by a softmax shift.
        const Codebook& fine = books.front();
        const Codebook& coarse = books.back();
        SeqTensor cos_ez = cosine_matrix(embeddings, fine.prototypes);
        SeqTensor cos_zq = cosine_matrix(fine.prototypes, coarse.prototypes);
        out.probs = SeqTensor(embeddings.rows, coarse.size());
        for (int t = 0; t < embeddings.rows; ++t) {
            double frame_term = 0.0;
            for (int j = 0; j < fine.size(); ++j) frame_term += cos_ez.at(t, j);
            for (int i = 0; i < coarse.size(); ++i) {
                double proto_term = 0.0;
                for (int j = 0; j < fine.size(); ++j) proto_term += cos_zq.at(j, i);
                out.probs.at(t, i) = frame_term + proto_term;
            }
        }
    }
    softmax_rows(out.probs);
    return out;
}

ClusterOrder cluster_order(const std::vector<std::vector<int>>& hard_assignments,
                           int num_clusters) {
    std::vector<double> time_sum(num_clusters, 0.0);
    std::vector<long> counts(num_clusters, 0);
    for (const auto& video : hard_assignments) {
        const double T = static_cast<double>(video.size());
        for (size_t t = 0; t < video.size(); ++t) {
            time_sum[video[t]] += static_cast<double>(t) / T;
            ++counts[video[t]];
        }
    }
    ClusterOrder out;
    for (int k = 0; k < num_clusters; ++k)
        if (counts[k] > 0) out.order.push_back(k);
    if (out.order.empty()) throw DataError("cluster_order: no assigned frames");
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
        return time_sum[a] / counts[a] < time_sum[b] / counts[b];
    });
    return out;
}

LengthPrior length_prior(const std::vector<std::vector<int>>& hard_assignments, int num_clusters) {
    if (hard_assignments.empty()) throw DataError("length_prior: no videos");
    LengthPrior out;
    out.pi.assign(num_clusters, 0.0);
    for (const auto& video : hard_assignments) {
        std::vector<double> frac(num_clusters, 0.0);
        for (int k : video) frac[k] += 1.0;
        for (int k = 0; k < num_clusters; ++k)
            out.pi[k] += frac[k] / static_cast<double>(video.size());
    }
    double total = 0.0;
    for (double& p : out.pi) {
        p /= static_cast<double>(hard_assignments.size());
        total += p;
    }
    if (total <= 0.0) throw DataError("length_prior: no assigned frames");
    for (double& p : out.pi) p /= total;
    return out;
}

std::vector<int> dp_decode(const SoftAssignment& probs, const ClusterOrder& order,
                           const LengthPrior& prior, double gamma) {
    const int T = probs.probs.rows;
    const int S = static_cast<int>(order.order.size());
    if (S < 1) throw ConfigError("dp_decode: empty cluster order");
    if (T < S)
        throw DataError("dp_decode: video with " + std::to_string(T) +
                        " frames cannot visit " + std::to_string(S) + " clusters");

    // cum[s][t] = sum of log p(order[s] | u) for u < t
    std::vector<std::vector<double>> cum(S, std::vector<double>(T + 1, 0.0));
    for (int s = 0; s < S; ++s)
        for (int t = 0; t < T; ++t)
            cum[s][t + 1] =
                cum[s][t] + std::log(std::max(probs.probs.at(t, order.order[s]), 1e-300));

    std::vector<std::vector<double>> best(S, std::vector<double>(T + 1, kNegInf));
    std::vector<std::vector<int>> from(S, std::vector<int>(T + 1, -1));
    for (int t = 1; t <= T; ++t)
        best[0][t] = cum[0][t] + gamma * log_poisson(t, prior.pi[order.order[0]] * T);
    for (int s = 1; s < S; ++s) {
        const double lambda = prior.pi[order.order[s]] * T;
#pragma omp parallel for schedule(static)
        for (int t = s + 1; t <= T; ++t) {
            double b = kNegInf;
            int arg = -1;
            for (int cut = s; cut < t; ++cut) {
                if (best[s - 1][cut] == kNegInf) continue;
                const double val = best[s - 1][cut] + (cum[s][t] - cum[s][cut]) +
                                   gamma * log_poisson(t - cut, lambda);
                if (val > b) {
                    b = val;
                    arg = cut;
                }
            }
            best[s][t] = b;
            from[s][t] = arg;
        }
    }

    std::vector<int> labels(T);
    int t = T;
    for (int s = S - 1; s >= 0; --s) {
        const int start = s == 0 ? 0 : from[s][t];
        for (int u = start; u < t; ++u) labels[u] = order.order[s];
        t = start;
    }
    return labels;
}

double dp_objective(const SoftAssignment& probs, const ClusterOrder& order,
                    const LengthPrior& prior, double gamma, const std::vector<int>& labels) {
    const int T = probs.probs.rows;
    if (static_cast<int>(labels.size()) != T) return kNegInf;
    if (!is_traversal(labels, order.order)) return kNegInf;
    double obj = 0.0;
    for (int t = 0; t < T; ++t) obj += std::log(std::max(probs.probs.at(t, labels[t]), 1e-300));
    int start = 0;
    for (int t = 1; t <= T; ++t) {
        if (t == T || labels[t] != labels[start]) {
            obj += gamma * log_poisson(t - start, prior.pi[labels[start]] * T);
            start = t;
        }
    }
    return obj;
}

namespace {

struct FifaState {
    std::vector<double> lengths;     // T * softmax(lambda)
    std::vector<double> boundaries;  // cumulative lengths
    double energy = 0.0;
};

FifaState fifa_evaluate(const std::vector<double>& lambda, const SeqTensor& logp,
                        const std::vector<double>& prior_lambda, double sharpness, double gamma) {
    const int T = logp.rows;
    const int S = logp.cols;
    FifaState st;
    st.lengths.resize(S);
    st.boundaries.resize(S);
    double mx = lambda[0];
    for (int k = 1; k < S; ++k) mx = std::max(mx, lambda[k]);
    double denom = 0.0;
    for (int k = 0; k < S; ++k) denom += std::exp(lambda[k] - mx);
    double acc = 0.0;
    for (int k = 0; k < S; ++k) {
        st.lengths[k] = T * std::exp(lambda[k] - mx) / denom;
        acc += st.lengths[k];
        st.boundaries[k] = acc;
    }

    const double width = sharpness * T;
    double e1 = 0.0;
    for (int t = 0; t < T; ++t) {
        double left = sigmoid(t / width);  // sigma((t - b_{-1}) / width), b_{-1} = 0
        for (int k = 0; k < S; ++k) {
            const double right = sigmoid((t - st.boundaries[k]) / width);
            e1 -= (left - right) * logp.at(t, k);
            left = right;
        }
    }
    double e2 = 0.0;
    for (int k = 0; k < S; ++k) e2 -= gamma * log_poisson(st.lengths[k], prior_lambda[k]);
    st.energy = e1 + e2;
    return st;
}

std::vector<double> fifa_gradient(const FifaState& st, const SeqTensor& logp,
                                  const std::vector<double>& prior_lambda, double sharpness,
                                  double gamma) {
    const int T = logp.rows;
    const int S = logp.cols;
    const double width = sharpness * T;

    // dE1/db_j: boundary j separates segment j from j+1.
    std::vector<double> g_b(S, 0.0);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < S; ++j) {
            const double sj = sigmoid((t - st.boundaries[j]) / width);
            const double ds = sj * (1.0 - sj) / width;
            const double next = j + 1 < S ? logp.at(t, j + 1) : 0.0;
            g_b[j] -= ds * (logp.at(t, j) - next);
        }

    // dE/dlen_i = sum_{j >= i} dE/db_j + length-prior term
    std::vector<double> g_len(S, 0.0);
    double suffix = 0.0;
    for (int j = S - 1; j >= 0; --j) {
        suffix += g_b[j];
        g_len[j] = suffix;
    }
    for (int k = 0; k < S; ++k)
        g_len[k] -= gamma * (std::log(std::max(prior_lambda[k], 1e-12)) -
                             digamma(st.lengths[k] + 1.0));

    // through len = T * softmax(lambda)
    std::vector<double> softmax(S);
    for (int k = 0; k < S; ++k) softmax[k] = st.lengths[k] / T;
    double inner = 0.0;
    for (int k = 0; k < S; ++k) inner += softmax[k] * g_len[k];
    std::vector<double> g(S);
    for (int k = 0; k < S; ++k) g[k] = T * softmax[k] * (g_len[k] - inner);
    return g;
}

std::vector<int> labels_from_boundaries(const std::vector<double>& boundaries,
                                        const std::vector<int>& order, int T) {
    const int S = static_cast<int>(order.size());
    std::vector<int> cut(S);
    int prev = 0;
    for (int k = 0; k < S; ++k) {
        int c = static_cast<int>(std::lround(boundaries[k]));
        c = std::max(c, prev + 1);
        c = std::min(c, T - (S - 1 - k));
        cut[k] = c;
        prev = c;
    }
    cut[S - 1] = T;
    std::vector<int> labels(T);
    prev = 0;
    for (int k = 0; k < S; ++k) {
        for (int t = prev; t < cut[k]; ++t) labels[t] = order[k];
        prev = cut[k];
    }
    return labels;
}

}  // namespace

std::vector<int> fifa_decode(const SoftAssignment& probs, const ClusterOrder& order,
                             const LengthPrior& prior, const FifaConfig& config, double gamma,
                             FifaTrace* trace) {
    const int T = probs.probs.rows;
    const int S = static_cast<int>(order.order.size());
    if (S < 1) throw ConfigError("fifa_decode: empty cluster order");
    if (T < S)
        throw DataError("fifa_decode: video with " + std::to_string(T) +
                        " frames cannot visit " + std::to_string(S) + " clusters");
    if (!(config.learning_rate > 0) || !(config.sharpness > 0) || config.epochs < 0)
        throw ConfigError("fifa_decode: learning_rate and sharpness must be positive");

    // Frame memberships are normalized so each frame contributes unit mass;
    // otherwise shrinking the total mask coverage lowers the energy no
    // matter where the boundaries sit. The normalizer telescopes to
    // sigma(t/w) - sigma((t-T)/w), which is constant in the parameters
    // (lengths always sum to T), so it folds into the per-frame log-probs.
    SeqTensor logp(T, S);
    const double norm_width = config.sharpness * T;
    for (int t = 0; t < T; ++t) {
        const double mass = sigmoid(t / norm_width) - sigmoid((t - T) / norm_width);
        const std::vector<double> lp = log_probs_for(probs, t, order.order);
        for (int s = 0; s < S; ++s) logp.at(t, s) = lp[s] / mass;
    }
    std::vector<double> prior_lambda(S);
    for (int s = 0; s < S; ++s) prior_lambda[s] = prior.pi[order.order[s]] * T;

    std::vector<double> lambda(S);
    for (int s = 0; s < S; ++s) lambda[s] = std::log(std::max(prior.pi[order.order[s]], 1e-12));

    FifaState st = fifa_evaluate(lambda, logp, prior_lambda, config.sharpness, gamma);
    if (trace) trace->energy.push_back(st.energy);
    double lr = config.learning_rate;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<double> g =
            fifa_gradient(st, logp, prior_lambda, config.sharpness, gamma);
        std::vector<double> candidate(S);
        for (int k = 0; k < S; ++k) candidate[k] = lambda[k] - lr * g[k];
        FifaState next = fifa_evaluate(candidate, logp, prior_lambda, config.sharpness, gamma);
        if (config.reject_steps && next.energy > st.energy) {
            lr *= 0.5;
        } else {
            lambda = std::move(candidate);
            st = std::move(next);
        }
        if (trace) trace->energy.push_back(st.energy);
    }

    // Label by mask argmax; fall back to the rounded boundaries when the
    // argmax skips a short segment and breaks the traversal structure.
    std::vector<int> labels(T);
    const double width = config.sharpness * T;
    for (int t = 0; t < T; ++t) {
        double left = sigmoid(t / width);
        double best = kNegInf;
        int arg = 0;
        for (int k = 0; k < S; ++k) {
            const double right = sigmoid((t - st.boundaries[k]) / width);
            const double m = left - right;
            if (m > best) {
                best = m;
                arg = k;
            }
            left = right;
        }
        labels[t] = order.order[arg];
    }
    if (!is_traversal(labels, order.order))
        labels = labels_from_boundaries(st.boundaries, order.order, T);
    return labels;
}

ActivityInference infer_assignments(TcnModel& model, std::vector<Codebook>& books,
                                    const std::vector<VideoFeatures>& videos) {
    ActivityInference out;
    for (const VideoFeatures& v : videos) {
        SeqTensor e = tcn_encode(model, v.frames, false, nullptr, nullptr);
        l2_normalize_rows(e);
        QuantizeResult q = quantize_hierarchy(e, books);
        out.hard.push_back(q.coarse());
        out.embeddings.push_back(std::move(e));
    }
    const int K = books.back().size();
    out.order = cluster_order(out.hard, K);
    out.prior = length_prior(out.hard, K);
    return out;
}

std::vector<int> segment_video(TcnModel& model, std::vector<Codebook>& books,
                               const SeqTensor& video, DecodeMethod method,
                               const ClusterOrder& order, const LengthPrior& prior,
                               const DecodeOptions& options) {
    SeqTensor e = tcn_encode(model, video, false, nullptr, nullptr);
    l2_normalize_rows(e);
    SoftAssignment probs = soft_assign(e, books, options.sim_mode);
    switch (method) {
        case DecodeMethod::argmax: {
            std::vector<int> labels(probs.probs.rows);
            for (int t = 0; t < probs.probs.rows; ++t) {
                const double* row = probs.probs.row(t);
                int arg = 0;
                for (int k = 1; k < probs.probs.cols; ++k)
                    if (row[k] > row[arg]) arg = k;
                labels[t] = arg;
            }
            return labels;
        }
        case DecodeMethod::dp:
            return dp_decode(probs, order, prior, options.gamma);
        case DecodeMethod::fifa:
            return fifa_decode(probs, order, prior, options.fifa, options.gamma);
    }
    throw UsageError("segment_video: unknown decoder");
}

}  // namespace hvq
