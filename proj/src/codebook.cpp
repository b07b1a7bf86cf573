#include "hvq/codebook.hpp"

#include <algorithm>
#include <string>

#include "hvq/error.hpp"
#include "hvq/kernels.hpp"
#include "hvq/kmeans.hpp"

namespace hvq {

Codebook::Codebook(const Codebook& o)
    : prototypes(o.prototypes),
      mass(o.mass),
      ema_sum(o.ema_sum),
      level(o.level),
      reset_threshold(o.reset_threshold),
      generation(o.generation),
      zero_assigns_(o.zero_assigns_.load()) {}

Codebook& Codebook::operator=(const Codebook& o) {
    prototypes = o.prototypes;
    mass = o.mass;
    ema_sum = o.ema_sum;
    level = o.level;
    reset_threshold = o.reset_threshold;
    generation = o.generation;
    zero_assigns_.store(o.zero_assigns_.load());
    return *this;
}

std::vector<int> HvqConfig::level_sizes() const {
    validate();
    std::vector<int> sizes(levels);
    sizes[levels - 1] = K;
    for (int l = levels - 2; l >= 0; --l) sizes[l] = sizes[l + 1] * alpha[l];
    return sizes;
}

void HvqConfig::validate() const {
    if (K < 1) throw ConfigError("hvq: K must be >= 1");
    if (levels < 1 || levels > 3) throw ConfigError("hvq: levels must be 1, 2 or 3");
    if (static_cast<int>(alpha.size()) < levels - 1)
        throw ConfigError("hvq: need alpha for every level boundary (levels-1 values)");
    for (int l = 0; l < levels - 1; ++l)
        if (alpha[l] < 1) throw ConfigError("hvq: alpha must be >= 1");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("hvq: ema_decay must lie in (0,1)");
}

int assign(const double* vec, int dim, const Codebook& book) {
    if (dim != book.dim()) throw ConfigError("assign: vector dimension does not match codebook");
    if (l2_norm(vec, dim) < 1e-12) {
        book.zero_assigns_.fetch_add(1);
        return 0;
    }
    int best = 0;
    double best_cos = -2.0;
    for (int p = 0; p < book.size(); ++p) {
        const double c = cosine(vec, book.prototypes.row(p), dim);
        if (c > best_cos) {
            best_cos = c;
            best = p;
        }
    }
    return best;
}

QuantizeResult quantize_hierarchy(const SeqTensor& embeddings, const std::vector<Codebook>& books) {
    if (books.empty()) throw ConfigError("quantize_hierarchy: no codebooks");
    for (const Codebook& b : books)
        if (b.dim() != embeddings.cols)
            throw ConfigError("quantize_hierarchy: codebook dimension mismatch");

    QuantizeResult result;
    result.level_index.resize(books.size());
    result.book_generation.reserve(books.size());
    for (const Codebook& b : books) result.book_generation.push_back(b.generation);

    uint64_t zeros = 0;
    result.level_index[0] =
        kernels::cosine_argmax_rows(embeddings, books[0].prototypes, &zeros);
    if (zeros) books[0].zero_assigns_.fetch_add(zeros);

    // The cross-level association only depends on the prototypes, so compute
    // it once per prototype and look it up per frame.
    for (size_t l = 1; l < books.size(); ++l) {
        const Codebook& lower = books[l - 1];
        std::vector<int> proto_map(lower.size());
        for (int p = 0; p < lower.size(); ++p)
            proto_map[p] = assign(lower.prototypes.row(p), lower.dim(), books[l]);
        std::vector<int>& out = result.level_index[l];
        out.resize(embeddings.rows);
        const std::vector<int>& below = result.level_index[l - 1];
        for (int t = 0; t < embeddings.rows; ++t) out[t] = proto_map[below[t]];
    }
    return result;
}

void ema_update(Codebook& book, const SeqTensor& inputs, const std::vector<int>& assignment,
                double beta, EmaVariant variant) {
    if (inputs.cols != book.dim()) throw ConfigError("ema_update: input dimension mismatch");
    if (static_cast<int>(assignment.size()) != inputs.rows)
        throw ConfigError("ema_update: assignment length does not match inputs");

    const int P = book.size(), D = book.dim();
    SeqTensor sums(P, D);
    std::vector<double> counts(P, 0.0);
    for (int t = 0; t < inputs.rows; ++t) {
        const int j = assignment[t];
        if (j < 0 || j >= P) throw ConfigError("ema_update: assignment index out of range");
        double* s = sums.row(j);
        const double* v = inputs.row(t);
        for (int c = 0; c < D; ++c) s[c] += v[c];
        counts[j] += 1.0;
    }

    if (book.ema_sum.rows != P) book.ema_sum = SeqTensor(P, D);

    for (int j = 0; j < P; ++j) {
        const double new_mass = beta * book.mass[j] + (1.0 - beta) * counts[j];
        double* z = book.prototypes.row(j);
        if (variant == EmaVariant::paper) {
            // ẑ = (β z + (1-β) Σ inputs) / N̂, applied only when the
            // prototype saw assignments; otherwise it keeps its value and
            // only the mass decays.
            if (counts[j] > 0.0 && new_mass > 0.0) {
                const double inv = 1.0 / new_mass;
                const double* s = sums.row(j);
                for (int c = 0; c < D; ++c) z[c] = (beta * z[c] + (1.0 - beta) * s[c]) * inv;
            }
        } else {
            double* acc = book.ema_sum.row(j);
            const double* s = sums.row(j);
            for (int c = 0; c < D; ++c) acc[c] = beta * acc[c] + (1.0 - beta) * s[c];
            if (new_mass > 1e-12) {
                const double inv = 1.0 / new_mass;
                for (int c = 0; c < D; ++c) z[c] = acc[c] * inv;
            }
        }
        book.mass[j] = new_mass;
    }

    if (book.level == 1) {
        for (int j = 0; j < P; ++j) {
            double* z = book.prototypes.row(j);
            const double n = l2_norm(z, D);
            if (n < 1e-12) continue;
            const double inv = 1.0 / n;
            for (int c = 0; c < D; ++c) z[c] *= inv;
        }
    }
    ++book.generation;
}

int reset_dead(Codebook& book, const SeqTensor& batch_inputs, std::mt19937_64& rng) {
    if (batch_inputs.rows < 1) throw ConfigError("reset_dead: empty batch");
    if (batch_inputs.cols != book.dim()) throw ConfigError("reset_dead: input dimension mismatch");
    int resets = 0;
    std::uniform_int_distribution<int> pick(0, batch_inputs.rows - 1);
    for (int j = 0; j < book.size(); ++j) {
        if (book.mass[j] >= book.reset_threshold) continue;
        const double* src = batch_inputs.row(pick(rng));
        double* z = book.prototypes.row(j);
        for (int c = 0; c < book.dim(); ++c) z[c] = src[c];
        if (book.level == 1) {
            const double n = l2_norm(z, book.dim());
            if (n > 1e-12)
                for (int c = 0; c < book.dim(); ++c) z[c] /= n;
        }
        book.mass[j] = 1.0;
        if (book.ema_sum.rows == book.size()) {
            double* acc = book.ema_sum.row(j);
            for (int c = 0; c < book.dim(); ++c) acc[c] = z[c];
        }
        ++resets;
    }
    if (resets) ++book.generation;
    return resets;
}

std::vector<Codebook> init_codebooks_kmeans(const SeqTensor& embeddings, const HvqConfig& config,
                                            uint64_t seed, bool* fallback) {
    config.validate();
    if (embeddings.rows < 1) throw ConfigError("init_codebooks_kmeans: no embeddings");
    const std::vector<int> sizes = config.level_sizes();
    if (fallback) *fallback = false;

    std::vector<Codebook> books;
    const SeqTensor* source = &embeddings;
    for (int l = 0; l < config.levels; ++l) {
        Codebook book;
        book.level = l + 1;
        book.reset_threshold = l == 0 ? config.reset_threshold_fine : config.reset_threshold_coarse;
        if (source->rows >= sizes[l]) {
            book.prototypes = kmeans_best(*source, sizes[l], seed + static_cast<uint64_t>(l));
        } else {
            // Fewer samples than centroids: sample distinct rows, repeating
            // from the start once exhausted.
            if (fallback) *fallback = true;
            book.prototypes = SeqTensor(sizes[l], source->cols);
            for (int p = 0; p < sizes[l]; ++p) {
                const double* src = source->row(p % source->rows);
                for (int c = 0; c < source->cols; ++c) book.prototypes.at(p, c) = src[c];
            }
        }
        if (l == 0)
            for (int p = 0; p < book.prototypes.rows; ++p) {
                double* z = book.prototypes.row(p);
                const double n = l2_norm(z, book.prototypes.cols);
                if (n > 1e-12)
                    for (int c = 0; c < book.prototypes.cols; ++c) z[c] /= n;
            }
        book.mass.assign(sizes[l], 1.0);
        book.ema_sum = book.prototypes;  // consistent with mass 1
        books.push_back(std::move(book));
        source = &books.back().prototypes;
    }
    return books;
}

CommitLosses commitment_losses(const SeqTensor& embeddings, const QuantizeResult& result,
                               const std::vector<Codebook>& books) {
    if (result.level_index.size() != books.size())
        throw UsageError("commitment_losses: result does not match codebook count");
    for (size_t l = 0; l < books.size(); ++l)
        if (result.book_generation[l] != books[l].generation)
            throw UsageError("commitment_losses: stale QuantizeResult (codebook level " +
                             std::to_string(l + 1) + " changed since quantization)");
    if (result.frames() != embeddings.rows)
        throw UsageError("commitment_losses: frame count mismatch");

    const int T = embeddings.rows, D = embeddings.cols;
    CommitLosses out;
    out.grad_z = SeqTensor(T, D);
    out.grad_q = SeqTensor(T, D);

    for (int t = 0; t < T; ++t) {
        const double* e = embeddings.row(t);
        const double* z = books[0].prototypes.row(result.level_index[0][t]);
        double* gz = out.grad_z.row(t);
        for (int c = 0; c < D; ++c) {
            const double d = e[c] - z[c];
            out.commit_z += d * d;
            gz[c] = 2.0 * d;
        }
    }

    // Coarser pairs: || lower_t - sg[upper_t] ||^2. The lower vector is a
    // codebook entry, so its gradient reaches the embedding through the
    // straight-through identity.
    for (size_t l = 0; l + 1 < books.size(); ++l) {
        for (int t = 0; t < T; ++t) {
            const double* lo = books[l].prototypes.row(result.level_index[l][t]);
            const double* hi = books[l + 1].prototypes.row(result.level_index[l + 1][t]);
            double* gq = out.grad_q.row(t);
            for (int c = 0; c < D; ++c) {
                const double d = lo[c] - hi[c];
                out.commit_q += d * d;
                gq[c] += 2.0 * d;
            }
        }
    }
    return out;
}

}  // namespace hvq
