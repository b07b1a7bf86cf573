#pragma once

#include <atomic>
#include <cstdint>
#include <random>
#include <vector>

#include "hvq/tensor.hpp"

namespace hvq {

enum class EmaVariant { paper, running_sum };

// One level of the hierarchy: prototype rows plus the running assignment
// mass N̂ per prototype. Level 1 is the finest (Z); its prototypes are kept
// at unit l2 norm. `generation` increments on every mutation so downstream
// consumers can detect stale quantization results.
struct Codebook {
    SeqTensor prototypes;          // P x D
    std::vector<double> mass;      // N̂, one per prototype
    SeqTensor ema_sum;             // running numerator, used by running_sum variant
    int level = 1;                 // 1 = fine Z, 2 = coarse Q, 3 = extra-coarse
    double reset_threshold = 1.0;
    uint64_t generation = 0;

    Codebook() = default;
    Codebook(const Codebook& o);
    Codebook& operator=(const Codebook& o);

    int size() const { return prototypes.rows; }
    int dim() const { return prototypes.cols; }
    uint64_t zero_assign_count() const { return zero_assigns_.load(); }

    mutable std::atomic<uint64_t> zero_assigns_{0};  // diagnostic counter
};

struct HvqConfig {
    int K = 0;                    // number of action clusters (coarsest level size)
    std::vector<int> alpha = {2};  // fine-to-coarse multiplicity per boundary, finest first
    int levels = 2;               // 1, 2 or 3
    double ema_decay = 0.8;       // β
    EmaVariant ema_variant = EmaVariant::paper;
    double reset_threshold_fine = 3.0;
    double reset_threshold_coarse = 1.0;

    // Prototype counts finest to coarsest, e.g. K=4, alpha={2}, levels=2
    // gives {8, 4}.
    std::vector<int> level_sizes() const;
    void validate() const;
};

struct QuantizeResult {
    // level_index[l][t]: prototype index of frame t at level l (0 = finest).
    std::vector<std::vector<int>> level_index;
    std::vector<uint64_t> book_generation;

    const std::vector<int>& fine() const { return level_index.front(); }
    const std::vector<int>& coarse() const { return level_index.back(); }
    int frames() const { return level_index.empty() ? 0 : static_cast<int>(level_index[0].size()); }
};

// Index of the prototype with the highest cosine similarity, lowest index on
// ties. A zero vector maps to index 0 and bumps the book's diagnostic counter.
int assign(const double* vec, int dim, const Codebook& book);

// Frame -> fine prototype, then prototype -> next-level prototype. The
// cross-level association is computed once per prototype, not per frame.
QuantizeResult quantize_hierarchy(const SeqTensor& embeddings, const std::vector<Codebook>& books);

// Exponential-moving-average prototype update from one batch. `assignment`
// holds the per-row prototype index for `inputs`. Level-1 prototypes are
// re-normalized to unit length afterwards. Prototypes with no assigned rows
// keep their value while their mass decays by β.
void ema_update(Codebook& book, const SeqTensor& inputs, const std::vector<int>& assignment,
                double beta, EmaVariant variant = EmaVariant::paper);

// Replaces every prototype whose mass fell below the book's threshold with a
// uniformly sampled row of `batch_inputs` (unit-normalized at level 1) and
// resets its mass to 1. Returns the number of replacements.
int reset_dead(Codebook& book, const SeqTensor& batch_inputs, std::mt19937_64& rng);

// K-means initialization from the first training video: the finest level
// clusters the embeddings, each coarser level clusters the prototypes of the
// level below. Falls back to sampling distinct frames when there are fewer
// frames than centroids (returns fallback=true).
std::vector<Codebook> init_codebooks_kmeans(const SeqTensor& embeddings, const HvqConfig& config,
                                            uint64_t seed, bool* fallback = nullptr);

struct CommitLosses {
    double commit_z = 0.0;  // sum_t ||e_t - sg[z_t]||^2
    double commit_q = 0.0;  // sum over coarser pairs of ||lower_t - sg[upper_t]||^2
    SeqTensor grad_z;       // d commit_z / dE = 2(e - z)
    SeqTensor grad_q;       // d commit_q / dE through the straight-through identity
};

// Commitment losses of Eq. 6 with stop-gradient on the prototypes. The
// codebooks receive no gradient; the gradient reaches the embeddings
// directly for commit_z and via the straight-through identity for commit_q.
// Throws UsageError if `result` is stale with respect to `books`.
CommitLosses commitment_losses(const SeqTensor& embeddings, const QuantizeResult& result,
                               const std::vector<Codebook>& books);

}  // namespace hvq
