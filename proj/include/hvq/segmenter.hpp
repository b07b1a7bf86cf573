#pragma once

#include <vector>

#include "hvq/codebook.hpp"
#include "hvq/dataset.hpp"
#include "hvq/tcn.hpp"

namespace hvq {

enum class SimMode { product, literal };

struct SoftAssignment {
    SeqTensor probs;  // T x K, rows sum to 1
};

struct ClusterOrder {
    std::vector<int> order;  // non-empty cluster ids, ascending mean timestamp
};

struct LengthPrior {
    std::vector<double> pi;  // per cluster id; zero for empty clusters, sums to 1
};

struct FifaConfig {
    double learning_rate = 6e-6;
    double sharpness = 0.1;
    int epochs = 100;
    bool reject_steps = false;  // reject energy-raising steps and halve the step size
};

enum class DecodeMethod { fifa, dp, argmax };

struct DecodeOptions {
    SimMode sim_mode = SimMode::product;
    double gamma = 0.05;  // weight of the length-prior energy
    FifaConfig fifa;
};

// Per-frame soft assignment to the K coarse clusters. `product` chains the
// cosine similarities across the hierarchy; `literal` adds the frame and
// prototype terms instead (which makes every row identical up to softmax
// shift, kept for comparison). Rows are softmaxed.
SoftAssignment soft_assign(const SeqTensor& embeddings, const std::vector<Codebook>& books,
                           SimMode mode);

// Clusters sorted by the mean normalized timestamp t/T of their frames over
// all videos; clusters with no frames are excluded.
ClusterOrder cluster_order(const std::vector<std::vector<int>>& hard_assignments, int num_clusters);

// Mean per-video frame fraction per cluster, renormalized over non-empty
// clusters.
LengthPrior length_prior(const std::vector<std::vector<int>>& hard_assignments, int num_clusters);

// Exact maximizer of
//   sum_t log p(k_t|t) + gamma * sum_k log Poisson(len_k; pi_k * T)
// over segmentations that visit the ordered clusters once each, contiguously,
// with length >= 1. O(T^2 * K) dynamic program.
std::vector<int> dp_decode(const SoftAssignment& probs, const ClusterOrder& order,
                           const LengthPrior& prior, double gamma);

// Objective value of a given labeling under the dp_decode criterion;
// -infinity if the labeling is not a valid traversal of `order`.
double dp_objective(const SoftAssignment& probs, const ClusterOrder& order,
                    const LengthPrior& prior, double gamma, const std::vector<int>& labels);

struct FifaTrace {
    std::vector<double> energy;  // value after each accepted step
};

// Continuous relaxation of the dp_decode objective: segment lengths are a
// softmax over K parameters scaled by T, frame memberships are differences
// of sigmoids with the configured sharpness, optimized by plain gradient
// descent from the length-prior initialization.
std::vector<int> fifa_decode(const SoftAssignment& probs, const ClusterOrder& order,
                             const LengthPrior& prior, const FifaConfig& config, double gamma,
                             FifaTrace* trace = nullptr);

// Activity-level inference state: trained-model hard assignments for every
// video, plus the derived order and prior.
struct ActivityInference {
    std::vector<SeqTensor> embeddings;
    std::vector<std::vector<int>> hard;
    ClusterOrder order;
    LengthPrior prior;
};

ActivityInference infer_assignments(TcnModel& model, std::vector<Codebook>& books,
                                    const std::vector<VideoFeatures>& videos);

// encode -> soft_assign -> chosen decoder for one video.
std::vector<int> segment_video(TcnModel& model, std::vector<Codebook>& books,
                               const SeqTensor& video, DecodeMethod method,
                               const ClusterOrder& order, const LengthPrior& prior,
                               const DecodeOptions& options);

}  // namespace hvq
