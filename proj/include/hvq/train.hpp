#pragma once

#include <iosfwd>
#include <random>
#include <vector>

#include "hvq/codebook.hpp"
#include "hvq/dataset.hpp"
#include "hvq/optim.hpp"
#include "hvq/tcn.hpp"

namespace hvq {

struct LossFlags {
    bool rec = true;
    bool commit_z = true;
    bool commit_q = true;
};

struct TrainConfig {
    double lambda_rec = 0.002;
    int epochs = 30;
    uint64_t seed = 0;
    OptimConfig optim;
    HvqConfig hvq;
    TcnConfig tcn;
    LossFlags loss_terms;
    double grad_clip = 0.0;  // 0 disables global-norm clipping

    void validate() const;
};

struct StepLosses {
    double total = 0.0;
    double rec = 0.0;
    double commit_z = 0.0;
    double commit_q = 0.0;
    int resets_fine = 0;
    int resets_coarse = 0;  // summed over levels 2+
};

struct TrainReport {
    std::vector<double> epoch_loss;  // mean total loss per epoch
    std::vector<double> epoch_rec;
    std::vector<double> epoch_commit_z;
    std::vector<double> epoch_commit_q;
    long resets_fine = 0;
    long resets_coarse = 0;
    double seconds = 0.0;
};

struct TrainedActivity {
    TcnModel model;
    std::vector<Codebook> books;
    TrainReport report;
    TrainConfig config;  // effective config with K and input_dim resolved
    std::mt19937_64 rng;  // state after training, for exact resumption
    int epochs_done = 0;
};

// Sum of squared frame differences (Eq. 5). When grad_xhat is non-null it
// receives d/dx̂ = 2(x̂ - x).
double reconstruction_loss(const SeqTensor& x, const SeqTensor& x_hat, SeqTensor* grad_xhat);

// L = commit_z + commit_q + lambda_rec * rec over the enabled terms.
double total_loss(double rec, double commit_z, double commit_q, const TrainConfig& config);

// One optimization step on one video: encode (l2-normalized), quantize,
// decode through the straight-through composite, backprop, AdamW, EMA
// updates, dead-prototype resets. Throws DataError naming the video if the
// loss turns non-finite.
StepLosses train_step(TcnModel& model, std::vector<Codebook>& books, const VideoFeatures& video,
                      const TrainConfig& config, std::mt19937_64& rng);

// Linearized training loss with pinned quantization, for finite-difference
// oracles: uses the given QuantizeResult and the straight-through composite
// around the pinned embeddings. Fills parameter gradients when with_grad.
struct PinnedQuantization {
    QuantizeResult result;
    SeqTensor embeddings;  // e at the linearization point
};
double train_loss_pinned(TcnModel& model, const std::vector<Codebook>& books,
                         const SeqTensor& video, const TrainConfig& config,
                         const PinnedQuantization& pin, bool with_grad);

// K-means init from the first video, then `epochs` shuffled passes (epoch 0
// keeps dataset order). Progress lines go to `progress` when non-null.
TrainedActivity train_activity(const ActivityDataset& dataset, const TrainConfig& config,
                               std::ostream* progress = nullptr);

}  // namespace hvq
