#include "hvq/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "hvq/error.hpp"

namespace hvq {

void TrainConfig::validate() const {
    if (lambda_rec < 0.0) throw ConfigError("train: lambda_rec must be >= 0");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!loss_terms.rec && !loss_terms.commit_z && !loss_terms.commit_q)
        throw ConfigError("train: at least one loss term must be enabled");
    if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be >= 0");
    optim.validate();
    hvq.validate();
    tcn.validate();
}

double reconstruction_loss(const SeqTensor& x, const SeqTensor& x_hat, SeqTensor* grad_xhat) {
    if (!x.same_shape(x_hat)) throw DataError("reconstruction_loss: shape mismatch");
    double loss = 0.0;
    if (grad_xhat) *grad_xhat = SeqTensor(x.rows, x.cols);
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double d = x_hat.data[i] - x.data[i];
        loss += d * d;
        if (grad_xhat) grad_xhat->data[i] = 2.0 * d;
    }
    return loss;
}

double total_loss(double rec, double commit_z, double commit_q, const TrainConfig& config) {
    double total = 0.0;
    if (config.loss_terms.commit_z) total += commit_z;
    if (config.loss_terms.commit_q) total += commit_q;
    if (config.loss_terms.rec) total += config.lambda_rec * rec;
    return total;
}

namespace {

// Decoder input under the straight-through estimator: numerically the
// assigned top-level prototype rows, with the embedding as gradient carrier.
SeqTensor gather_prototype_rows(const Codebook& book, const std::vector<int>& index) {
    SeqTensor rows(static_cast<int>(index.size()), book.dim());
    for (size_t t = 0; t < index.size(); ++t) {
        const double* src = book.prototypes.row(index[t]);
        double* dst = rows.row(static_cast<int>(t));
        for (int c = 0; c < book.dim(); ++c) dst[c] = src[c];
    }
    return rows;
}

}  // namespace

StepLosses train_step(TcnModel& model, std::vector<Codebook>& books, const VideoFeatures& video,
                      const TrainConfig& config, std::mt19937_64& rng) {
    const SeqTensor& x = video.frames;

    NetCache enc_cache;
    SeqTensor e = tcn_encode(model, x, true, &rng, &enc_cache);
    const std::vector<double> norms = l2_normalize_rows(e);

    QuantizeResult quant = quantize_hierarchy(e, books);

    SeqTensor dec_in = gather_prototype_rows(books.back(), quant.coarse());
    NetCache dec_cache;
    SeqTensor x_hat = tcn_decode(model, dec_in, true, &rng, &dec_cache);

    SeqTensor grad_xhat;
    StepLosses losses;
    losses.rec = reconstruction_loss(x, x_hat, &grad_xhat);
    CommitLosses commit = commitment_losses(e, quant, books);
    losses.commit_z = commit.commit_z;
    losses.commit_q = commit.commit_q;
    losses.total = total_loss(losses.rec, losses.commit_z, losses.commit_q, config);
    if (!std::isfinite(losses.total))
        throw DataError("train_step: non-finite loss on video '" + video.id + "'");

    model.encoder_params.zero_grads();
    model.decoder_params.zero_grads();

    SeqTensor grad_e(e.rows, e.cols);
    if (config.loss_terms.rec && config.lambda_rec > 0.0) {
        for (double& g : grad_xhat.data) g *= config.lambda_rec;
        SeqTensor grad_dec_in = tcn_decode_backward(model, grad_xhat, dec_cache);
        // straight-through: the quantizer is the identity for gradients
        for (size_t i = 0; i < grad_e.data.size(); ++i) grad_e.data[i] = grad_dec_in.data[i];
    }
    if (config.loss_terms.commit_z)
        for (size_t i = 0; i < grad_e.data.size(); ++i) grad_e.data[i] += commit.grad_z.data[i];
    if (config.loss_terms.commit_q)
        for (size_t i = 0; i < grad_e.data.size(); ++i) grad_e.data[i] += commit.grad_q.data[i];

    SeqTensor grad_enc_out = l2_normalize_rows_backward(grad_e, e, norms);
    tcn_encode_backward(model, grad_enc_out, enc_cache);

    if (config.grad_clip > 0.0) {
        clip_global_grad_norm(model.encoder_params, config.grad_clip);
        clip_global_grad_norm(model.decoder_params, config.grad_clip);
    }
    adamw_step(model.encoder_params, config.optim);
    adamw_step(model.decoder_params, config.optim);

    // EMA inputs per level, snapshotted before any book changes: embeddings
    // feed the fine book, each coarser book consumes the assigned prototype
    // rows of the level below.
    std::vector<SeqTensor> level_inputs;
    level_inputs.push_back(e);
    for (size_t l = 1; l < books.size(); ++l)
        level_inputs.push_back(gather_prototype_rows(books[l - 1], quant.level_index[l - 1]));

    for (size_t l = 0; l < books.size(); ++l)
        ema_update(books[l], level_inputs[l], quant.level_index[l], config.hvq.ema_decay,
                   config.hvq.ema_variant);

    for (size_t l = 0; l < books.size(); ++l) {
        const int resets = reset_dead(books[l], level_inputs[l], rng);
        if (l == 0)
            losses.resets_fine += resets;
        else
            losses.resets_coarse += resets;
    }
    return losses;
}

double train_loss_pinned(TcnModel& model, const std::vector<Codebook>& books,
                         const SeqTensor& video, const TrainConfig& config,
                         const PinnedQuantization& pin, bool with_grad) {
    NetCache enc_cache;
    SeqTensor e = tcn_encode(model, video, false, nullptr, with_grad ? &enc_cache : nullptr);
    const std::vector<double> norms = l2_normalize_rows(e);

    // Straight-through composite around the pinned assignment: the decoder
    // sees q_pin + (e - e_pin), which equals q at the linearization point.
    SeqTensor dec_in = gather_prototype_rows(books.back(), pin.result.coarse());
    for (size_t i = 0; i < dec_in.data.size(); ++i)
        dec_in.data[i] += e.data[i] - pin.embeddings.data[i];

    NetCache dec_cache;
    SeqTensor x_hat = tcn_decode(model, dec_in, false, nullptr, with_grad ? &dec_cache : nullptr);

    SeqTensor grad_xhat;
    const double rec = reconstruction_loss(video, x_hat, with_grad ? &grad_xhat : nullptr);

    double commit_z = 0.0, commit_q = 0.0;
    SeqTensor grad_e(e.rows, e.cols);
    for (int t = 0; t < e.rows; ++t) {
        const double* et = e.row(t);
        const double* z = books[0].prototypes.row(pin.result.level_index[0][t]);
        double* g = grad_e.row(t);
        for (int c = 0; c < e.cols; ++c) {
            const double d = et[c] - z[c];
            commit_z += d * d;
            if (config.loss_terms.commit_z) g[c] += 2.0 * d;
        }
    }
    for (size_t l = 0; l + 1 < books.size(); ++l)
        for (int t = 0; t < e.rows; ++t) {
            const double* lo = books[l].prototypes.row(pin.result.level_index[l][t]);
            const double* hi = books[l + 1].prototypes.row(pin.result.level_index[l + 1][t]);
            for (int c = 0; c < e.cols; ++c) {
                const double d = lo[c] - hi[c];
                commit_q += d * d;
            }
        }

    const double loss = total_loss(rec, commit_z, commit_q, config);
    if (!with_grad) return loss;

    model.encoder_params.zero_grads();
    model.decoder_params.zero_grads();
    if (config.loss_terms.rec && config.lambda_rec > 0.0) {
        for (double& g : grad_xhat.data) g *= config.lambda_rec;
        SeqTensor grad_dec_in = tcn_decode_backward(model, grad_xhat, dec_cache);
        for (size_t i = 0; i < grad_e.data.size(); ++i) grad_e.data[i] += grad_dec_in.data[i];
    }
    SeqTensor grad_enc_out = l2_normalize_rows_backward(grad_e, e, norms);
    tcn_encode_backward(model, grad_enc_out, enc_cache);
    return loss;
}

TrainedActivity train_activity(const ActivityDataset& dataset, const TrainConfig& config,
                               std::ostream* progress) {
    if (dataset.videos.empty()) throw ConfigError("train_activity: empty dataset");
    if (dataset.train_indices.empty()) throw ConfigError("train_activity: empty training split");

    const auto start = std::chrono::steady_clock::now();

    TrainConfig cfg = config;
    cfg.tcn.input_dim = dataset.videos[0].frames.cols;
    if (cfg.hvq.K < 1) cfg.hvq.K = dataset.K;
    cfg.validate();

    TrainedActivity out;
    out.config = cfg;
    out.model = build_model(cfg.tcn, cfg.seed);
    out.rng = std::mt19937_64(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    // K-means init from the first video's (untrained) embeddings.
    {
        const VideoFeatures& first = dataset.videos[dataset.train_indices.front()];
        SeqTensor e0 = tcn_encode(out.model, first.frames, false, nullptr, nullptr);
        l2_normalize_rows(e0);
        bool fallback = false;
        out.books = init_codebooks_kmeans(e0, cfg.hvq, cfg.seed, &fallback);
        if (fallback)
            std::fprintf(stderr,
                         "warning: first video of '%s' is shorter than the fine codebook; "
                         "initialized from repeated frames\n",
                         dataset.name.c_str());
    }

    std::vector<int> order = dataset.train_indices;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch > 0) std::shuffle(order.begin(), order.end(), out.rng);
        double sum = 0.0, sum_rec = 0.0, sum_cz = 0.0, sum_cq = 0.0;
        long resets_z = 0, resets_q = 0;
        for (int vi : order) {
            StepLosses s = train_step(out.model, out.books, dataset.videos[vi], cfg, out.rng);
            sum += s.total;
            sum_rec += s.rec;
            sum_cz += s.commit_z;
            sum_cq += s.commit_q;
            resets_z += s.resets_fine;
            resets_q += s.resets_coarse;
        }
        const double n = static_cast<double>(order.size());
        out.report.epoch_loss.push_back(sum / n);
        out.report.epoch_rec.push_back(sum_rec / n);
        out.report.epoch_commit_z.push_back(sum_cz / n);
        out.report.epoch_commit_q.push_back(sum_cq / n);
        out.report.resets_fine += resets_z;
        out.report.resets_coarse += resets_q;
        out.epochs_done = epoch + 1;
        if (progress)
            *progress << "epoch=" << epoch << " loss=" << out.report.epoch_loss.back()
                      << " resets_z=" << resets_z << " resets_q=" << resets_q << "\n";
    }

    out.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace hvq
