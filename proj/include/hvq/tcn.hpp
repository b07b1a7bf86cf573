#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hvq/optim.hpp"
#include "hvq/tensor.hpp"

namespace hvq {

enum class DecoderKind { tcn, mlp };

struct TcnConfig {
    int stages = 2;
    int layers_per_stage = 10;
    int hidden_channels = 64;
    int latent_dim = 32;  // D
    int input_dim = 0;    // F, set from the dataset
    double dropout_rate = 0.0;
    DecoderKind decoder_kind = DecoderKind::tcn;

    void validate() const;
};

// Parameter handles for one pointwise or width-3 convolution.
struct ConvRefs {
    int w = -1;
    int b = -1;
};

// conv3(dilated) -> ReLU -> conv1x1 -> dropout -> + input
struct ResLayerRefs {
    ConvRefs conv3;
    ConvRefs conv1;
    int dilation = 1;
};

struct StageRefs {
    ConvRefs in_proj;  // 1x1 map from previous width to hidden_channels
    std::vector<ResLayerRefs> layers;
};

// One network (encoder or decoder): stages followed by a 1x1 output
// projection. The mlp decoder uses the same struct with zero stages and an
// extra hidden pointwise layer.
struct NetRefs {
    std::vector<StageRefs> stages;
    ConvRefs mlp_hidden;  // only used when decoder_kind == mlp
    ConvRefs out_proj;
    int out_channels = 0;
};

struct TcnModel {
    TcnConfig config;
    ParamStore encoder_params;
    ParamStore decoder_params;
    NetRefs encoder;
    NetRefs decoder;
};

struct ResLayerCache {
    SeqTensor input;  // residual source and conv3 input
    SeqTensor pre;    // conv3 output (ReLU input)
    SeqTensor act;    // ReLU output (conv1x1 input)
    std::vector<uint8_t> drop_mask;  // empty when dropout inactive
};

struct StageCache {
    SeqTensor input;  // in_proj input
    std::vector<ResLayerCache> layers;
};

struct NetCache {
    std::vector<StageCache> stages;
    SeqTensor mlp_input;   // mlp decoder only
    SeqTensor mlp_pre;     // hidden pre-activation
    SeqTensor mlp_act;     // hidden activation (out_proj input)
    SeqTensor out_input;   // out_proj input (tcn path)
};

// Deterministic initialization from `seed`: kernels U(-1/sqrt(fan_in),
// +1/sqrt(fan_in)) drawn in registration order, biases zero.
TcnModel build_model(const TcnConfig& config, uint64_t seed);

// Per-frame embeddings [T x D]. Dropout fires only when `training` is set and
// the configured rate is positive; `rng` may be null otherwise.
SeqTensor tcn_encode(TcnModel& model, const SeqTensor& video, bool training,
                     std::mt19937_64* rng, NetCache* cache);

// Reconstruction [T x F] from quantized embeddings [T x D].
SeqTensor tcn_decode(TcnModel& model, const SeqTensor& quantized, bool training,
                     std::mt19937_64* rng, NetCache* cache);

// Reverse passes. Accumulate parameter gradients into the respective store
// and return the gradient with respect to the network input.
SeqTensor tcn_encode_backward(TcnModel& model, const SeqTensor& grad_out, const NetCache& cache);
SeqTensor tcn_decode_backward(TcnModel& model, const SeqTensor& grad_out, const NetCache& cache);

}  // namespace hvq
