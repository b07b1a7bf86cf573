#include "hvq/tcn.hpp"

#include <cmath>

#include "hvq/error.hpp"
#include "hvq/kernels.hpp"

namespace hvq {

using namespace kernels;

void TcnConfig::validate() const {
    if (stages < 1) throw ConfigError("tcn: stages must be >= 1");
    if (layers_per_stage < 1) throw ConfigError("tcn: layers_per_stage must be >= 1");
    if (hidden_channels < 1) throw ConfigError("tcn: hidden_channels must be >= 1");
    if (latent_dim < 1) throw ConfigError("tcn: latent_dim must be >= 1");
    if (input_dim < 1) throw ConfigError("tcn: input_dim must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("tcn: dropout_rate must lie in [0,1)");
}

namespace {

ConvRefs add_conv(ParamStore& ps, const std::string& name, int taps, int cin, int cout,
                  std::mt19937_64& rng) {
    ConvRefs refs;
    refs.w = ps.add(name + ".w", taps == 1 ? std::vector<int>{cin, cout}
                                           : std::vector<int>{taps, cin, cout});
    refs.b = ps.add(name + ".b", {cout});
    const double bound = 1.0 / std::sqrt(static_cast<double>(taps) * cin);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : ps[refs.w].value) w = dist(rng);
    return refs;
}

NetRefs build_net(ParamStore& ps, const std::string& prefix, const TcnConfig& cfg, int in_dim,
                  int out_dim, bool mlp, std::mt19937_64& rng) {
    NetRefs net;
    net.out_channels = out_dim;
    if (mlp) {
        net.mlp_hidden = add_conv(ps, prefix + ".hidden", 1, in_dim, cfg.hidden_channels, rng);
        net.out_proj = add_conv(ps, prefix + ".out", 1, cfg.hidden_channels, out_dim, rng);
        return net;
    }
    int prev = in_dim;
    for (int s = 0; s < cfg.stages; ++s) {
        StageRefs stage;
        const std::string sp = prefix + ".s" + std::to_string(s);
        stage.in_proj = add_conv(ps, sp + ".in", 1, prev, cfg.hidden_channels, rng);
        for (int l = 0; l < cfg.layers_per_stage; ++l) {
            ResLayerRefs layer;
            const std::string lp = sp + ".l" + std::to_string(l);
            layer.conv3 = add_conv(ps, lp + ".conv3", 3, cfg.hidden_channels, cfg.hidden_channels, rng);
            layer.conv1 = add_conv(ps, lp + ".conv1", 1, cfg.hidden_channels, cfg.hidden_channels, rng);
            layer.dilation = 1 << l;
            stage.layers.push_back(layer);
        }
        net.stages.push_back(std::move(stage));
        prev = cfg.hidden_channels;
    }
    net.out_proj = add_conv(ps, prefix + ".out", 1, cfg.hidden_channels, out_dim, rng);
    return net;
}

bool dropout_active(const TcnConfig& cfg, bool training) {
    return training && cfg.dropout_rate > 0.0;
}

SeqTensor net_forward(ParamStore& ps, const NetRefs& net, const TcnConfig& cfg,
                      const SeqTensor& input, bool training, std::mt19937_64* rng,
                      NetCache* cache) {
    const bool drop = dropout_active(cfg, training);
    if (drop && rng == nullptr) throw UsageError("tcn forward: dropout requires an rng");

    if (net.stages.empty()) {  // mlp decoder
        if (cache) cache->mlp_input = input;
        SeqTensor pre = conv1x1_forward(input, ps[net.mlp_hidden.w].value, ps[net.mlp_hidden.b].value,
                                        cfg.hidden_channels);
        SeqTensor act = relu_forward(pre);
        if (cache) {
            cache->mlp_pre = pre;
            cache->mlp_act = act;
        }
        return conv1x1_forward(act, ps[net.out_proj.w].value, ps[net.out_proj.b].value,
                               net.out_channels);
    }

    SeqTensor x = input;
    if (cache) cache->stages.resize(net.stages.size());
    for (size_t s = 0; s < net.stages.size(); ++s) {
        const StageRefs& stage = net.stages[s];
        StageCache* sc = cache ? &cache->stages[s] : nullptr;
        if (sc) sc->input = x;
        x = conv1x1_forward(x, ps[stage.in_proj.w].value, ps[stage.in_proj.b].value,
                            cfg.hidden_channels);
        if (sc) sc->layers.resize(stage.layers.size());
        for (size_t l = 0; l < stage.layers.size(); ++l) {
            const ResLayerRefs& layer = stage.layers[l];
            ResLayerCache* lc = sc ? &sc->layers[l] : nullptr;
            if (lc) lc->input = x;
            SeqTensor pre = conv1d3_forward(x, ps[layer.conv3.w].value, ps[layer.conv3.b].value,
                                            cfg.hidden_channels, layer.dilation);
            SeqTensor act = relu_forward(pre);
            if (lc) {
                lc->pre = pre;
                lc->act = act;
            }
            SeqTensor out = conv1x1_forward(act, ps[layer.conv1.w].value, ps[layer.conv1.b].value,
                                            cfg.hidden_channels);
            if (drop) {
                auto mask = dropout_mask(out.size(), cfg.dropout_rate, *rng);
                dropout_apply(out, mask, cfg.dropout_rate);
                if (lc) lc->drop_mask = std::move(mask);
            }
            for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += x.data[i];
            x = std::move(out);
        }
    }
    if (cache) cache->out_input = x;
    return conv1x1_forward(x, ps[net.out_proj.w].value, ps[net.out_proj.b].value,
                           net.out_channels);
}

SeqTensor net_backward(ParamStore& ps, const NetRefs& net, const TcnConfig& cfg,
                       const SeqTensor& grad_out, const NetCache& cache) {
    auto accumulate = [&ps](const ConvRefs& refs, const std::vector<double>& gw,
                            const std::vector<double>& gb) {
        Param& w = ps[refs.w];
        Param& b = ps[refs.b];
        for (size_t i = 0; i < gw.size(); ++i) w.grad[i] += gw[i];
        for (size_t i = 0; i < gb.size(); ++i) b.grad[i] += gb[i];
    };

    std::vector<double> gw, gb;
    SeqTensor g;

    if (net.stages.empty()) {
        if (cache.mlp_act.rows == 0) throw UsageError("tcn backward: missing forward cache");
        conv1x1_backward(grad_out, cache.mlp_act, ps[net.out_proj.w].value, net.out_channels, g,
                         gw, gb);
        accumulate(net.out_proj, gw, gb);
        g = relu_backward(g, cache.mlp_pre);
        SeqTensor gin;
        conv1x1_backward(g, cache.mlp_input, ps[net.mlp_hidden.w].value, cfg.hidden_channels, gin,
                         gw, gb);
        accumulate(net.mlp_hidden, gw, gb);
        return gin;
    }

    if (cache.stages.size() != net.stages.size() || cache.out_input.rows == 0)
        throw UsageError("tcn backward: missing forward cache");

    conv1x1_backward(grad_out, cache.out_input, ps[net.out_proj.w].value, net.out_channels, g, gw,
                     gb);
    accumulate(net.out_proj, gw, gb);

    for (int s = static_cast<int>(net.stages.size()) - 1; s >= 0; --s) {
        const StageRefs& stage = net.stages[s];
        const StageCache& sc = cache.stages[s];
        for (int l = static_cast<int>(stage.layers.size()) - 1; l >= 0; --l) {
            const ResLayerRefs& layer = stage.layers[l];
            const ResLayerCache& lc = sc.layers[l];
            // y = x + dropout(conv1(relu(conv3(x))))
            SeqTensor branch = g;
            if (!lc.drop_mask.empty()) dropout_backward(branch, lc.drop_mask, cfg.dropout_rate);
            SeqTensor g_act;
            conv1x1_backward(branch, lc.act, ps[layer.conv1.w].value, cfg.hidden_channels, g_act,
                             gw, gb);
            accumulate(layer.conv1, gw, gb);
            SeqTensor g_pre = relu_backward(g_act, lc.pre);
            SeqTensor g_in;
            conv1d3_backward(g_pre, lc.input, ps[layer.conv3.w].value, cfg.hidden_channels,
                             layer.dilation, g_in, gw, gb);
            accumulate(layer.conv3, gw, gb);
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += g_in.data[i];
        }
        SeqTensor g_stage_in;
        conv1x1_backward(g, sc.input, ps[stage.in_proj.w].value, cfg.hidden_channels, g_stage_in,
                         gw, gb);
        accumulate(stage.in_proj, gw, gb);
        g = std::move(g_stage_in);
    }
    return g;
}

}  // namespace

TcnModel build_model(const TcnConfig& config, uint64_t seed) {
    config.validate();
    TcnModel model;
    model.config = config;
    std::mt19937_64 rng(seed);
    model.encoder = build_net(model.encoder_params, "enc", config, config.input_dim,
                              config.latent_dim, false, rng);
    model.decoder = build_net(model.decoder_params, "dec", config, config.latent_dim,
                              config.input_dim, config.decoder_kind == DecoderKind::mlp, rng);
    return model;
}

SeqTensor tcn_encode(TcnModel& model, const SeqTensor& video, bool training, std::mt19937_64* rng,
                     NetCache* cache) {
    if (video.cols != model.config.input_dim)
        throw DataError("encode: video has " + std::to_string(video.cols) +
                        " channels, model expects " + std::to_string(model.config.input_dim));
    return net_forward(model.encoder_params, model.encoder, model.config, video, training, rng,
                       cache);
}

SeqTensor tcn_decode(TcnModel& model, const SeqTensor& quantized, bool training,
                     std::mt19937_64* rng, NetCache* cache) {
    if (quantized.cols != model.config.latent_dim)
        throw DataError("decode: input has " + std::to_string(quantized.cols) +
                        " channels, model expects " + std::to_string(model.config.latent_dim));
    return net_forward(model.decoder_params, model.decoder, model.config, quantized, training, rng,
                       cache);
}

SeqTensor tcn_encode_backward(TcnModel& model, const SeqTensor& grad_out, const NetCache& cache) {
    return net_backward(model.encoder_params, model.encoder, model.config, grad_out, cache);
}

SeqTensor tcn_decode_backward(TcnModel& model, const SeqTensor& grad_out, const NetCache& cache) {
    return net_backward(model.decoder_params, model.decoder, model.config, grad_out, cache);
}

}  // namespace hvq
