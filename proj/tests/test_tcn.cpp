#include <random>

#include "doctest.h"

#include "hvq/error.hpp"
#include "hvq/gradcheck.hpp"
#include "hvq/tcn.hpp"

using namespace hvq;

namespace {

TcnConfig tiny_config() {
    TcnConfig cfg;
    cfg.stages = 2;
    cfg.layers_per_stage = 2;
    cfg.hidden_channels = 5;
    cfg.latent_dim = 3;
    cfg.input_dim = 4;
    return cfg;
}

SeqTensor random_video(int T, int F, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1, 1);
    SeqTensor v(T, F);
    for (double& x : v.data) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("build_model is deterministic and shaped by config") {
    TcnConfig cfg = tiny_config();
    cfg.latent_dim = 32;
    cfg.input_dim = 64;
    TcnModel a = build_model(cfg, 42);
    TcnModel b = build_model(cfg, 42);
    REQUIRE(a.encoder_params.count() == b.encoder_params.count());
    for (size_t i = 0; i < a.encoder_params.count(); ++i)
        CHECK(a.encoder_params[static_cast<int>(i)].value ==
              b.encoder_params[static_cast<int>(i)].value);
    for (size_t i = 0; i < a.decoder_params.count(); ++i)
        CHECK(a.decoder_params[static_cast<int>(i)].value ==
              b.decoder_params[static_cast<int>(i)].value);

    SeqTensor v = random_video(6, 64, 1);
    SeqTensor e = tcn_encode(a, v, false, nullptr, nullptr);
    CHECK(e.rows == 6);
    CHECK(e.cols == 32);
    SeqTensor x = tcn_decode(a, e, false, nullptr, nullptr);
    CHECK(x.cols == 64);

    TcnModel c = build_model(cfg, 43);
    CHECK(c.encoder_params[0].value != a.encoder_params[0].value);
}

TEST_CASE("paper-scale config has 20 dilated layers with dilations 1..512 per stage") {
    TcnConfig cfg;
    cfg.input_dim = 8;
    TcnModel m = build_model(cfg, 0);
    REQUIRE(m.encoder.stages.size() == 2);
    int layers = 0;
    for (const auto& stage : m.encoder.stages) {
        REQUIRE(stage.layers.size() == 10);
        for (size_t l = 0; l < stage.layers.size(); ++l)
            CHECK(stage.layers[l].dilation == (1 << l));
        layers += static_cast<int>(stage.layers.size());
    }
    CHECK(layers == 20);
}

TEST_CASE("temporal length is preserved, including T=1") {
    TcnConfig cfg = tiny_config();
    TcnModel m = build_model(cfg, 3);
    for (int T : {1, 2, 17}) {
        SeqTensor v = random_video(T, cfg.input_dim, 9 + T);
        SeqTensor e = tcn_encode(m, v, false, nullptr, nullptr);
        CHECK(e.rows == T);
        CHECK(all_finite(e));
    }
}

TEST_CASE("encode is deterministic when not training, regardless of dropout rate") {
    TcnConfig cfg = tiny_config();
    cfg.dropout_rate = 0.5;
    TcnModel m = build_model(cfg, 5);
    SeqTensor v = random_video(10, cfg.input_dim, 2);
    SeqTensor a = tcn_encode(m, v, false, nullptr, nullptr);
    SeqTensor b = tcn_encode(m, v, false, nullptr, nullptr);
    CHECK(a.data == b.data);

    std::mt19937_64 rng(0);
    SeqTensor c = tcn_encode(m, v, true, &rng, nullptr);
    CHECK(a.data != c.data);  // dropout actually fires in training mode
}

TEST_CASE("wrong feature width raises a data error") {
    TcnModel m = build_model(tiny_config(), 1);
    SeqTensor v = random_video(4, 7, 0);
    CHECK_THROWS_AS(tcn_encode(m, v, false, nullptr, nullptr), DataError);
    CHECK_THROWS_AS(tcn_decode(m, v, false, nullptr, nullptr), DataError);
}

TEST_CASE("mlp decoder is frame-local") {
    TcnConfig cfg = tiny_config();
    cfg.decoder_kind = DecoderKind::mlp;
    TcnModel m = build_model(cfg, 8);
    SeqTensor q = random_video(6, cfg.latent_dim, 4);
    SeqTensor out = tcn_decode(m, q, false, nullptr, nullptr);

    // permute frames, decode, and compare row-wise
    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    SeqTensor q_perm(6, cfg.latent_dim);
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < cfg.latent_dim; ++c) q_perm.at(t, c) = q.at(perm[t], c);
    SeqTensor out_perm = tcn_decode(m, q_perm, false, nullptr, nullptr);
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < cfg.input_dim; ++c)
            CHECK(out_perm.at(t, c) == out.at(perm[t], c));
}

TEST_CASE("tcn decoder output on constant input is finite") {
    TcnConfig cfg = tiny_config();
    TcnModel m = build_model(cfg, 12);
    SeqTensor q(40, cfg.latent_dim, 0.7);
    SeqTensor out = tcn_decode(m, q, false, nullptr, nullptr);
    CHECK(all_finite(out));
}

TEST_CASE("receptive field of a dilated stack matches 2(2^L - 1) + 1") {
    // Single stage, 4 layers: perturbation at the center must reach exactly
    // 2^4 - 1 = 15 frames on each side.
    TcnConfig cfg;
    cfg.stages = 1;
    cfg.layers_per_stage = 4;
    cfg.hidden_channels = 3;
    cfg.latent_dim = 2;
    cfg.input_dim = 2;
    TcnModel m = build_model(cfg, 21);
    const int T = 64, center = 32, reach = 15;
    SeqTensor base = random_video(T, cfg.input_dim, 6);
    SeqTensor out0 = tcn_encode(m, base, false, nullptr, nullptr);
    SeqTensor bumped = base;
    bumped.at(center, 0) += 1.0;
    SeqTensor out1 = tcn_encode(m, bumped, false, nullptr, nullptr);
    for (int t = 0; t < T; ++t) {
        double diff = 0.0;
        for (int c = 0; c < cfg.latent_dim; ++c) diff += std::fabs(out1.at(t, c) - out0.at(t, c));
        if (t < center - reach || t > center + reach)
            CHECK(diff == 0.0);
    }
    // the edge of the receptive field is actually live
    double edge = 0.0;
    for (int c = 0; c < cfg.latent_dim; ++c)
        edge += std::fabs(out1.at(center + reach, c) - out0.at(center + reach, c));
    CHECK(edge > 0.0);
}

TEST_CASE("encoder gradient w.r.t. weights passes the finite-difference check") {
    TcnConfig cfg = tiny_config();
    cfg.stages = 1;
    cfg.layers_per_stage = 2;
    TcnModel m = build_model(cfg, 31);
    SeqTensor v = random_video(16, cfg.input_dim, 10);

    auto loss = [&](ParamStore&, bool with_grad) {
        NetCache cache;
        SeqTensor e = tcn_encode(m, v, false, nullptr, with_grad ? &cache : nullptr);
        double total = 0.0;
        for (double x : e.data) total += x;
        total /= static_cast<double>(e.data.size());
        if (with_grad) {
            SeqTensor up(e.rows, e.cols, 1.0 / static_cast<double>(e.data.size()));
            tcn_encode_backward(m, up, cache);
        }
        return total;
    };
    CHECK(finite_diff_check(loss, m.encoder_params) < 1e-4);
}

TEST_CASE("decoder gradient alone passes the finite-difference check") {
    for (DecoderKind kind : {DecoderKind::tcn, DecoderKind::mlp}) {
        TcnConfig cfg = tiny_config();
        cfg.stages = 1;
        cfg.layers_per_stage = 2;
        cfg.decoder_kind = kind;
        TcnModel m = build_model(cfg, 37);
        SeqTensor q = random_video(7, cfg.latent_dim, 11);
        SeqTensor target = random_video(7, cfg.input_dim, 12);

        auto loss = [&](ParamStore&, bool with_grad) {
            NetCache cache;
            SeqTensor out = tcn_decode(m, q, false, nullptr, with_grad ? &cache : nullptr);
            double total = 0.0;
            SeqTensor grad(out.rows, out.cols);
            for (size_t i = 0; i < out.data.size(); ++i) {
                const double d = out.data[i] - target.data[i];
                total += d * d;
                grad.data[i] = 2.0 * d;
            }
            if (with_grad) tcn_decode_backward(m, grad, cache);
            return total;
        };
        CHECK(finite_diff_check(loss, m.decoder_params) < 1e-4);
    }
}
