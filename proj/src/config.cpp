#include "hvq/config.hpp"

#include <cstdlib>

#include "hvq/error.hpp"

namespace hvq {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                const std::vector<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    check_keys(j, "run config",
               {"seed", "tcn", "hvq", "optim", "train", "fifa", "decode", "protocol"});

    if (j.contains("seed")) cfg.train.seed = j.at("seed").get<uint64_t>();

    if (j.contains("tcn")) {
        const json& t = j.at("tcn");
        check_keys(t, "tcn",
                   {"stages", "layers_per_stage", "hidden_channels", "latent_dim", "dropout_rate",
                    "decoder_kind"});
        get_to(t, "stages", cfg.train.tcn.stages);
        get_to(t, "layers_per_stage", cfg.train.tcn.layers_per_stage);
        get_to(t, "hidden_channels", cfg.train.tcn.hidden_channels);
        get_to(t, "latent_dim", cfg.train.tcn.latent_dim);
        get_to(t, "dropout_rate", cfg.train.tcn.dropout_rate);
        if (t.contains("decoder_kind")) {
            const std::string kind = t.at("decoder_kind").get<std::string>();
            if (kind == "tcn")
                cfg.train.tcn.decoder_kind = DecoderKind::tcn;
            else if (kind == "mlp")
                cfg.train.tcn.decoder_kind = DecoderKind::mlp;
            else
                throw ConfigError("config: decoder_kind must be 'tcn' or 'mlp'");
        }
    }

    if (j.contains("hvq")) {
        const json& h = j.at("hvq");
        check_keys(h, "hvq",
                   {"K", "alpha", "levels", "ema_decay", "ema_variant", "reset_threshold_fine",
                    "reset_threshold_coarse"});
        get_to(h, "K", cfg.train.hvq.K);
        get_to(h, "levels", cfg.train.hvq.levels);
        get_to(h, "ema_decay", cfg.train.hvq.ema_decay);
        get_to(h, "reset_threshold_fine", cfg.train.hvq.reset_threshold_fine);
        get_to(h, "reset_threshold_coarse", cfg.train.hvq.reset_threshold_coarse);
        if (h.contains("alpha")) {
            if (h.at("alpha").is_array())
                h.at("alpha").get_to(cfg.train.hvq.alpha);
            else
                cfg.train.hvq.alpha.assign(std::max(1, cfg.train.hvq.levels - 1),
                                           h.at("alpha").get<int>());
        }
        if (h.contains("ema_variant")) {
            const std::string v = h.at("ema_variant").get<std::string>();
            if (v == "paper")
                cfg.train.hvq.ema_variant = EmaVariant::paper;
            else if (v == "running_sum")
                cfg.train.hvq.ema_variant = EmaVariant::running_sum;
            else
                throw ConfigError("config: ema_variant must be 'paper' or 'running_sum'");
        }
        // A scalar alpha given before/without levels must still cover all
        // boundaries.
        if (static_cast<int>(cfg.train.hvq.alpha.size()) < cfg.train.hvq.levels - 1 &&
            !cfg.train.hvq.alpha.empty())
            cfg.train.hvq.alpha.resize(cfg.train.hvq.levels - 1, cfg.train.hvq.alpha.back());
    }

    if (j.contains("optim")) {
        const json& o = j.at("optim");
        check_keys(o, "optim", {"learning_rate", "weight_decay", "beta1", "beta2", "epsilon"});
        get_to(o, "learning_rate", cfg.train.optim.learning_rate);
        get_to(o, "weight_decay", cfg.train.optim.weight_decay);
        get_to(o, "beta1", cfg.train.optim.beta1);
        get_to(o, "beta2", cfg.train.optim.beta2);
        get_to(o, "epsilon", cfg.train.optim.epsilon);
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train", {"lambda_rec", "epochs", "loss_terms", "grad_clip"});
        get_to(t, "lambda_rec", cfg.train.lambda_rec);
        get_to(t, "epochs", cfg.train.epochs);
        get_to(t, "grad_clip", cfg.train.grad_clip);
        if (t.contains("loss_terms")) {
            cfg.train.loss_terms = {false, false, false};
            for (const auto& term : t.at("loss_terms")) {
                const std::string name = term.get<std::string>();
                if (name == "rec")
                    cfg.train.loss_terms.rec = true;
                else if (name == "commit_z")
                    cfg.train.loss_terms.commit_z = true;
                else if (name == "commit_q")
                    cfg.train.loss_terms.commit_q = true;
                else
                    throw ConfigError("config: unknown loss term '" + name + "'");
            }
        }
    }

    if (j.contains("fifa")) {
        const json& f = j.at("fifa");
        check_keys(f, "fifa", {"learning_rate", "sharpness", "epochs", "reject_steps"});
        get_to(f, "learning_rate", cfg.decode.fifa.learning_rate);
        get_to(f, "sharpness", cfg.decode.fifa.sharpness);
        get_to(f, "epochs", cfg.decode.fifa.epochs);
        get_to(f, "reject_steps", cfg.decode.fifa.reject_steps);
    }

    if (j.contains("decode")) {
        const json& d = j.at("decode");
        check_keys(d, "decode", {"sim_mode", "gamma"});
        get_to(d, "gamma", cfg.decode.gamma);
        if (d.contains("sim_mode")) {
            const std::string m = d.at("sim_mode").get<std::string>();
            if (m == "product")
                cfg.decode.sim_mode = SimMode::product;
            else if (m == "literal")
                cfg.decode.sim_mode = SimMode::literal;
            else
                throw ConfigError("config: sim_mode must be 'product' or 'literal'");
        }
    }

    if (j.contains("protocol")) {
        const json& p = j.at("protocol");
        check_keys(p, "protocol", {"split", "background_label"});
        if (p.contains("split")) {
            const std::string s = p.at("split").get<std::string>();
            if (s == "full")
                cfg.protocol = Protocol::full;
            else if (s == "split_80_20")
                cfg.protocol = Protocol::split_80_20;
            else
                throw ConfigError("config: split must be 'full' or 'split_80_20'");
        }
        if (p.contains("background_label") && !p.at("background_label").is_null())
            cfg.background_token = p.at("background_label").get<std::string>();
    }
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.train.seed;
    j["tcn"] = {{"stages", cfg.train.tcn.stages},
                {"layers_per_stage", cfg.train.tcn.layers_per_stage},
                {"hidden_channels", cfg.train.tcn.hidden_channels},
                {"latent_dim", cfg.train.tcn.latent_dim},
                {"dropout_rate", cfg.train.tcn.dropout_rate},
                {"decoder_kind", cfg.train.tcn.decoder_kind == DecoderKind::tcn ? "tcn" : "mlp"}};
    j["hvq"] = {{"K", cfg.train.hvq.K},
                {"alpha", cfg.train.hvq.alpha},
                {"levels", cfg.train.hvq.levels},
                {"ema_decay", cfg.train.hvq.ema_decay},
                {"ema_variant",
                 cfg.train.hvq.ema_variant == EmaVariant::paper ? "paper" : "running_sum"},
                {"reset_threshold_fine", cfg.train.hvq.reset_threshold_fine},
                {"reset_threshold_coarse", cfg.train.hvq.reset_threshold_coarse}};
    j["optim"] = {{"learning_rate", cfg.train.optim.learning_rate},
                  {"weight_decay", cfg.train.optim.weight_decay},
                  {"beta1", cfg.train.optim.beta1},
                  {"beta2", cfg.train.optim.beta2},
                  {"epsilon", cfg.train.optim.epsilon}};
    std::vector<std::string> terms;
    if (cfg.train.loss_terms.rec) terms.push_back("rec");
    if (cfg.train.loss_terms.commit_z) terms.push_back("commit_z");
    if (cfg.train.loss_terms.commit_q) terms.push_back("commit_q");
    j["train"] = {{"lambda_rec", cfg.train.lambda_rec},
                  {"epochs", cfg.train.epochs},
                  {"loss_terms", terms},
                  {"grad_clip", cfg.train.grad_clip}};
    j["fifa"] = {{"learning_rate", cfg.decode.fifa.learning_rate},
                 {"sharpness", cfg.decode.fifa.sharpness},
                 {"epochs", cfg.decode.fifa.epochs},
                 {"reject_steps", cfg.decode.fifa.reject_steps}};
    j["decode"] = {{"sim_mode", cfg.decode.sim_mode == SimMode::product ? "product" : "literal"},
                   {"gamma", cfg.decode.gamma}};
    j["protocol"] = {{"split", cfg.protocol == Protocol::full ? "full" : "split_80_20"},
                     {"background_label",
                      cfg.background_token ? json(*cfg.background_token) : json(nullptr)}};
    return j;
}

SyntheticSpec parse_synth_spec(const json& j) {
    SyntheticSpec spec;
    check_keys(j, "synth spec",
               {"name", "actions", "subactions_min", "subactions_max", "feature_dim", "videos",
                "short_len", "long_len", "short_prob", "noise_sigma", "min_separation_deg",
                "seed"});
    get_to(j, "name", spec.name);
    get_to(j, "actions", spec.actions);
    get_to(j, "subactions_min", spec.subactions_min);
    get_to(j, "subactions_max", spec.subactions_max);
    get_to(j, "feature_dim", spec.feature_dim);
    get_to(j, "videos", spec.videos);
    get_to(j, "short_prob", spec.short_prob);
    get_to(j, "noise_sigma", spec.noise_sigma);
    get_to(j, "min_separation_deg", spec.min_separation_deg);
    if (j.contains("seed")) spec.seed = j.at("seed").get<uint64_t>();
    auto get_range = [&](const char* key, int& lo, int& hi) {
        if (!j.contains(key)) return;
        const json& r = j.at(key);
        if (!r.is_array() || r.size() != 2)
            throw ConfigError(std::string("config: ") + key + " must be [min, max]");
        lo = r[0].get<int>();
        hi = r[1].get<int>();
    };
    get_range("short_len", spec.short_len_min, spec.short_len_max);
    get_range("long_len", spec.long_len_min, spec.long_len_max);
    spec.validate();
    return spec;
}

json synth_spec_to_json(const SyntheticSpec& spec) {
    return json{{"name", spec.name},
                {"actions", spec.actions},
                {"subactions_min", spec.subactions_min},
                {"subactions_max", spec.subactions_max},
                {"feature_dim", spec.feature_dim},
                {"videos", spec.videos},
                {"short_len", {spec.short_len_min, spec.short_len_max}},
                {"long_len", {spec.long_len_min, spec.long_len_max}},
                {"short_prob", spec.short_prob},
                {"noise_sigma", spec.noise_sigma},
                {"min_separation_deg", spec.min_separation_deg},
                {"seed", spec.seed}};
}

uint64_t resolve_seed(const std::optional<uint64_t>& explicit_seed) {
    if (explicit_seed) return *explicit_seed;
    if (const char* env = std::getenv("HVQ_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("HVQ_SEED is not a valid integer");
        }
    }
    return 0;
}

}  // namespace hvq
