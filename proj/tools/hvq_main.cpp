// hvq command-line tool: synthetic data generation, per-activity training,
// segmentation, evaluation, and ablation sweeps.

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hvq/checkpoint.hpp"
#include "hvq/config.hpp"
#include "hvq/dataset.hpp"
#include "hvq/error.hpp"
#include "hvq/metrics.hpp"
#include "hvq/segmenter.hpp"
#include "hvq/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hvq;

namespace {

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError(tmp.string() + ": cannot open for writing");
        out << text;
        if (!out) throw DataError(path.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

RunConfig load_run_config(const std::optional<std::string>& config_path,
                          const std::optional<uint64_t>& seed_flag) {
    RunConfig cfg;
    bool config_has_seed = false;
    if (config_path) {
        const json j = load_json_file(*config_path);
        config_has_seed = j.contains("seed");
        cfg = parse_run_config(j);
    }
    if (seed_flag)
        cfg.train.seed = *seed_flag;
    else if (!config_has_seed)
        cfg.train.seed = resolve_seed(std::nullopt);
    return cfg;
}

Checkpoint make_checkpoint(const std::string& activity, const TrainedActivity& trained) {
    Checkpoint cp;
    cp.activity = activity;
    cp.config = trained.config;
    cp.model = trained.model;
    cp.books = trained.books;
    cp.epochs_done = trained.epochs_done;
    std::ostringstream os;
    os << trained.rng;
    cp.rng_state = os.str();
    return cp;
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(const std::optional<std::string>& spec_path, const std::string& out_dir) {
    SyntheticSpec spec;
    if (spec_path) spec = parse_synth_spec(load_json_file(*spec_path));
    ActivityDataset ds = synth_generate(spec);
    write_dataset(ds, out_dir);
    long frames = 0;
    for (const auto& v : ds.videos) frames += v.frames.rows;
    std::cout << "activity=" << ds.name << " videos=" << ds.videos.size() << " frames=" << frames
              << " K=" << ds.K << " F=" << spec.feature_dim << "\n";
    return 0;
}

// ---------------------------------------------------------------- train ----

int train_one(const ActivityDataset& activity, RunConfig cfg, const fs::path& out_file) {
    ActivityDataset subset = activity;
    if (cfg.protocol == Protocol::split_80_20)
        std::fprintf(stderr, "activity %s: training on %zu of %zu videos (80:20 split)\n",
                     activity.name.c_str(), activity.train_indices.size(),
                     activity.videos.size());
    TrainedActivity trained = train_activity(subset, cfg.train, &std::cerr);
    save_checkpoint(make_checkpoint(activity.name, trained), out_file);
    std::cout << "activity=" << activity.name
              << " final_loss=" << trained.report.epoch_loss.back()
              << " checkpoint=" << out_file.string() << "\n";
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& activity_name,
              const std::optional<std::string>& config_path, const std::string& out_path,
              const std::optional<uint64_t>& seed_flag, int jobs) {
    RunConfig cfg = load_run_config(config_path, seed_flag);
    auto activities =
        group_dataset(data_dir, cfg.protocol, cfg.train.seed, cfg.background_token);

    std::vector<const ActivityDataset*> selected;
    for (const auto& a : activities)
        if (activity_name == "all" || a.name == activity_name) selected.push_back(&a);
    if (selected.empty()) throw DataError("activity '" + activity_name + "' not found in dataset");

    const bool out_is_dir = selected.size() > 1 || activity_name == "all";
    if (out_is_dir) fs::create_directories(out_path);

    auto out_file = [&](const std::string& name) {
        return out_is_dir ? fs::path(out_path) / (name + ".hvqc") : fs::path(out_path);
    };

    if (jobs <= 1 || selected.size() == 1) {
        for (const auto* a : selected) train_one(*a, cfg, out_file(a->name));
        return 0;
    }

    // opt-in process-level parallelism across activities
    int status_worst = 0;
    size_t next = 0;
    std::vector<pid_t> running;
    auto reap = [&](bool block) {
        int status = 0;
        const pid_t pid = waitpid(-1, &status, block ? 0 : WNOHANG);
        if (pid > 0) {
            running.erase(std::remove(running.begin(), running.end(), pid), running.end());
            const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
            status_worst = std::max(status_worst, code);
        }
        return pid > 0;
    };
    while (next < selected.size() || !running.empty()) {
        while (next < selected.size() && static_cast<int>(running.size()) < jobs) {
            const ActivityDataset* a = selected[next++];
            const pid_t pid = fork();
            if (pid == 0) {
                try {
                    _exit(train_one(*a, cfg, out_file(a->name)));
                } catch (const std::exception& e) {
                    std::fprintf(stderr, "error: %s\n", e.what());
                    _exit(2);
                }
            }
            running.push_back(pid);
        }
        reap(true);
    }
    return status_worst;
}

// -------------------------------------------------------------- segment ----

DecodeMethod parse_decoder(const std::string& name) {
    if (name == "fifa") return DecodeMethod::fifa;
    if (name == "dp") return DecodeMethod::dp;
    if (name == "argmax") return DecodeMethod::argmax;
    throw ConfigError("unknown decoder '" + name + "' (expected fifa, dp or argmax)");
}

void segment_activity(Checkpoint& cp, const ActivityDataset& activity,
                      const DecodeOptions& options, DecodeMethod method, const fs::path& out_dir) {
    if (!activity.videos.empty() &&
        activity.videos[0].frames.cols != cp.config.tcn.input_dim)
        throw DataError("checkpoint for '" + cp.activity + "' expects " +
                        std::to_string(cp.config.tcn.input_dim) + " feature channels, dataset has " +
                        std::to_string(activity.videos[0].frames.cols));

    ActivityInference inference = infer_assignments(cp.model, cp.books, activity.videos);

    std::vector<std::vector<int>> labels(activity.videos.size());
    for (size_t v = 0; v < activity.videos.size(); ++v) {
        try {
            labels[v] = segment_video(cp.model, cp.books, activity.videos[v].frames, method,
                                      inference.order, inference.prior, options);
        } catch (const DataError& e) {
            throw DataError(std::string(e.what()) + " (video '" + activity.videos[v].id + "')");
        }
    }

    fs::create_directories(out_dir);
    for (size_t v = 0; v < activity.videos.size(); ++v)
        save_label_indices(out_dir / (activity.videos[v].id + ".txt"), labels[v]);

    json sidecar;
    sidecar["activity"] = activity.name;
    sidecar["cluster_order"] = inference.order.order;
    sidecar["length_prior"] = inference.prior.pi;
    write_text_atomic(out_dir / "decode_info.json", sidecar.dump(2) + "\n");
}

int cmd_segment(const std::string& checkpoint_path, const std::string& data_dir,
                const std::string& decoder, const std::optional<std::string>& config_path,
                const std::string& out_dir) {
    RunConfig cfg = load_run_config(config_path, std::nullopt);
    const DecodeMethod method = parse_decoder(decoder);
    auto activities = group_dataset(data_dir, Protocol::full, 0, cfg.background_token);

    for (const ActivityDataset& activity : activities) {
        fs::path file = checkpoint_path;
        if (fs::is_directory(file)) file = file / (activity.name + ".hvqc");
        if (!fs::exists(file))
            throw DataError("no checkpoint for activity '" + activity.name + "' at " +
                            file.string());
        Checkpoint cp = load_checkpoint(file);
        segment_activity(cp, activity, cfg.decode, method, fs::path(out_dir) / activity.name);
        std::cout << "activity=" << activity.name << " videos=" << activity.videos.size()
                  << " decoder=" << decoder << "\n";
    }
    return 0;
}

// ----------------------------------------------------------------- eval ----

std::vector<ActivityEval> collect_eval_sets(const std::string& pred_dir,
                                            const std::string& gt_dir,
                                            const std::optional<std::string>& background_token) {
    auto activities = group_dataset(gt_dir, Protocol::full, 0, background_token);
    std::vector<ActivityEval> sets;
    for (const ActivityDataset& activity : activities) {
        if (activity.gt.empty())
            throw DataError("activity '" + activity.name + "' has no ground-truth labels");
        ActivityEval ev;
        ev.name = activity.name;
        ev.gt = activity.gt;
        ev.background_label = activity.background_label;
        const fs::path adir = fs::path(pred_dir) / activity.name;
        for (size_t v = 0; v < activity.videos.size(); ++v) {
            const fs::path file = adir / (activity.videos[v].id + ".txt");
            if (!fs::exists(file))
                throw DataError("missing prediction for video '" + activity.videos[v].id +
                                "' of activity '" + activity.name + "'");
            std::vector<int> pred = load_label_indices(file);
            if (pred.size() != ev.gt[v].size())
                throw DataError("prediction length mismatch on video '" +
                                activity.videos[v].id + "' (" + std::to_string(pred.size()) +
                                " vs " + std::to_string(ev.gt[v].size()) + ")");
            ev.pred.push_back(std::move(pred));
        }
        sets.push_back(std::move(ev));
    }
    return sets;
}

json report_to_json(const MetricsReport& report) {
    json j;
    auto pct = [](double v) { return v * 100.0; };
    j["aggregate"] = {{"mof", pct(report.mof)},
                      {"precision", pct(report.precision)},
                      {"recall", pct(report.recall)},
                      {"f1", pct(report.f1)},
                      {"mof_frame_weighted", pct(report.mof_frame_weighted)},
                      {"f1_frame_weighted", pct(report.f1_frame_weighted)}};
    if (report.jsd) j["aggregate"]["jsd"] = pct(*report.jsd);
    j["activities"] = json::array();
    for (const ActivityMetrics& am : report.per_activity) {
        json a = {{"activity", am.activity}, {"mof", pct(am.mof)},
                  {"precision", pct(am.precision)}, {"recall", pct(am.recall)},
                  {"f1", pct(am.f1)}, {"frames", am.frames},
                  {"mapping", am.mapping}};
        if (am.jsd) a["jsd"] = pct(*am.jsd);
        j["activities"].push_back(std::move(a));
    }
    return j;
}

void export_histograms(const std::vector<ActivityEval>& sets, const fs::path& hist_dir) {
    constexpr int kBinWidth = 20;
    for (const ActivityEval& ev : sets) {
        const fs::path adir = hist_dir / ev.name;
        fs::create_directories(adir);
        for (size_t v = 0; v < ev.pred.size(); ++v) {
            const auto pred_segs = extract_segments(ev.pred[v]);
            const auto gt_segs = extract_segments(ev.gt[v]);
            int max_len = 0;
            for (const Segment& s : pred_segs) max_len = std::max(max_len, s.length);
            for (const Segment& s : gt_segs) max_len = std::max(max_len, s.length);
            const int bins = max_len / kBinWidth + 1;
            auto hp = length_histogram(pred_segs, kBinWidth, bins);
            auto hg = length_histogram(gt_segs, kBinWidth, bins);
            for (double& x : hp) x /= static_cast<double>(pred_segs.size());
            for (double& x : hg) x /= static_cast<double>(gt_segs.size());
            std::ostringstream csv;
            csv << "bin_start,pred,gt\n";
            for (int b = 0; b < bins; ++b)
                csv << b * kBinWidth << "," << hp[b] << "," << hg[b] << "\n";
            write_text_atomic(adir / ("video" + std::to_string(v) + ".csv"), csv.str());
        }
    }
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::optional<std::string>& background_token, const std::string& out_file,
             const std::optional<std::string>& hist_dir) {
    auto sets = collect_eval_sets(pred_dir, gt_dir, background_token);
    MetricsReport report = evaluate(sets, {});
    write_text_atomic(out_file, report_to_json(report).dump(2) + "\n");
    if (hist_dir) export_histograms(sets, *hist_dir);
    std::cout << "mof=" << report.mof * 100 << " f1=" << report.f1 * 100;
    if (report.jsd) std::cout << " jsd=" << *report.jsd * 100;
    std::cout << "\n";
    return 0;
}

// --------------------------------------------------------------- ablate ----

struct AblationSetting {
    std::string value;
    RunConfig cfg;
};

std::vector<AblationSetting> ablation_grid(const std::string& axis, const RunConfig& base) {
    std::vector<AblationSetting> grid;
    auto add = [&](const std::string& value, RunConfig cfg) { grid.push_back({value, cfg}); };
    if (axis == "loss_terms") {
        const std::vector<std::pair<std::string, LossFlags>> combos = {
            {"rec", {true, false, false}},
            {"commit_q", {false, false, true}},
            {"commit_z", {false, true, false}},
            {"commit_z+commit_q", {false, true, true}},
            {"rec+commit_q", {true, false, true}},
            {"rec+commit_z", {true, true, false}},
            {"rec+commit_z+commit_q", {true, true, true}},
        };
        for (const auto& [name, flags] : combos) {
            RunConfig cfg = base;
            cfg.train.loss_terms = flags;
            add(name, cfg);
        }
    } else if (axis == "lambda_rec") {
        for (double v : {0.0005, 0.001, 0.002, 0.005, 0.01}) {
            RunConfig cfg = base;
            cfg.train.lambda_rec = v;
            std::ostringstream os;
            os << v;
            add(os.str(), cfg);
        }
    } else if (axis == "alpha") {
        for (int a : {1, 2, 3, 4}) {
            RunConfig cfg = base;
            cfg.train.hvq.alpha.assign(std::max(1, cfg.train.hvq.levels - 1), a);
            add(std::to_string(a), cfg);
        }
    } else if (axis == "levels") {
        for (int l : {1, 2, 3}) {
            RunConfig cfg = base;
            cfg.train.hvq.levels = l;
            const int a = cfg.train.hvq.alpha.empty() ? 2 : cfg.train.hvq.alpha[0];
            cfg.train.hvq.alpha.assign(std::max(1, l - 1), a);
            add(l == 1 ? "single" : (l == 2 ? "double" : "triple"), cfg);
        }
    } else if (axis == "ema_decay") {
        for (double b : {0.7, 0.75, 0.8, 0.85, 0.9}) {
            RunConfig cfg = base;
            cfg.train.hvq.ema_decay = b;
            std::ostringstream os;
            os << b;
            add(os.str(), cfg);
        }
    } else if (axis == "decoder_kind") {
        for (DecoderKind k : {DecoderKind::tcn, DecoderKind::mlp}) {
            RunConfig cfg = base;
            cfg.train.tcn.decoder_kind = k;
            add(k == DecoderKind::tcn ? "tcn" : "mlp", cfg);
        }
    } else {
        throw ConfigError("unknown ablation axis '" + axis + "'");
    }
    return grid;
}

int cmd_ablate(const std::string& data_dir, const std::string& axis,
               const std::optional<std::string>& config_path, const std::string& out_file,
               const std::optional<uint64_t>& seed_flag) {
    const RunConfig base = load_run_config(config_path, seed_flag);
    auto activities = group_dataset(data_dir, base.protocol, base.train.seed,
                                    base.background_token);
    for (const auto& a : activities)
        if (a.gt.empty())
            throw DataError("ablation needs ground-truth labels; activity '" + a.name +
                            "' has none");

    std::ostringstream csv;
    csv << "axis,value,mof,f1,precision,recall,jsd\n";
    for (const AblationSetting& setting : ablation_grid(axis, base)) {
        std::vector<ActivityEval> sets;
        for (const ActivityDataset& activity : activities) {
            TrainedActivity trained = train_activity(activity, setting.cfg.train, &std::cerr);
            ActivityInference inference =
                infer_assignments(trained.model, trained.books, activity.videos);
            ActivityEval ev;
            ev.name = activity.name;
            ev.gt = activity.gt;
            ev.background_label = activity.background_label;
            for (const VideoFeatures& video : activity.videos)
                ev.pred.push_back(segment_video(trained.model, trained.books, video.frames,
                                                DecodeMethod::fifa, inference.order,
                                                inference.prior, setting.cfg.decode));
            sets.push_back(std::move(ev));
        }
        MetricsReport report = evaluate(sets, {});
        csv << axis << "," << setting.value << "," << report.mof * 100 << "," << report.f1 * 100
            << "," << report.precision * 100 << "," << report.recall * 100 << ",";
        if (report.jsd) csv << *report.jsd * 100;
        csv << "\n";
        std::fprintf(stderr, "ablate %s=%s done\n", axis.c_str(), setting.value.c_str());
    }
    write_text_atomic(out_file, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical vector quantization for unsupervised action segmentation"};
    app.require_subcommand(1);

    std::optional<std::string> spec_path, config_path, background, hist_dir;
    std::optional<uint64_t> seed_flag;
    std::string out_path, data_dir, activity = "all", decoder = "fifa";
    std::string pred_dir, gt_dir, checkpoint_path, axis;
    int jobs = 1;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "synthetic spec JSON file");
    synth->add_option("--out", out_path, "output dataset directory")->required();

    CLI::App* train = app.add_subcommand("train", "train one activity or all");
    train->add_option("--data", data_dir, "dataset root")->required();
    train->add_option("--activity", activity, "activity name or 'all'");
    train->add_option("--config", config_path, "run config JSON file");
    train->add_option("--out", out_path, "checkpoint file (single activity) or directory")
        ->required();
    train->add_option("--seed", seed_flag, "seed override");
    train->add_option("--jobs", jobs, "parallel activities (processes)");

    CLI::App* segment = app.add_subcommand("segment", "decode segmentations from a checkpoint");
    segment->add_option("--checkpoint", checkpoint_path, "checkpoint file or directory")
        ->required();
    segment->add_option("--data", data_dir, "dataset root")->required();
    segment->add_option("--decoder", decoder, "fifa | dp | argmax");
    segment->add_option("--config", config_path, "run config JSON file");
    segment->add_option("--out", out_path, "output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
    eval->add_option("--pred", pred_dir, "prediction directory")->required();
    eval->add_option("--gt", gt_dir, "ground-truth dataset root")->required();
    eval->add_option("--background-label", background, "token to mask out");
    eval->add_option("--out", out_path, "metrics JSON output")->required();
    eval->add_option("--hist-out", hist_dir, "per-video histogram CSV directory");

    CLI::App* ablate = app.add_subcommand("ablate", "sweep one hyperparameter axis");
    ablate->add_option("--data", data_dir, "dataset root")->required();
    ablate
        ->add_option("--axis", axis,
                     "loss_terms | lambda_rec | alpha | levels | ema_decay | decoder_kind")
        ->required();
    ablate->add_option("--config", config_path, "run config JSON file");
    ablate->add_option("--out", out_path, "output CSV")->required();
    ablate->add_option("--seed", seed_flag, "seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(spec_path, out_path);
        if (train->parsed())
            return cmd_train(data_dir, activity, config_path, out_path, seed_flag, jobs);
        if (segment->parsed())
            return cmd_segment(checkpoint_path, data_dir, decoder, config_path, out_path);
        if (eval->parsed()) return cmd_eval(pred_dir, gt_dir, background, out_path, hist_dir);
        if (ablate->parsed())
            return cmd_ablate(data_dir, axis, config_path, out_path, seed_flag);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
