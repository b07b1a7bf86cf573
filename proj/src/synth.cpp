#include <cmath>
#include <fstream>
#include <random>

#include "hvq/dataset.hpp"
#include "hvq/error.hpp"

#include "json.hpp"

namespace hvq {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
    if (actions < 1) throw ConfigError("synth: actions must be >= 1");
    if (subactions_min < 1 || subactions_max < subactions_min)
        throw ConfigError("synth: bad subaction range");
    if (feature_dim < 2) throw ConfigError("synth: feature_dim must be >= 2");
    if (videos < 1) throw ConfigError("synth: videos must be >= 1");
    if (short_len_min < 1 || short_len_max < short_len_min || long_len_min < 1 ||
        long_len_max < long_len_min)
        throw ConfigError("synth: segment length ranges must be >= 1 and ordered");
    if (short_prob < 0.0 || short_prob > 1.0) throw ConfigError("synth: short_prob must lie in [0,1]");
    if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
    if (!(min_separation_deg > 0.0 && min_separation_deg <= 90.0))
        throw ConfigError("synth: min_separation_deg must lie in (0, 90]");
}

namespace {

void normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 1e-12)
        for (double& x : v) x /= n;
}

}  // namespace

ActivityDataset synth_generate(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Subaction counts per action, then one unit mean per subaction with
    // pairwise angle >= the requested separation.
    std::uniform_int_distribution<int> sub_count(spec.subactions_min, spec.subactions_max);
    std::vector<int> subs_per_action(spec.actions);
    int total_subs = 0;
    for (int& s : subs_per_action) {
        s = sub_count(rng);
        total_subs += s;
    }

    // Subaction means keep the pairwise floor everywhere, but same-action
    // means sit on a cap around a shared anchor direction so that subactions
    // are variations of their action rather than unrelated directions.
    // Without that affinity the action level is a purely temporal construct
    // that no clustering of the feature space can recover.
    const double max_cos = std::cos(spec.min_separation_deg * M_PI / 180.0);
    const double anchor_sep = std::min(150.0, spec.min_separation_deg + 25.0);
    const double anchor_max_cos = std::cos(anchor_sep * M_PI / 180.0);
    const double cap = 0.75 * spec.min_separation_deg * M_PI / 180.0;
    const int max_attempts = 20000;

    std::vector<std::vector<double>> anchors;
    for (int a = 0; a < spec.actions; ++a) {
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            std::vector<double> v(spec.feature_dim);
            for (double& x : v) x = gauss(rng);
            normalize(v);
            bool ok = true;
            for (const auto& m : anchors) {
                double c = 0.0;
                for (int d = 0; d < spec.feature_dim; ++d) c += v[d] * m[d];
                if (c > anchor_max_cos) ok = false;
            }
            if (ok) {
                anchors.push_back(std::move(v));
                placed = true;
            }
        }
        if (!placed)
            throw ConfigError("synth: cannot place " + std::to_string(spec.actions) +
                              " action anchors with " + std::to_string(anchor_sep) +
                              " deg separation; reduce actions or raise feature_dim");
    }

    std::vector<std::vector<double>> means;
    for (int a = 0; a < spec.actions; ++a) {
        for (int s = 0; s < subs_per_action[a]; ++s) {
            bool placed = false;
            for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
                // tangent direction orthogonal to the anchor
                std::vector<double> u(spec.feature_dim);
                for (double& x : u) x = gauss(rng);
                double au = 0.0;
                for (int d = 0; d < spec.feature_dim; ++d) au += anchors[a][d] * u[d];
                for (int d = 0; d < spec.feature_dim; ++d) u[d] -= au * anchors[a][d];
                normalize(u);
                std::vector<double> v(spec.feature_dim);
                for (int d = 0; d < spec.feature_dim; ++d)
                    v[d] = std::cos(cap) * anchors[a][d] + std::sin(cap) * u[d];
                bool ok = true;
                for (const auto& m : means) {
                    double c = 0.0;
                    for (int d = 0; d < spec.feature_dim; ++d) c += v[d] * m[d];
                    if (c > max_cos) ok = false;
                }
                if (ok) {
                    means.push_back(std::move(v));
                    placed = true;
                }
            }
            if (!placed)
                throw ConfigError(
                    "synth: cannot place " + std::to_string(total_subs) + " means with " +
                    std::to_string(spec.min_separation_deg) +
                    " deg separation; reduce actions/subactions or raise feature_dim");
        }
    }

    ActivityDataset ds;
    ds.name = spec.name;
    ds.K = spec.actions;
    for (int a = 0; a < spec.actions; ++a) ds.label_names.push_back("act" + std::to_string(a));

    std::uniform_int_distribution<int> short_len(spec.short_len_min, spec.short_len_max);
    std::uniform_int_distribution<int> long_len(spec.long_len_min, spec.long_len_max);

    for (int v = 0; v < spec.videos; ++v) {
        std::vector<double> frame(spec.feature_dim);
        std::vector<std::vector<double>> rows;
        std::vector<int> gt, gt_sub;
        int sub_base = 0;
        for (int a = 0; a < spec.actions; ++a) {
            for (int s = 0; s < subs_per_action[a]; ++s) {
                const int len = unit(rng) < spec.short_prob ? short_len(rng) : long_len(rng);
                const std::vector<double>& mean = means[sub_base + s];
                for (int f = 0; f < len; ++f) {
                    for (int d = 0; d < spec.feature_dim; ++d)
                        frame[d] = mean[d] + spec.noise_sigma * gauss(rng);
                    normalize(frame);
                    rows.push_back(frame);
                    gt.push_back(a);
                    gt_sub.push_back(sub_base + s);
                }
            }
            sub_base += subs_per_action[a];
        }
        VideoFeatures video;
        char buf[16];
        std::snprintf(buf, sizeof buf, "video%03d", v);
        video.id = buf;
        video.frames = SeqTensor(static_cast<int>(rows.size()), spec.feature_dim);
        for (size_t t = 0; t < rows.size(); ++t)
            for (int d = 0; d < spec.feature_dim; ++d) video.frames.at(static_cast<int>(t), d) = rows[t][d];
        ds.videos.push_back(std::move(video));
        ds.gt.push_back(std::move(gt));
        ds.gt_sub.push_back(std::move(gt_sub));
        ds.train_indices.push_back(v);
    }
    return ds;
}

void write_dataset(const ActivityDataset& dataset, const fs::path& dir) {
    fs::create_directories(dir / "features");
    fs::create_directories(dir / "labels");
    if (!dataset.gt_sub.empty()) fs::create_directories(dir / "labels_sub");

    for (size_t i = 0; i < dataset.videos.size(); ++i) {
        const VideoFeatures& v = dataset.videos[i];
        save_features_hvqf(dir / "features" / (v.id + ".hvqf"), v.frames);
        if (i < dataset.gt.size()) {
            const fs::path p = dir / "labels" / (v.id + ".txt");
            std::ofstream out(p.string() + ".tmp");
            for (int label : dataset.gt[i]) out << dataset.label_names[label] << '\n';
            out.close();
            fs::rename(p.string() + ".tmp", p);
        }
        if (i < dataset.gt_sub.size()) {
            const fs::path p = dir / "labels_sub" / (v.id + ".txt");
            std::ofstream out(p.string() + ".tmp");
            for (int label : dataset.gt_sub[i]) out << "sub" << label << '\n';
            out.close();
            fs::rename(p.string() + ".tmp", p);
        }
    }

    nlohmann::json meta;
    meta["activity"] = dataset.name;
    meta["K"] = dataset.K;
    meta["videos"] = dataset.videos.size();
    meta["feature_dim"] = dataset.videos.empty() ? 0 : dataset.videos[0].frames.cols;
    meta["labels"] = dataset.label_names;
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
}

}  // namespace hvq
