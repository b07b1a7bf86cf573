#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "hvq/checkpoint.hpp"
#include "hvq/dataset.hpp"
#include "hvq/error.hpp"
#include "hvq/train.hpp"

using namespace hvq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hvq_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

SeqTensor random_tensor(int r, int c, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1, 1);
    SeqTensor t(r, c);
    for (double& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("hvqf float32 round trip preserves the float32 image of the data") {
    TempDir dir;
    SeqTensor t = random_tensor(13, 7, 1);
    // snap to float32 so the round trip is bitwise
    for (double& v : t.data) v = static_cast<float>(v);
    const fs::path file = dir.path / "a.hvqf";
    save_features_hvqf(file, t);
    SeqTensor back = load_features(file);
    CHECK(back.rows == 13);
    CHECK(back.cols == 7);
    CHECK(back.data == t.data);
}

TEST_CASE("truncated hvqf files are rejected with no partial result") {
    TempDir dir;
    SeqTensor t = random_tensor(4, 4, 2);
    const fs::path file = dir.path / "a.hvqf";
    save_features_hvqf(file, t);
    // chop the payload
    fs::resize_file(file, 16 + 10);
    CHECK_THROWS_AS(load_features(file), FormatError);
}

TEST_CASE("csv fallback parses one frame per line") {
    TempDir dir;
    const fs::path file = dir.path / "a.csv";
    std::ofstream(file) << "1.5,2.5\n3.0,4.0\n5.0,6.0\n";
    SeqTensor t = load_features(file);
    CHECK(t.rows == 3);
    CHECK(t.cols == 2);
    CHECK(t.at(0, 0) == 1.5);
    CHECK(t.at(2, 1) == 6.0);

    std::ofstream(dir.path / "bad.csv") << "1.0,2.0\n3.0\n";
    CHECK_THROWS_AS(load_features(dir.path / "bad.csv"), FormatError);
}

TEST_CASE("label loading maps tokens to dense indices") {
    TempDir dir;
    const fs::path file = dir.path / "l.txt";
    std::ofstream(file) << "pour\npour\nstir\n";
    std::vector<std::string> names;
    auto idx = map_tokens(load_label_tokens(file), names, false);
    CHECK(idx == std::vector<int>{0, 0, 1});
    CHECK(names == std::vector<std::string>{"pour", "stir"});

    CHECK_THROWS_AS(map_tokens({"chop"}, names, true), DataError);

    std::ofstream(dir.path / "empty.txt") << "";
    CHECK_THROWS_AS(load_label_tokens(dir.path / "empty.txt"), DataError);
}

TEST_CASE("synth_generate is deterministic and separable") {
    SyntheticSpec spec;
    spec.actions = 4;
    spec.feature_dim = 16;
    spec.videos = 20;
    spec.noise_sigma = 0.05;
    spec.min_separation_deg = 60;
    spec.seed = 0;
    ActivityDataset a = synth_generate(spec);
    ActivityDataset b = synth_generate(spec);
    REQUIRE(a.videos.size() == 20);
    CHECK(a.K == 4);
    for (size_t v = 0; v < a.videos.size(); ++v) {
        CHECK(a.videos[v].frames.data == b.videos[v].frames.data);
        CHECK(a.gt[v] == b.gt[v]);
        CHECK(a.gt_sub[v] == b.gt_sub[v]);
    }

    // nearest-subaction-mean classification must reach MoF >= 0.99:
    // recover the per-subaction means from the noise-free generator
    SyntheticSpec clean = spec;
    clean.noise_sigma = 0.0;
    ActivityDataset noiseless = synth_generate(clean);
    int max_sub = 0;
    for (const auto& subs : noiseless.gt_sub)
        for (int s : subs) max_sub = std::max(max_sub, s);
    SeqTensor means(max_sub + 1, spec.feature_dim);
    std::vector<int> seen(max_sub + 1, 0);
    std::vector<int> sub_to_action(max_sub + 1, 0);
    for (size_t v = 0; v < noiseless.videos.size(); ++v)
        for (int t = 0; t < noiseless.videos[v].frames.rows; ++t) {
            const int s = noiseless.gt_sub[v][t];
            if (seen[s]) continue;
            seen[s] = 1;
            sub_to_action[s] = noiseless.gt[v][t];
            for (int c = 0; c < spec.feature_dim; ++c)
                means.at(s, c) = noiseless.videos[v].frames.at(t, c);
        }

    long correct = 0, total = 0;
    for (size_t v = 0; v < a.videos.size(); ++v)
        for (int t = 0; t < a.videos[v].frames.rows; ++t) {
            int best = 0;
            double best_dot = -2;
            for (int s = 0; s <= max_sub; ++s) {
                const double d = dot(a.videos[v].frames.row(t), means.row(s), spec.feature_dim);
                if (d > best_dot) {
                    best_dot = d;
                    best = s;
                }
            }
            correct += sub_to_action[best] == a.gt[v][t] ? 1 : 0;
            ++total;
        }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("synth noise-free frames sit exactly on the means") {
    SyntheticSpec spec;
    spec.actions = 2;
    spec.videos = 2;
    spec.noise_sigma = 0.0;
    spec.seed = 3;
    ActivityDataset ds = synth_generate(spec);
    // frames of the same subaction are identical across videos
    for (int t0 = 0; t0 < ds.videos[0].frames.rows; ++t0)
        for (int t1 = 0; t1 < ds.videos[1].frames.rows; ++t1)
            if (ds.gt_sub[0][t0] == ds.gt_sub[1][t1])
                for (int c = 0; c < spec.feature_dim; ++c)
                    CHECK(ds.videos[0].frames.at(t0, c) ==
                          doctest::Approx(ds.videos[1].frames.at(t1, c)).epsilon(1e-12));
}

TEST_CASE("infeasible separation raises a config error") {
    SyntheticSpec spec;
    spec.actions = 30;
    spec.subactions_min = spec.subactions_max = 3;
    spec.feature_dim = 2;
    spec.min_separation_deg = 80;
    CHECK_THROWS_AS(synth_generate(spec), ConfigError);
}

TEST_CASE("write_dataset and group_dataset round trip") {
    TempDir dir;
    SyntheticSpec spec;
    spec.name = "demo";
    spec.actions = 3;
    spec.videos = 10;
    spec.seed = 9;
    ActivityDataset ds = synth_generate(spec);
    write_dataset(ds, dir.path / "demo");

    auto activities = group_dataset(dir.path, Protocol::full, 0, std::nullopt);
    REQUIRE(activities.size() == 1);
    const ActivityDataset& back = activities[0];
    CHECK(back.name == "demo");
    CHECK(back.K == 3);
    REQUIRE(back.videos.size() == ds.videos.size());
    for (size_t v = 0; v < back.videos.size(); ++v) {
        CHECK(back.videos[v].id == ds.videos[v].id);
        CHECK(back.gt[v] == ds.gt[v]);
        // float32 quantization on disk
        for (size_t i = 0; i < back.videos[v].frames.data.size(); ++i)
            CHECK(back.videos[v].frames.data[i] ==
                  doctest::Approx(ds.videos[v].frames.data[i]).epsilon(1e-6));
    }

    // single-activity root works too
    auto direct = group_dataset(dir.path / "demo", Protocol::full, 0, std::nullopt);
    CHECK(direct.size() == 1);

    // 80:20 split is deterministic and sized correctly
    auto split_a = group_dataset(dir.path, Protocol::split_80_20, 7, std::nullopt);
    auto split_b = group_dataset(dir.path, Protocol::split_80_20, 7, std::nullopt);
    CHECK(split_a[0].train_indices == split_b[0].train_indices);
    CHECK(split_a[0].train_indices.size() == 8);
    CHECK(split_a[0].test_indices.size() == 2);
}

TEST_CASE("group_dataset errors on an empty root") {
    TempDir dir;
    CHECK_THROWS_AS(group_dataset(dir.path, Protocol::full, 0, std::nullopt), DataError);
}

TEST_CASE("checkpoint round trip is bitwise and resumable") {
    SyntheticSpec spec;
    spec.actions = 2;
    spec.videos = 3;
    spec.feature_dim = 6;
    spec.short_len_min = 5;
    spec.short_len_max = 8;
    spec.long_len_min = 10;
    spec.long_len_max = 14;
    spec.seed = 5;
    ActivityDataset ds = synth_generate(spec);

    TrainConfig cfg;
    cfg.tcn.stages = 1;
    cfg.tcn.layers_per_stage = 2;
    cfg.tcn.hidden_channels = 6;
    cfg.tcn.latent_dim = 4;
    cfg.hvq.K = 2;
    cfg.epochs = 2;
    TrainedActivity trained = train_activity(ds, cfg, nullptr);

    TempDir dir;
    const fs::path file = dir.path / "a.hvqc";
    Checkpoint cp;
    cp.activity = ds.name;
    cp.config = trained.config;
    cp.model = trained.model;
    cp.books = trained.books;
    cp.epochs_done = trained.epochs_done;
    {
        std::ostringstream os;
        os << trained.rng;
        cp.rng_state = os.str();
    }
    save_checkpoint(cp, file);

    Checkpoint back = load_checkpoint(file);
    CHECK(back.activity == cp.activity);
    for (size_t i = 0; i < cp.model.encoder_params.count(); ++i) {
        const Param& a = cp.model.encoder_params[static_cast<int>(i)];
        const Param& b = back.model.encoder_params[static_cast<int>(i)];
        CHECK(a.value == b.value);
        CHECK(a.m == b.m);
        CHECK(a.v == b.v);
    }
    CHECK(back.books[0].prototypes.data == cp.books[0].prototypes.data);
    CHECK(back.books[0].mass == cp.books[0].mass);

    // save -> load -> save gives byte-identical files
    const fs::path file2 = dir.path / "b.hvqc";
    save_checkpoint(back, file2);
    std::ifstream f1(file, std::ios::binary), f2(file2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);

    // continuation equivalence: one more step from the loaded state matches
    // one more step of the uninterrupted run exactly
    std::mt19937_64 rng_restored;
    std::istringstream(back.rng_state) >> rng_restored;
    TcnModel resumed_model = back.model;
    auto resumed_books = back.books;
    StepLosses resumed =
        train_step(resumed_model, resumed_books, ds.videos[0], back.config, rng_restored);

    TcnModel direct_model = trained.model;
    auto direct_books = trained.books;
    std::mt19937_64 direct_rng = trained.rng;
    StepLosses direct =
        train_step(direct_model, direct_books, ds.videos[0], trained.config, direct_rng);

    CHECK(resumed.total == direct.total);
    CHECK(resumed_model.encoder_params[0].value == direct_model.encoder_params[0].value);
    CHECK(resumed_books[0].prototypes.data == direct_books[0].prototypes.data);
}

TEST_CASE("checkpoint with wrong magic is rejected") {
    TempDir dir;
    const fs::path file = dir.path / "bad.hvqc";
    std::ofstream(file) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(file), FormatError);
}
