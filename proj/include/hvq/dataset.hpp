#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hvq/tensor.hpp"

namespace hvq {

struct VideoFeatures {
    std::string id;
    SeqTensor frames;  // T x F
};

struct ActivityDataset {
    std::string name;
    std::vector<VideoFeatures> videos;
    std::vector<std::vector<int>> gt;      // per-video frame labels; empty when unlabeled
    std::vector<std::vector<int>> gt_sub;  // optional finer-grained track
    std::vector<std::string> label_names;  // dense index -> token
    int K = 0;
    std::optional<int> background_label;
    std::vector<int> train_indices;  // protocol split; `full` puts everything here
    std::vector<int> test_indices;
};

// HVQF feature file: "HVQF", u32 version, u32 T, u32 F, then T*F little-endian
// floats row-major (version 1 = float32, version 2 = float64). Files with a
// different first line are parsed as comma-separated text, one frame per line.
SeqTensor load_features(const std::filesystem::path& path);
void save_features_hvqf(const std::filesystem::path& path, const SeqTensor& frames,
                        bool float64 = false);

std::vector<std::string> load_label_tokens(const std::filesystem::path& path);

// Pred-side label files: one integer per line.
std::vector<int> load_label_indices(const std::filesystem::path& path);
void save_label_indices(const std::filesystem::path& path, const std::vector<int>& labels);

// Maps tokens through `token_to_index`; unknown tokens throw in strict mode,
// otherwise extend the map.
std::vector<int> map_tokens(const std::vector<std::string>& tokens,
                            std::vector<std::string>& index_to_token, bool strict);

enum class Protocol { full, split_80_20 };

// Expects <root>/<activity>/features/*.{hvqf,csv} with label sidecars in
// labels/ (and optionally labels_sub/) named by the same stem. A root that
// itself contains features/ is treated as a single activity.
std::vector<ActivityDataset> group_dataset(const std::filesystem::path& root, Protocol protocol,
                                           uint64_t seed,
                                           const std::optional<std::string>& background_token);

struct SyntheticSpec {
    std::string name = "synth";
    int actions = 4;  // K
    int subactions_min = 2;
    int subactions_max = 3;
    int feature_dim = 16;
    int videos = 20;
    int short_len_min = 16, short_len_max = 28;
    int long_len_min = 48, long_len_max = 80;
    double short_prob = 0.5;
    double noise_sigma = 0.05;
    double min_separation_deg = 60.0;
    uint64_t seed = 0;

    void validate() const;
};

// Deterministic synthetic activity: unit subaction mean directions with
// pairwise angle >= min_separation_deg, videos visiting all actions in a
// fixed order, each action running through its subactions in order. Frames
// are the active mean plus Gaussian noise, re-normalized. Ground truth is
// emitted at action (gt) and subaction (gt_sub) granularity.
ActivityDataset synth_generate(const SyntheticSpec& spec);

// Writes <dir>/features/*.hvqf, labels/*.txt, labels_sub/*.txt, meta.json.
void write_dataset(const ActivityDataset& dataset, const std::filesystem::path& dir);

}  // namespace hvq
