#include "hvq/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

#include "hvq/error.hpp"

namespace hvq {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'H', 'V', 'Q', 'F'};

uint32_t read_u32(std::istream& in, const std::string& what, const fs::path& path) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4))
        throw FormatError(path.string() + ": truncated while reading " + what + " at byte " +
                          std::to_string(static_cast<long>(in.tellg()) < 0 ? 0L : static_cast<long>(in.tellg())));
    return v;
}

SeqTensor load_csv_features(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open");
    std::vector<double> values;
    int cols = -1, rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int c = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": bad number '" + cell + "' on line " +
                                  std::to_string(rows + 1));
            }
            ++c;
        }
        if (cols == -1) cols = c;
        if (c != cols)
            throw FormatError(path.string() + ": line " + std::to_string(rows + 1) + " has " +
                              std::to_string(c) + " columns, expected " + std::to_string(cols));
        ++rows;
    }
    if (rows == 0 || cols < 1) throw FormatError(path.string() + ": no data rows");
    SeqTensor t(rows, cols);
    t.data = std::move(values);
    return t;
}

}  // namespace

SeqTensor load_features(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open");
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) return load_csv_features(path);

    const uint32_t version = read_u32(in, "version", path);
    if (version != 1 && version != 2)
        throw FormatError(path.string() + ": unsupported HVQF version " + std::to_string(version));
    const uint32_t T = read_u32(in, "frame count", path);
    const uint32_t F = read_u32(in, "feature dim", path);
    if (T < 1 || F < 1) throw FormatError(path.string() + ": empty tensor header");

    SeqTensor t(static_cast<int>(T), static_cast<int>(F));
    const size_t n = t.size();
    if (version == 1) {
        std::vector<float> buf(n);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4)))
            throw FormatError(path.string() + ": truncated payload at byte " +
                              std::to_string(16 + static_cast<long>(in.gcount())));
        for (size_t i = 0; i < n; ++i) t.data[i] = static_cast<double>(buf[i]);
    } else {
        if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * 8)))
            throw FormatError(path.string() + ": truncated payload at byte " +
                              std::to_string(16 + static_cast<long>(in.gcount())));
    }
    return t;
}

void save_features_hvqf(const fs::path& path, const SeqTensor& frames, bool float64) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError(tmp.string() + ": cannot open for writing");
        out.write(kMagic, 4);
        const uint32_t version = float64 ? 2 : 1;
        const uint32_t T = static_cast<uint32_t>(frames.rows);
        const uint32_t F = static_cast<uint32_t>(frames.cols);
        out.write(reinterpret_cast<const char*>(&version), 4);
        out.write(reinterpret_cast<const char*>(&T), 4);
        out.write(reinterpret_cast<const char*>(&F), 4);
        if (float64) {
            out.write(reinterpret_cast<const char*>(frames.data.data()),
                      static_cast<std::streamsize>(frames.size() * 8));
        } else {
            std::vector<float> buf(frames.size());
            for (size_t i = 0; i < frames.size(); ++i) buf[i] = static_cast<float>(frames.data[i]);
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * 4));
        }
        if (!out) throw DataError(path.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

std::vector<std::string> load_label_tokens(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) tokens.push_back(line);
    }
    if (tokens.empty()) throw DataError(path.string() + ": empty label file");
    return tokens;
}

std::vector<int> load_label_indices(const fs::path& path) {
    const std::vector<std::string> tokens = load_label_tokens(path);
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const std::string& t : tokens) {
        try {
            out.push_back(std::stoi(t));
        } catch (const std::exception&) {
            throw DataError(path.string() + ": expected integer label, got '" + t + "'");
        }
    }
    return out;
}

void save_label_indices(const fs::path& path, const std::vector<int>& labels) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError(tmp.string() + ": cannot open for writing");
        for (int v : labels) out << v << '\n';
        if (!out) throw DataError(path.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

std::vector<int> map_tokens(const std::vector<std::string>& tokens,
                            std::vector<std::string>& index_to_token, bool strict) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const std::string& tok : tokens) {
        auto it = std::find(index_to_token.begin(), index_to_token.end(), tok);
        if (it == index_to_token.end()) {
            if (strict) throw DataError("unknown label token '" + tok + "'");
            index_to_token.push_back(tok);
            it = std::prev(index_to_token.end());
        }
        out.push_back(static_cast<int>(it - index_to_token.begin()));
    }
    return out;
}

namespace {

std::vector<std::vector<int>> load_label_dir(const fs::path& dir,
                                             const std::vector<std::string>& stems,
                                             std::vector<std::string>& names, bool strict) {
    std::vector<std::vector<int>> out;
    for (const std::string& stem : stems) {
        const fs::path p = dir / (stem + ".txt");
        out.push_back(map_tokens(load_label_tokens(p), names, strict));
    }
    return out;
}

std::string activity_name_for(const fs::path& dir) {
    const fs::path meta = dir / "meta.json";
    if (fs::exists(meta)) {
        std::ifstream in(meta);
        try {
            const auto j = nlohmann::json::parse(in);
            if (j.contains("activity")) return j.at("activity").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            // fall through to the directory name
        }
    }
    return dir.filename().string();
}

ActivityDataset load_activity(const fs::path& dir, const std::string& name, Protocol protocol,
                              uint64_t seed, const std::optional<std::string>& background_token) {
    const fs::path feat_dir = dir / "features";
    if (!fs::is_directory(feat_dir)) throw DataError(dir.string() + ": missing features/");
    std::vector<fs::path> feature_files;
    for (const auto& entry : fs::directory_iterator(feat_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".hvqf" || ext == ".csv") feature_files.push_back(entry.path());
    }
    std::sort(feature_files.begin(), feature_files.end());
    if (feature_files.empty()) throw DataError(dir.string() + ": no feature files");

    const fs::path labels_dir = dir / "labels";
    const bool labeled = fs::is_directory(labels_dir);

    ActivityDataset ds;
    ds.name = name;
    std::vector<std::string> stems;
    for (const fs::path& f : feature_files) {
        const std::string stem = f.stem().string();
        if (labeled && !fs::exists(labels_dir / (stem + ".txt"))) {
            std::fprintf(stderr, "warning: %s has no label sidecar, excluding video\n",
                         f.string().c_str());
            continue;
        }
        VideoFeatures v;
        v.id = stem;
        v.frames = load_features(f);
        ds.videos.push_back(std::move(v));
        stems.push_back(stem);
    }
    if (ds.videos.empty()) throw DataError(dir.string() + ": no usable videos");
    for (size_t i = 1; i < ds.videos.size(); ++i)
        if (ds.videos[i].frames.cols != ds.videos[0].frames.cols)
            throw DataError(dir.string() + ": inconsistent feature width in video " +
                            ds.videos[i].id);

    if (labeled) {
        ds.gt = load_label_dir(labels_dir, stems, ds.label_names, false);
        for (size_t i = 0; i < ds.videos.size(); ++i)
            if (static_cast<int>(ds.gt[i].size()) != ds.videos[i].frames.rows)
                throw DataError(name + "/" + ds.videos[i].id + ": " +
                                std::to_string(ds.gt[i].size()) + " labels for " +
                                std::to_string(ds.videos[i].frames.rows) + " frames");
        if (background_token) {
            auto it = std::find(ds.label_names.begin(), ds.label_names.end(), *background_token);
            if (it != ds.label_names.end())
                ds.background_label = static_cast<int>(it - ds.label_names.begin());
        }
        int distinct = static_cast<int>(ds.label_names.size());
        if (ds.background_label) --distinct;
        ds.K = std::max(1, distinct);
        const fs::path sub_dir = dir / "labels_sub";
        if (fs::is_directory(sub_dir)) {
            std::vector<std::string> sub_names;
            ds.gt_sub = load_label_dir(sub_dir, stems, sub_names, false);
        }
    }

    ds.train_indices.resize(ds.videos.size());
    for (size_t i = 0; i < ds.videos.size(); ++i) ds.train_indices[i] = static_cast<int>(i);
    if (protocol == Protocol::split_80_20) {
        std::mt19937_64 rng(seed);
        std::shuffle(ds.train_indices.begin(), ds.train_indices.end(), rng);
        const size_t n_train =
            std::max<size_t>(1, (ds.videos.size() * 8 + 5) / 10);  // round to nearest
        ds.test_indices.assign(ds.train_indices.begin() + static_cast<long>(n_train),
                               ds.train_indices.end());
        ds.train_indices.resize(n_train);
        std::sort(ds.train_indices.begin(), ds.train_indices.end());
        std::sort(ds.test_indices.begin(), ds.test_indices.end());
    }
    return ds;
}

}  // namespace

std::vector<ActivityDataset> group_dataset(const fs::path& root, Protocol protocol, uint64_t seed,
                                           const std::optional<std::string>& background_token) {
    if (!fs::is_directory(root)) throw DataError(root.string() + ": not a directory");
    std::vector<ActivityDataset> activities;
    if (fs::is_directory(root / "features")) {
        activities.push_back(
            load_activity(root, activity_name_for(root), protocol, seed, background_token));
        return activities;
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::is_directory(entry.path() / "features"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw DataError(root.string() + ": no activity directories found");
    for (const fs::path& d : dirs)
        activities.push_back(
            load_activity(d, activity_name_for(d), protocol, seed, background_token));
    return activities;
}

}  // namespace hvq
