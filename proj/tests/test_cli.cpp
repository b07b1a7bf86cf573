// End-to-end checks of the command-line surface. The binary path comes from
// the HVQ_CLI environment variable (set by ctest); these tests are skipped
// when it is absent so the unit binary still runs standalone.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "hvq/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return std::getenv("HVQ_CLI"); }

int run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hvq_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string tree_digest(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::ostringstream out;
    for (const fs::path& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        out << fs::relative(f, root).string() << ":" << content.size() << ":"
            << std::hash<std::string>{}(content) << "\n";
    }
    return out.str();
}

void write_tiny_spec(const fs::path& file, uint64_t seed) {
    json spec = {{"name", "mini"},     {"actions", 3},        {"subactions_min", 1},
                 {"subactions_max", 2}, {"feature_dim", 8},    {"videos", 4},
                 {"short_len", {6, 10}}, {"long_len", {14, 20}}, {"short_prob", 0.5},
                 {"noise_sigma", 0.05}, {"min_separation_deg", 60}, {"seed", seed}};
    std::ofstream(file) << spec.dump();
}

void write_tiny_config(const fs::path& file) {
    json cfg = {{"seed", 1},
                {"tcn",
                 {{"stages", 1},
                  {"layers_per_stage", 3},
                  {"hidden_channels", 8},
                  {"latent_dim", 6}}},
                {"hvq", {{"alpha", 2}, {"levels", 2}}},
                {"train", {{"lambda_rec", 0.002}, {"epochs", 6}}}};
    std::ofstream(file) << cfg.dump();
}

}  // namespace

TEST_CASE("cli pipeline: synth -> train -> segment -> eval") {
    if (!cli_path()) {
        MESSAGE("HVQ_CLI not set; skipping CLI tests");
        return;
    }
    TempDir dir;
    const fs::path data = dir.path / "data";
    write_tiny_spec(dir.path / "spec.json", 0);
    write_tiny_config(dir.path / "config.json");

    REQUIRE(run("synth --spec " + (dir.path / "spec.json").string() + " --out " +
                data.string()) == 0);
    CHECK(fs::is_directory(data / "features"));
    CHECK(fs::is_directory(data / "labels"));
    CHECK(fs::is_directory(data / "labels_sub"));
    CHECK(fs::exists(data / "meta.json"));

    // determinism of the tree
    const fs::path data2 = dir.path / "data2";
    REQUIRE(run("synth --spec " + (dir.path / "spec.json").string() + " --out " +
                data2.string()) == 0);
    CHECK(tree_digest(data) == tree_digest(data2));

    const fs::path ckpt = dir.path / "mini.hvqc";
    REQUIRE(run("train --data " + data.string() + " --activity mini --config " +
                (dir.path / "config.json").string() + " --out " + ckpt.string()) == 0);
    REQUIRE(fs::exists(ckpt));

    // the config's lambda_rec lands verbatim in the checkpoint header
    {
        std::ifstream in(ckpt, std::ios::binary);
        std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(blob.find("\"lambda_rec\":0.002") != std::string::npos);
    }

    const fs::path seg_fifa = dir.path / "seg_fifa";
    const fs::path seg_argmax = dir.path / "seg_argmax";
    const fs::path seg_dp = dir.path / "seg_dp";
    REQUIRE(run("segment --checkpoint " + ckpt.string() + " --data " + data.string() +
                " --decoder fifa --out " + seg_fifa.string()) == 0);
    REQUIRE(run("segment --checkpoint " + ckpt.string() + " --data " + data.string() +
                " --decoder argmax --out " + seg_argmax.string()) == 0);
    REQUIRE(run("segment --checkpoint " + ckpt.string() + " --data " + data.string() +
                " --decoder dp --out " + seg_dp.string()) == 0);
    CHECK(fs::exists(seg_fifa / "mini" / "decode_info.json"));

    // label counts match frame counts; dp output visits the order once
    auto activities = hvq::group_dataset(data, hvq::Protocol::full, 0, std::nullopt);
    json info = json::parse(std::ifstream(seg_dp / "mini" / "decode_info.json"));
    const std::vector<int> order = info.at("cluster_order").get<std::vector<int>>();
    for (const auto& video : activities[0].videos) {
        auto labels = hvq::load_label_indices(seg_dp / "mini" / (video.id + ".txt"));
        CHECK(static_cast<int>(labels.size()) == video.frames.rows);
        std::vector<int> visited;
        for (int l : labels)
            if (visited.empty() || visited.back() != l) visited.push_back(l);
        CHECK(visited == order);
    }

    const fs::path metrics = dir.path / "metrics.json";
    REQUIRE(run("eval --pred " + seg_fifa.string() + " --gt " + data.string() + " --out " +
                metrics.string() + " --hist-out " + (dir.path / "hist").string()) == 0);
    json report = json::parse(std::ifstream(metrics));
    CHECK(report.at("aggregate").contains("jsd"));
    CHECK(report.at("aggregate").at("mof").get<double>() >= 0.0);
    CHECK(report.at("aggregate").at("mof").get<double>() <= 100.0);

    // histogram export: first column edges 0,20,40,...
    bool found_csv = false;
    for (const auto& entry : fs::recursive_directory_iterator(dir.path / "hist"))
        if (entry.path().extension() == ".csv") {
            std::ifstream in(entry.path());
            std::string header, first;
            std::getline(in, header);
            CHECK(header == "bin_start,pred,gt");
            std::getline(in, first);
            CHECK(first.substr(0, 2) == "0,");
            found_csv = true;
            break;
        }
    CHECK(found_csv);

    // self-evaluation: pred = gt must give perfect scores
    const fs::path self_pred = dir.path / "self";
    fs::create_directories(self_pred / "mini");
    for (size_t v = 0; v < activities[0].videos.size(); ++v)
        hvq::save_label_indices(self_pred / "mini" / (activities[0].videos[v].id + ".txt"),
                                activities[0].gt[v]);
    const fs::path self_metrics = dir.path / "self.json";
    REQUIRE(run("eval --pred " + self_pred.string() + " --gt " + data.string() + " --out " +
                self_metrics.string()) == 0);
    json self_report = json::parse(std::ifstream(self_metrics));
    CHECK(self_report.at("aggregate").at("mof").get<double>() == doctest::Approx(100.0));
    CHECK(self_report.at("aggregate").at("f1").get<double>() == doctest::Approx(100.0));
    CHECK(self_report.at("aggregate").at("jsd").get<double>() == doctest::Approx(0.0));

    // background masking drops the jsd field
    const fs::path bg_metrics = dir.path / "bg.json";
    REQUIRE(run("eval --pred " + self_pred.string() + " --gt " + data.string() +
                " --background-label act0 --out " + bg_metrics.string()) == 0);
    json bg_report = json::parse(std::ifstream(bg_metrics));
    CHECK_FALSE(bg_report.at("aggregate").contains("jsd"));
}

TEST_CASE("cli error paths use exit code 2") {
    if (!cli_path()) return;
    TempDir dir;

    // missing activity
    write_tiny_spec(dir.path / "spec.json", 1);
    const fs::path data = dir.path / "data";
    REQUIRE(run("synth --spec " + (dir.path / "spec.json").string() + " --out " + data.string()) ==
            0);
    CHECK(run("train --data " + data.string() + " --activity nope --out " +
              (dir.path / "x.hvqc").string()) == 2);

    // infeasible separation
    json bad = {{"actions", 40}, {"feature_dim", 2}, {"min_separation_deg", 89}};
    std::ofstream(dir.path / "bad.json") << bad.dump();
    CHECK(run("synth --spec " + (dir.path / "bad.json").string() + " --out " +
              (dir.path / "nothing").string()) == 2);

    // unknown config key is rejected
    std::ofstream(dir.path / "badcfg.json") << R"({"tcn": {"stager": 2}})";
    CHECK(run("train --data " + data.string() + " --activity mini --config " +
              (dir.path / "badcfg.json").string() + " --out " + (dir.path / "y.hvqc").string()) ==
          2);

    // unknown axis
    CHECK(run("ablate --data " + data.string() + " --axis nonsense --out " +
              (dir.path / "a.csv").string()) == 2);

    // bad subcommand usage
    CHECK(run("segment --data " + data.string()) == 2);
}

TEST_CASE("cli ablate produces the requested grid") {
    if (!cli_path()) return;
    TempDir dir;
    write_tiny_spec(dir.path / "spec.json", 2);
    const fs::path data = dir.path / "data";
    REQUIRE(run("synth --spec " + (dir.path / "spec.json").string() + " --out " + data.string()) ==
            0);

    json cfg = {{"seed", 0},
                {"tcn",
                 {{"stages", 1}, {"layers_per_stage", 2}, {"hidden_channels", 6},
                  {"latent_dim", 4}}},
                {"train", {{"epochs", 2}}}};
    std::ofstream(dir.path / "cfg.json") << cfg.dump();

    const fs::path csv = dir.path / "levels.csv";
    REQUIRE(run("ablate --data " + data.string() + " --axis levels --config " +
                (dir.path / "cfg.json").string() + " --out " + csv.string()) == 0);
    std::ifstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);  // header + single/double/triple
    CHECK(lines[1].find("levels,single") == 0);
    CHECK(lines[2].find("levels,double") == 0);
    CHECK(lines[3].find("levels,triple") == 0);
}
