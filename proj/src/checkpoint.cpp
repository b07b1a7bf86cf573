#include "hvq/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "hvq/config.hpp"
#include "hvq/error.hpp"

namespace hvq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'H', 'V', 'Q', 'C'};
constexpr uint32_t kVersion = 1;

void write_tensor(std::ostream& out, const double* data, uint32_t rows, uint32_t cols) {
    const char magic[4] = {'H', 'V', 'Q', 'F'};
    const uint32_t version = 2;  // float64 payload
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(static_cast<size_t>(rows) * cols * 8));
}

void read_tensor(std::istream& in, double* data, uint32_t rows, uint32_t cols,
                 const fs::path& path) {
    char magic[4];
    uint32_t version = 0, r = 0, c = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&r), 4);
    in.read(reinterpret_cast<char*>(&c), 4);
    if (!in || std::memcmp(magic, "HVQF", 4) != 0 || version != 2)
        throw FormatError(path.string() + ": bad tensor framing");
    if (r != rows || c != cols)
        throw FormatError(path.string() + ": tensor shape does not match manifest");
    if (!in.read(reinterpret_cast<char*>(data),
                 static_cast<std::streamsize>(static_cast<size_t>(rows) * cols * 8)))
        throw FormatError(path.string() + ": truncated tensor payload");
}

json store_manifest(const ParamStore& ps) {
    json entries = json::array();
    for (const Param& p : ps.entries()) entries.push_back({{"name", p.name}, {"shape", p.shape}});
    return entries;
}

void write_store(std::ostream& out, const ParamStore& ps) {
    for (const Param& p : ps.entries()) {
        const uint32_t n = static_cast<uint32_t>(p.value.size());
        write_tensor(out, p.value.data(), 1, n);
        write_tensor(out, p.m.data(), 1, n);
        write_tensor(out, p.v.data(), 1, n);
    }
}

void read_store(std::istream& in, ParamStore& ps, const json& manifest, const fs::path& path) {
    if (manifest.size() != ps.count())
        throw FormatError(path.string() + ": parameter manifest does not match model layout");
    for (size_t i = 0; i < ps.count(); ++i) {
        Param& p = ps[static_cast<int>(i)];
        if (manifest[i].at("name").get<std::string>() != p.name)
            throw FormatError(path.string() + ": unexpected parameter '" + p.name + "'");
        const uint32_t n = static_cast<uint32_t>(p.value.size());
        read_tensor(in, p.value.data(), 1, n, path);
        read_tensor(in, p.m.data(), 1, n, path);
        read_tensor(in, p.v.data(), 1, n, path);
    }
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
    json header;
    header["activity"] = checkpoint.activity;
    header["epochs_done"] = checkpoint.epochs_done;
    header["rng"] = checkpoint.rng_state;

    RunConfig rc;
    rc.train = checkpoint.config;
    header["config"] = run_config_to_json(rc);
    header["config"]["tcn"]["input_dim"] = checkpoint.config.tcn.input_dim;

    header["encoder"] = store_manifest(checkpoint.model.encoder_params);
    header["decoder"] = store_manifest(checkpoint.model.decoder_params);
    header["encoder_step"] = checkpoint.model.encoder_params.step_count();
    header["decoder_step"] = checkpoint.model.decoder_params.step_count();

    json books = json::array();
    for (const Codebook& b : checkpoint.books)
        books.push_back({{"level", b.level},
                         {"size", b.size()},
                         {"dim", b.dim()},
                         {"reset_threshold", b.reset_threshold},
                         {"generation", b.generation}});
    header["books"] = books;

    const std::string header_str = header.dump();
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError(tmp.string() + ": cannot open for writing");
        out.write(kMagic, 4);
        out.write(reinterpret_cast<const char*>(&kVersion), 4);
        const uint32_t len = static_cast<uint32_t>(header_str.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
        write_store(out, checkpoint.model.encoder_params);
        write_store(out, checkpoint.model.decoder_params);
        for (const Codebook& b : checkpoint.books) {
            write_tensor(out, b.prototypes.data.data(), static_cast<uint32_t>(b.size()),
                         static_cast<uint32_t>(b.dim()));
            write_tensor(out, b.mass.data(), 1, static_cast<uint32_t>(b.mass.size()));
            write_tensor(out, b.ema_sum.data.data(), static_cast<uint32_t>(b.ema_sum.rows),
                         static_cast<uint32_t>(b.ema_sum.cols));
        }
        if (!out) throw DataError(path.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open");
    char magic[4];
    uint32_t version = 0, len = 0;
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path.string() + ": not a checkpoint file (bad magic)");
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion)
        throw FormatError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string header_str(len, '\0');
    if (!in.read(header_str.data(), len))
        throw FormatError(path.string() + ": truncated header");
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad header JSON: " + e.what());
    }

    Checkpoint cp;
    cp.activity = header.at("activity").get<std::string>();
    cp.epochs_done = header.at("epochs_done").get<int>();
    cp.rng_state = header.at("rng").get<std::string>();
    json config_json = header.at("config");
    const int input_dim = config_json.at("tcn").at("input_dim").get<int>();
    config_json["tcn"].erase("input_dim");
    cp.config = parse_run_config(config_json).train;
    cp.config.tcn.input_dim = input_dim;

    cp.model = build_model(cp.config.tcn, cp.config.seed);
    read_store(in, cp.model.encoder_params, header.at("encoder"), path);
    read_store(in, cp.model.decoder_params, header.at("decoder"), path);
    cp.model.encoder_params.set_step_count(header.at("encoder_step").get<int64_t>());
    cp.model.decoder_params.set_step_count(header.at("decoder_step").get<int64_t>());

    for (const json& bj : header.at("books")) {
        Codebook b;
        b.level = bj.at("level").get<int>();
        b.reset_threshold = bj.at("reset_threshold").get<double>();
        b.generation = bj.at("generation").get<uint64_t>();
        const int size = bj.at("size").get<int>();
        const int dim = bj.at("dim").get<int>();
        b.prototypes = SeqTensor(size, dim);
        b.mass.assign(size, 0.0);
        b.ema_sum = SeqTensor(size, dim);
        read_tensor(in, b.prototypes.data.data(), size, dim, path);
        read_tensor(in, b.mass.data(), 1, static_cast<uint32_t>(size), path);
        read_tensor(in, b.ema_sum.data.data(), size, dim, path);
        cp.books.push_back(std::move(b));
    }
    return cp;
}

}  // namespace hvq
