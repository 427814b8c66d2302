#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfagl/aggl.hpp"
#include "mfagl/error.hpp"
#include "mfagl/netcore.hpp"
#include "mfagl/regions.hpp"

namespace mfagl {

// Checkpoint layout: 8-byte magic, u32 format version, u64 JSON header
// length, the JSON header (dimensions, config, vocabularies, hierarchy,
// array manifest), then each parameter array as raw little-endian doubles in
// visit_arrays order. Parameter bytes round-trip untouched.
namespace checkpoint_detail {

inline constexpr char kMagic[8] = {'M', 'F', 'A', 'G', 'L', 'C', 'K', 'P'};
inline constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint parameter blocks are written as native little-endian doubles");

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace checkpoint_detail

namespace checkpoint {

inline void save_model(const std::string& path, const aggl::MfAglModel& model) {
    namespace cd = checkpoint_detail;
    nlohmann::json header;
    header["lag_days"] = model.config.lag_days;
    header["hidden_size"] = model.config.hidden_size;
    header["mlp_hidden"] = model.config.mlp_hidden;
    header["output"] =
        model.config.output == net::OutputTransform::Softplus ? "softplus" : "identity";
    header["config"] = {
        {"epochs", model.config.epochs}, {"batch_size", model.config.batch_size},
        {"lr", model.config.lr},         {"beta1", model.config.beta1},
        {"beta2", model.config.beta2},   {"eps", model.config.eps},
        {"seed", model.config.seed},
    };
    header["vocab"] = {
        {"years", model.vocab.years},
        {"small_areas", model.vocab.small_areas},
        {"large_areas", model.vocab.large_areas},
    };
    nlohmann::json parents = nlohmann::json::object();
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [q, p] : model.hierarchy.parent_map()) {
        parents[q] = p;
        weights[q] = model.hierarchy.weight(q);
    }
    header["hierarchy"] = {{"parents", parents}, {"weights", weights}};
    nlohmann::json arrays = nlohmann::json::array();
    net::visit_arrays(model.params, [&](const std::string& name, const auto& a) {
        arrays.push_back({{"name", name},
                          {"rows", static_cast<std::int64_t>(a.rows())},
                          {"cols", static_cast<std::int64_t>(a.cols())}});
    });
    header["arrays"] = arrays;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(cd::kMagic, sizeof(cd::kMagic));
    cd::put_u32(out, cd::kVersion);
    cd::put_u64(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    net::visit_arrays(model.params, [&](const std::string&, const auto& a) {
        out.write(reinterpret_cast<const char*>(a.data()),
                  static_cast<std::streamsize>(sizeof(double) * a.size()));
    });
    out.close();
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline aggl::MfAglModel load_model(const std::string& path) {
    namespace cd = checkpoint_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, cd::kMagic, 8) != 0)
        throw IoError("'" + path + "' is not a model checkpoint");
    const std::uint32_t version = cd::get_u32(in);
    if (version != cd::kVersion)
        throw IoError("'" + path + "' has checkpoint version " + std::to_string(version) +
                      "; this build reads version " + std::to_string(cd::kVersion));
    const std::uint64_t header_len = cd::get_u64(in);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError("'" + path + "' is truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "' has a corrupt header: " + e.what());
    }

    aggl::MfAglModel model;
    try {
        model.config.lag_days = header.at("lag_days").get<int>();
        model.config.hidden_size = header.at("hidden_size").get<int>();
        model.config.mlp_hidden = header.at("mlp_hidden").get<std::vector<int>>();
        model.config.output = header.at("output").get<std::string>() == "softplus"
                                  ? net::OutputTransform::Softplus
                                  : net::OutputTransform::Identity;
        const auto& cfg = header.at("config");
        model.config.epochs = cfg.at("epochs").get<int>();
        model.config.batch_size = cfg.at("batch_size").get<int>();
        model.config.lr = cfg.at("lr").get<double>();
        model.config.beta1 = cfg.at("beta1").get<double>();
        model.config.beta2 = cfg.at("beta2").get<double>();
        model.config.eps = cfg.at("eps").get<double>();
        model.config.seed = cfg.at("seed").get<std::uint64_t>();
        const auto& voc = header.at("vocab");
        model.vocab.years = voc.at("years").get<std::vector<int>>();
        model.vocab.small_areas = voc.at("small_areas").get<std::vector<AreaId>>();
        model.vocab.large_areas = voc.at("large_areas").get<std::vector<AreaId>>();
        const auto& hier = header.at("hierarchy");
        auto parents = hier.at("parents").get<std::map<AreaId, AreaId>>();
        auto weights = hier.at("weights").get<std::map<AreaId, double>>();
        model.hierarchy = RegionHierarchy(std::move(parents), std::move(weights));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "' header is missing fields: " + e.what());
    }

    model.params.lstm = net::LstmParams::zeros(1, model.config.hidden_size);
    model.params.mlp.output = model.config.output;
    int prev = model.config.hidden_size + model.vocab.dummy_dim();
    for (const int width : model.config.mlp_hidden) {
        model.params.mlp.layers.push_back({Eigen::MatrixXd::Zero(width, prev),
                                           Eigen::VectorXd::Zero(width), net::Activation::Tanh});
        prev = width;
    }
    model.params.mlp.layers.push_back(
        {Eigen::MatrixXd::Zero(1, prev), Eigen::VectorXd::Zero(1), net::Activation::Identity});

    const auto& manifest = header.at("arrays");
    std::size_t idx = 0;
    net::visit_arrays(model.params, [&](const std::string& name, auto& a) {
        if (idx >= manifest.size())
            throw IoError("'" + path + "' array manifest is shorter than the model");
        const auto& entry = manifest[idx];
        if (entry.at("name").get<std::string>() != name ||
            entry.at("rows").get<std::int64_t>() != a.rows() ||
            entry.at("cols").get<std::int64_t>() != a.cols())
            throw IoError("'" + path + "' array '" + name + "' does not match its manifest entry");
        in.read(reinterpret_cast<char*>(a.data()),
                static_cast<std::streamsize>(sizeof(double) * a.size()));
        ++idx;
    });
    if (idx != manifest.size()) throw IoError("'" + path + "' manifest has extra arrays");
    if (!in) throw IoError("'" + path + "' parameter block is truncated");
    in.peek();
    if (!in.eof()) throw IoError("'" + path + "' has trailing bytes after the parameter block");
    if (!net::all_finite(model.params))
        throw IoError("'" + path + "' contains non-finite parameter values");
    model.params.check_shapes();
    return model;
}

} // namespace checkpoint

} // namespace mfagl
