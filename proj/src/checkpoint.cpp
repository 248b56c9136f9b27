#include "rngn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rngn/error.hpp"

namespace rngn {

namespace {

using nlohmann::json;

json network_json(const nn::DenseNetwork& net) {
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto& w = net.weights[l];
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
        }
        weights.push_back(flat);
        biases.push_back(std::vector<double>(net.biases[l].data(), net.biases[l].data() + net.biases[l].size()));
    }
    return {{"layer_dims", net.layer_dims}, {"weights", weights}, {"biases", biases}};
}

nn::DenseNetwork network_from(const json& j) {
    nn::DenseNetwork net(j.at("layer_dims").get<std::vector<std::size_t>>());
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != net.layer_count() || biases.size() != net.layer_count()) {
        throw DataError("checkpoint network has the wrong number of layers");
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto flat = weights[l].get<std::vector<double>>();
        const auto bias = biases[l].get<std::vector<double>>();
        auto& w = net.weights[l];
        if (flat.size() != static_cast<std::size_t>(w.size()) ||
            bias.size() != static_cast<std::size_t>(net.biases[l].size())) {
            throw DataError("checkpoint layer shape does not match layer_dims");
        }
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(i, c) = flat[k++];
        }
        for (std::size_t i = 0; i < bias.size(); ++i) net.biases[l](static_cast<Eigen::Index>(i)) = bias[i];
    }
    return net;
}

void put_mlp(json& scalars, json& networks, const RnMlpParams& p, const std::string& prefix) {
    scalars[prefix + "sigma"] = p.sigma;
    networks[prefix + "net_mu"] = network_json(p.net_mu);
    networks[prefix + "net_z"] = network_json(p.net_z);
    networks[prefix + "net_tau"] = network_json(p.net_tau);
}

RnMlpParams get_mlp(const json& scalars, const json& networks, const std::string& prefix) {
    RnMlpParams p;
    p.sigma = scalars.at(prefix + "sigma").get<double>();
    p.net_mu = network_from(networks.at(prefix + "net_mu"));
    p.net_z = network_from(networks.at(prefix + "net_z"));
    p.net_tau = network_from(networks.at(prefix + "net_tau"));
    return p;
}

} // namespace

std::string save_checkpoint(const Model& model, const CheckpointMetadata& metadata) {
    json scalars = json::object();
    json networks = json::object();
    switch (kind_of(model)) {
    case ModelKind::rn_q: {
        const auto& p = std::get<RnQParams>(model);
        scalars = {{"mu", p.mu}, {"sigma", p.sigma}, {"u", p.u}, {"v", p.v}, {"a_const", p.a_const}};
        break;
    }
    case ModelKind::rn_mlp: put_mlp(scalars, networks, std::get<RnMlpParams>(model), ""); break;
    case ModelKind::rn_dmlp: {
        const auto& p = std::get<RnDmlpParams>(model);
        scalars["alpha"] = p.alpha;
        put_mlp(scalars, networks, p.comp1, "comp1.");
        put_mlp(scalars, networks, p.comp2, "comp2.");
        break;
    }
    }
    json meta = json::object();
    if (metadata.spot) meta["spot"] = *metadata.spot;
    if (metadata.seed) meta["seed"] = *metadata.seed;
    if (metadata.n_samples) meta["n_samples"] = *metadata.n_samples;
    if (metadata.tau) meta["tau"] = *metadata.tau;
    if (!metadata.rate_curve.empty()) {
        json curve = json::array();
        for (const auto& p : metadata.rate_curve) curve.push_back({p.tenor_days, p.rate});
        meta["rate_curve"] = curve;
    }
    const json doc{{"model_type", to_string(kind_of(model))},
                   {"format_version", kCheckpointFormatVersion},
                   {"scalars", scalars},
                   {"networks", networks},
                   {"metadata", meta}};
    return doc.dump(2) + "\n";
}

Checkpoint load_checkpoint(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw DataError("malformed checkpoint: not a JSON object");
        const int version = doc.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion) {
            throw DataError("checkpoint format_version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
        }
        const auto kind = parse_model_kind(doc.at("model_type").get<std::string>());
        const auto& scalars = doc.at("scalars");
        const auto& networks = doc.at("networks");
        Checkpoint cp;
        switch (kind) {
        case ModelKind::rn_q: {
            RnQParams p;
            p.mu = scalars.at("mu").get<double>();
            p.sigma = scalars.at("sigma").get<double>();
            p.u = scalars.at("u").get<double>();
            p.v = scalars.at("v").get<double>();
            p.a_const = scalars.at("a_const").get<double>();
            p.validate();
            cp.model = p;
            break;
        }
        case ModelKind::rn_mlp: {
            auto p = get_mlp(scalars, networks, "");
            p.validate();
            cp.model = std::move(p);
            break;
        }
        case ModelKind::rn_dmlp: {
            RnDmlpParams p;
            p.alpha = scalars.at("alpha").get<double>();
            p.comp1 = get_mlp(scalars, networks, "comp1.");
            p.comp2 = get_mlp(scalars, networks, "comp2.");
            p.validate();
            cp.model = std::move(p);
            break;
        }
        }
        if (const auto it = doc.find("metadata"); it != doc.end() && it->is_object()) {
            const auto& m = *it;
            if (m.contains("spot")) cp.metadata.spot = m["spot"].get<double>();
            if (m.contains("seed")) cp.metadata.seed = m["seed"].get<std::uint64_t>();
            if (m.contains("n_samples")) cp.metadata.n_samples = m["n_samples"].get<std::size_t>();
            if (m.contains("tau")) cp.metadata.tau = m["tau"].get<double>();
            if (m.contains("rate_curve")) {
                for (const auto& p : m["rate_curve"]) {
                    cp.metadata.rate_curve.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                }
            }
        }
        return cp;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid checkpoint parameters: ") + e.what());
    }
}

void write_checkpoint(const std::filesystem::path& path, const Model& model,
                      const CheckpointMetadata& metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << save_checkpoint(model, metadata);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_checkpoint(ss.str());
}

} // namespace rngn
