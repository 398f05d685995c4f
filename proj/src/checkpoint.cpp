#include "hyqal/checkpoint.hpp"

#include <fstream>

namespace hyqal::pipeline {

using nlohmann::json;

nlohmann::json model_config_to_json(const hybrid::ModelConfig& cfg) {
    json blocks = json::array();
    for (const auto& b : cfg.encoder.blocks) {
        blocks.push_back({{"channels", b.channels}, {"stride", b.stride}, {"pool", b.pool}});
    }
    json j;
    j["encoder"] = {{"height", cfg.encoder.height},
                    {"width", cfg.encoder.width},
                    {"blocks", blocks},
                    {"feature_dim", cfg.encoder.feature_dim}};
    j["quantum"] = {{"enabled", cfg.quantum_enabled},
                    {"qubits", cfg.circuit.num_qubits},
                    {"layers", cfg.circuit.num_layers},
                    {"topology", qsim::to_string(cfg.circuit.topology)},
                    {"bound_encoding", cfg.bound_encoding},
                    {"alpha_init", cfg.alpha_init},
                    {"train_alpha", cfg.train_alpha}};
    j["contrastive"] = {{"temperature", cfg.contrastive.temperature},
                        {"embed_dim", cfg.contrastive.embed_dim},
                        {"hidden_dim", cfg.contrastive.hidden_dim}};
    j["head_dropout"] = cfg.head_dropout;
    j["bn_momentum"] = cfg.bn_momentum;
    j["classes"] = cfg.classes;
    return j;
}

hybrid::ModelConfig model_config_from_json(const json& j) {
    hybrid::ModelConfig cfg;
    try {
        const json& e = j.at("encoder");
        cfg.encoder.height = e.at("height").get<std::size_t>();
        cfg.encoder.width = e.at("width").get<std::size_t>();
        cfg.encoder.feature_dim = e.at("feature_dim").get<std::size_t>();
        cfg.encoder.blocks.clear();
        for (const auto& b : e.at("blocks")) {
            cfg.encoder.blocks.push_back({b.at("channels").get<std::size_t>(),
                                          b.at("stride").get<std::size_t>(),
                                          b.value("pool", false)});
        }
        const json& q = j.at("quantum");
        cfg.quantum_enabled = q.at("enabled").get<bool>();
        cfg.circuit.num_qubits = q.at("qubits").get<int>();
        cfg.circuit.num_layers = q.at("layers").get<int>();
        cfg.circuit.topology = qsim::topology_from_string(q.at("topology").get<std::string>());
        cfg.bound_encoding = q.at("bound_encoding").get<bool>();
        cfg.alpha_init = q.at("alpha_init").get<double>();
        cfg.train_alpha = q.at("train_alpha").get<bool>();
        const json& c = j.at("contrastive");
        cfg.contrastive.temperature = c.at("temperature").get<double>();
        cfg.contrastive.embed_dim = c.at("embed_dim").get<std::size_t>();
        cfg.contrastive.hidden_dim = c.at("hidden_dim").get<std::size_t>();
        cfg.head_dropout = j.at("head_dropout").get<double>();
        cfg.bn_momentum = j.at("bn_momentum").get<double>();
        cfg.classes = j.at("classes").get<std::size_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint: bad model_config: ") + e.what());
    }
    return cfg;
}

namespace {

json tensor_to_json(const Tensor& t) {
    return {{"shape", t.shape()}, {"data", t.values()}};
}

void tensor_from_json(const json& j, Tensor& out, const std::string& what) {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    try {
        j.at("shape").get_to(shape);
        j.at("data").get_to(data);
    } catch (const json::exception& e) {
        throw DataError("checkpoint: tensor '" + what + "': " + e.what());
    }
    if (shape != out.shape()) {
        throw DataError("checkpoint: tensor '" + what + "' has shape " + shape_to_string(shape) +
                        ", model expects " + out.shape_str());
    }
    if (data.size() != out.size()) {
        throw DataError("checkpoint: tensor '" + what + "' has " + std::to_string(data.size()) +
                        " values, expected " + std::to_string(out.size()));
    }
    out.values() = std::move(data);
}

} // namespace

json checkpoint_to_json(hybrid::HybridModel& model, const json& config,
                        const std::string& config_hash, const std::string& variant,
                        std::int64_t step) {
    json groups;
    for (const hybrid::ParamRef& p : model.parameters()) {
        groups[p.group][p.name] = tensor_to_json(*p.value);
    }
    json state;
    for (const hybrid::StateRef& s : model.state_tensors()) {
        state[s.group][s.name] = tensor_to_json(*s.value);
    }
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["config"] = config;
    j["config_hash"] = config_hash;
    j["model_config"] = model_config_to_json(model.config());
    j["variant"] = variant;
    j["step"] = step;
    j["rng_state"] = model.train_rng().state();
    j["groups"] = groups;
    j["state"] = state;
    return j;
}

void save_checkpoint(const std::string& path, hybrid::HybridModel& model, const json& config,
                     const std::string& config_hash, const std::string& variant,
                     std::int64_t step) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path + ": cannot open for writing");
    }
    out << checkpoint_to_json(model, config, config_hash, variant, step).dump(1) << "\n";
    if (!out) {
        throw DataError(path + ": write failed");
    }
}

json read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(path + ": cannot open checkpoint");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": invalid checkpoint JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("format_version")) {
        throw DataError(path + ": not a checkpoint (missing format_version)");
    }
    const int version = j["format_version"].get<int>();
    if (version != kCheckpointFormatVersion) {
        throw DataError(path + ": unsupported checkpoint format_version " +
                        std::to_string(version));
    }
    return j;
}

void load_checkpoint_into(const json& ckpt, hybrid::HybridModel& model) {
    try {
        const json& groups = ckpt.at("groups");
        for (hybrid::ParamRef p : model.parameters()) {
            tensor_from_json(groups.at(p.group).at(p.name), *p.value, p.group + "/" + p.name);
        }
        const json& state = ckpt.at("state");
        for (hybrid::StateRef s : model.state_tensors()) {
            tensor_from_json(state.at(s.group).at(s.name), *s.value, s.group + "/" + s.name);
        }
        model.train_rng().set_state(ckpt.at("rng_state").get<std::string>());
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint: missing field: ") + e.what());
    }
}

LoadedModel load_model_from_checkpoint(const std::string& path) {
    LoadedModel out;
    out.raw = read_checkpoint_file(path);
    if (!out.raw.contains("model_config")) {
        throw DataError(path + ": checkpoint lacks model_config");
    }
    out.config = model_config_from_json(out.raw["model_config"]);
    out.model = std::make_unique<hybrid::HybridModel>(out.config, 0);
    load_checkpoint_into(out.raw, *out.model);
    return out;
}

} // namespace hyqal::pipeline
