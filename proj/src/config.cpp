#include "hyqal/config.hpp"

#include <fstream>

#include "hyqal/rng.hpp"

namespace hyqal::pipeline {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw UsageError("config: " + what); }

// Reads j[key] into out when present; rejects unknown keys elsewhere.
template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            it->get_to(out);
        } catch (const json::exception& e) {
            bad(std::string("field '") + key + "': " + e.what());
        }
    }
}

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        bad(std::string(where) + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            bad(std::string("unknown key '") + key + "' in " + where);
        }
    }
}

} // namespace

void ExperimentConfig::validate() const {
    synthetic.validate();
    model.validate();
    pretrain.augment.validate();
    if (splits.size() < 2) {
        bad("at least two splits required");
    }
    for (const auto& s : splits) {
        if (s.fraction <= 0.0) {
            bad("split weight for '" + s.name + "' must be positive");
        }
    }
    if (labeled_ratio_bound <= 0.0) {
        bad("labeled_ratio_bound must be positive");
    }
    if (threads < 1) {
        bad("threads must be >= 1");
    }
    if (matrix.seeds.empty() || matrix.variants.empty()) {
        bad("matrix needs at least one seed and one variant");
    }
    if (finetune.batch_size < 2 || pretrain.batch_size < 2) {
        bad("batch sizes must be >= 2");
    }
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    check_keys(j, "config root",
               {"seed", "threads", "data", "model", "pretrain", "finetune", "optimizer",
                "matrix", "labeled_ratio_bound"});
    get_to(j, "seed", cfg.seed);
    get_to(j, "threads", cfg.threads);
    get_to(j, "labeled_ratio_bound", cfg.labeled_ratio_bound);

    if (j.contains("data")) {
        const json& d = j["data"];
        check_keys(d, "data",
                   {"count", "height", "width", "patients", "stenosis_fraction", "noise_level",
                    "splits"});
        get_to(d, "count", cfg.synthetic.count);
        get_to(d, "height", cfg.synthetic.height);
        get_to(d, "width", cfg.synthetic.width);
        get_to(d, "patients", cfg.synthetic.patients);
        get_to(d, "stenosis_fraction", cfg.synthetic.stenosis_fraction);
        get_to(d, "noise_level", cfg.synthetic.noise_level);
        if (d.contains("splits")) {
            cfg.splits.clear();
            for (const auto& s : d["splits"]) {
                check_keys(s, "data.splits entry", {"name", "weight"});
                data::SplitRatio r;
                get_to(s, "name", r.name);
                get_to(s, "weight", r.fraction);
                cfg.splits.push_back(r);
            }
        }
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model",
                   {"encoder", "quantum", "contrastive", "head_dropout", "bn_momentum"});
        if (m.contains("encoder")) {
            const json& e = m["encoder"];
            check_keys(e, "model.encoder", {"height", "width", "blocks", "feature_dim"});
            get_to(e, "height", cfg.model.encoder.height);
            get_to(e, "width", cfg.model.encoder.width);
            get_to(e, "feature_dim", cfg.model.encoder.feature_dim);
            if (e.contains("blocks")) {
                cfg.model.encoder.blocks.clear();
                for (const auto& b : e["blocks"]) {
                    check_keys(b, "encoder block", {"channels", "stride", "pool"});
                    hybrid::ConvBlockSpec blk;
                    get_to(b, "channels", blk.channels);
                    get_to(b, "stride", blk.stride);
                    get_to(b, "pool", blk.pool);
                    cfg.model.encoder.blocks.push_back(blk);
                }
            }
        }
        if (m.contains("quantum")) {
            const json& q = m["quantum"];
            check_keys(q, "model.quantum",
                       {"enabled", "qubits", "layers", "topology", "bound_encoding",
                        "alpha_init", "train_alpha"});
            get_to(q, "enabled", cfg.model.quantum_enabled);
            get_to(q, "qubits", cfg.model.circuit.num_qubits);
            get_to(q, "layers", cfg.model.circuit.num_layers);
            if (q.contains("topology")) {
                cfg.model.circuit.topology =
                    qsim::topology_from_string(q["topology"].get<std::string>());
            }
            get_to(q, "bound_encoding", cfg.model.bound_encoding);
            get_to(q, "alpha_init", cfg.model.alpha_init);
            get_to(q, "train_alpha", cfg.model.train_alpha);
        }
        if (m.contains("contrastive")) {
            const json& c = m["contrastive"];
            check_keys(c, "model.contrastive", {"temperature", "embed_dim", "hidden_dim"});
            get_to(c, "temperature", cfg.model.contrastive.temperature);
            get_to(c, "embed_dim", cfg.model.contrastive.embed_dim);
            get_to(c, "hidden_dim", cfg.model.contrastive.hidden_dim);
        }
        get_to(m, "head_dropout", cfg.model.head_dropout);
        get_to(m, "bn_momentum", cfg.model.bn_momentum);
    }
    if (j.contains("pretrain")) {
        const json& p = j["pretrain"];
        check_keys(p, "pretrain", {"epochs", "batch_size", "include_quantum", "augment"});
        get_to(p, "epochs", cfg.pretrain.epochs);
        get_to(p, "batch_size", cfg.pretrain.batch_size);
        get_to(p, "include_quantum", cfg.pretrain.include_quantum);
        if (p.contains("augment")) {
            const json& a = p["augment"];
            check_keys(a, "pretrain.augment",
                       {"rotation_degrees", "crop_ratio_min", "crop_ratio_max",
                        "translate_fraction", "intensity_scale_min", "intensity_scale_max",
                        "intensity_shift", "prob_rotate", "prob_crop", "prob_translate",
                        "prob_intensity"});
            auto& g = cfg.pretrain.augment;
            get_to(a, "rotation_degrees", g.rotation_degrees);
            get_to(a, "crop_ratio_min", g.crop_ratio_min);
            get_to(a, "crop_ratio_max", g.crop_ratio_max);
            get_to(a, "translate_fraction", g.translate_fraction);
            get_to(a, "intensity_scale_min", g.intensity_scale_min);
            get_to(a, "intensity_scale_max", g.intensity_scale_max);
            get_to(a, "intensity_shift", g.intensity_shift);
            get_to(a, "prob_rotate", g.prob_rotate);
            get_to(a, "prob_crop", g.prob_crop);
            get_to(a, "prob_translate", g.prob_translate);
            get_to(a, "prob_intensity", g.prob_intensity);
        }
    }
    if (j.contains("finetune")) {
        const json& f = j["finetune"];
        check_keys(f, "finetune", {"epochs", "batch_size", "freeze", "early_stop_patience"});
        get_to(f, "epochs", cfg.finetune.epochs);
        get_to(f, "batch_size", cfg.finetune.batch_size);
        if (f.contains("freeze")) {
            cfg.finetune.freeze =
                hybrid::freeze_policy_from_string(f["freeze"].get<std::string>());
        }
        get_to(f, "early_stop_patience", cfg.finetune.early_stop_patience);
    }
    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        check_keys(o, "optimizer", {"lr", "beta1", "beta2", "eps"});
        get_to(o, "lr", cfg.optimizer.lr);
        get_to(o, "beta1", cfg.optimizer.beta1);
        get_to(o, "beta2", cfg.optimizer.beta2);
        get_to(o, "eps", cfg.optimizer.eps);
    }
    if (j.contains("matrix")) {
        const json& m = j["matrix"];
        check_keys(m, "matrix", {"seeds", "variants"});
        get_to(m, "seeds", cfg.matrix.seeds);
        get_to(m, "variants", cfg.matrix.variants);
    }
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["labeled_ratio_bound"] = cfg.labeled_ratio_bound;
    j["data"] = {{"count", cfg.synthetic.count},
                 {"height", cfg.synthetic.height},
                 {"width", cfg.synthetic.width},
                 {"patients", cfg.synthetic.patients},
                 {"stenosis_fraction", cfg.synthetic.stenosis_fraction},
                 {"noise_level", cfg.synthetic.noise_level}};
    json splits = json::array();
    for (const auto& s : cfg.splits) {
        splits.push_back({{"name", s.name}, {"weight", s.fraction}});
    }
    j["data"]["splits"] = splits;

    json blocks = json::array();
    for (const auto& b : cfg.model.encoder.blocks) {
        blocks.push_back({{"channels", b.channels}, {"stride", b.stride}, {"pool", b.pool}});
    }
    j["model"] = {
        {"encoder",
         {{"height", cfg.model.encoder.height},
          {"width", cfg.model.encoder.width},
          {"blocks", blocks},
          {"feature_dim", cfg.model.encoder.feature_dim}}},
        {"quantum",
         {{"enabled", cfg.model.quantum_enabled},
          {"qubits", cfg.model.circuit.num_qubits},
          {"layers", cfg.model.circuit.num_layers},
          {"topology", qsim::to_string(cfg.model.circuit.topology)},
          {"bound_encoding", cfg.model.bound_encoding},
          {"alpha_init", cfg.model.alpha_init},
          {"train_alpha", cfg.model.train_alpha}}},
        {"contrastive",
         {{"temperature", cfg.model.contrastive.temperature},
          {"embed_dim", cfg.model.contrastive.embed_dim},
          {"hidden_dim", cfg.model.contrastive.hidden_dim}}},
        {"head_dropout", cfg.model.head_dropout},
        {"bn_momentum", cfg.model.bn_momentum}};

    j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                     {"batch_size", cfg.pretrain.batch_size},
                     {"include_quantum", cfg.pretrain.include_quantum},
                     {"augment",
                      {{"rotation_degrees", cfg.pretrain.augment.rotation_degrees},
                       {"crop_ratio_min", cfg.pretrain.augment.crop_ratio_min},
                       {"crop_ratio_max", cfg.pretrain.augment.crop_ratio_max},
                       {"translate_fraction", cfg.pretrain.augment.translate_fraction},
                       {"intensity_scale_min", cfg.pretrain.augment.intensity_scale_min},
                       {"intensity_scale_max", cfg.pretrain.augment.intensity_scale_max},
                       {"intensity_shift", cfg.pretrain.augment.intensity_shift},
                       {"prob_rotate", cfg.pretrain.augment.prob_rotate},
                       {"prob_crop", cfg.pretrain.augment.prob_crop},
                       {"prob_translate", cfg.pretrain.augment.prob_translate},
                       {"prob_intensity", cfg.pretrain.augment.prob_intensity}}}};
    j["finetune"] = {{"epochs", cfg.finetune.epochs},
                     {"batch_size", cfg.finetune.batch_size},
                     {"freeze", hybrid::to_string(cfg.finetune.freeze)},
                     {"early_stop_patience", cfg.finetune.early_stop_patience}};
    j["optimizer"] = {{"lr", cfg.optimizer.lr},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"eps", cfg.optimizer.eps}};
    j["matrix"] = {{"seeds", cfg.matrix.seeds}, {"variants", cfg.matrix.variants}};
    return j;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path + ": cannot open config file");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string canonical = config_to_json(cfg).dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical)));
    return buf;
}

nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError("--set expects key.path=value, got '" + ov + "'");
        }
        const std::string path = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw; // plain string
        }
        json* node = &j;
        std::size_t start = 0;
        for (;;) {
            const std::size_t dot = path.find('.', start);
            const std::string key = path.substr(start, dot - start);
            if (key.empty()) {
                throw UsageError("--set: empty key segment in '" + path + "'");
            }
            if (dot == std::string::npos) {
                (*node)[key] = value;
                break;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    }
    return j;
}

} // namespace hyqal::pipeline
