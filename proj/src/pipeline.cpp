#include "hyqal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hyqal/parallel.hpp"
#include "hyqal/rng.hpp"

namespace hyqal::pipeline {

using nlohmann::json;

void progress(const json& event) {
    std::fprintf(stderr, "%s\n", event.dump().c_str());
    std::fflush(stderr);
}

DataBundle prepare_synthetic_data(const ExperimentConfig& cfg) {
    DataBundle bundle;
    bundle.dataset = data::generate_synthetic(cfg.synthetic, cfg.seed);
    bundle.manifest = data::split_by_patient(bundle.dataset, cfg.splits, cfg.seed);
    check_labeled_ratio(cfg, bundle.manifest);
    return bundle;
}

DataBundle load_data_dir(const std::string& dir) {
    DataBundle bundle;
    bundle.dataset = data::load_image_dir(dir);
    std::ifstream in(dir + "/manifest.json", std::ios::binary);
    if (!in) {
        throw DataError(dir + "/manifest.json: missing (generate data with gen-data)");
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bundle.manifest = data::SplitManifest::from_json(text);
    return bundle;
}

void check_labeled_ratio(const ExperimentConfig& cfg, const data::SplitManifest& manifest) {
    auto u = manifest.sample_ids.find("train_unlabeled");
    auto l = manifest.sample_ids.find("train_labeled");
    if (u == manifest.sample_ids.end() || l == manifest.sample_ids.end()) {
        return;
    }
    const double bound = cfg.labeled_ratio_bound * static_cast<double>(u->second.size());
    if (static_cast<double>(l->second.size()) > bound) {
        throw DataError("labeled split has " + std::to_string(l->second.size()) +
                        " samples, exceeding " + std::to_string(cfg.labeled_ratio_bound) +
                        " * " + std::to_string(u->second.size()) + " unlabeled");
    }
}

json RunRecord::to_json() const {
    json j;
    j["name"] = name;
    j["variant"] = variant;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["parameter_count"] = parameter_count;
    j["pretrain_losses"] = pretrain_losses;
    json epochs = json::array();
    for (const auto& e : finetune_epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_accuracy", e.val_accuracy},
                          {"val_auc", e.val_auc},
                          {"val_auc_defined", e.val_auc_defined}});
    }
    j["finetune_epochs"] = epochs;
    j["best_epoch"] = best_epoch;
    j["early_stopped"] = early_stopped;
    j["test_metrics"] = {{"accuracy", test_metrics.accuracy},
                         {"auc", test_metrics.auc},
                         {"f1", test_metrics.f1},
                         {"precision", test_metrics.precision},
                         {"recall", test_metrics.recall},
                         {"sensitivity", test_metrics.sensitivity},
                         {"specificity", test_metrics.specificity},
                         {"confusion",
                          {{"tp", test_metrics.confusion.tp},
                           {"fp", test_metrics.confusion.fp},
                           {"tn", test_metrics.confusion.tn},
                           {"fn", test_metrics.confusion.fn}}}};
    return j;
}

namespace {

constexpr std::uint64_t kAugTag = 0x61756774ULL;      // augmentation streams
constexpr std::uint64_t kPretrainTag = 0x70726574ULL; // epoch shuffles
constexpr std::uint64_t kFinetuneTag = 0x66696e65ULL;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(idx);
    return idx;
}

} // namespace

PretrainResult pretrain(const ExperimentConfig& cfg, const DataBundle& data,
                        std::uint64_t run_seed) {
    const std::vector<data::Sample> unlabeled =
        data::select_split(data.dataset, data.manifest, "train_unlabeled", /*strip=*/true);
    if (unlabeled.empty()) {
        throw DataError("pretrain: unlabeled split is empty");
    }
    for (const auto& s : unlabeled) {
        if (s.label.has_value()) {
            throw DataError("pretrain: label visible in supposedly label-free view");
        }
    }

    hybrid::HybridModel model(cfg.model, run_seed);
    Adam adam(cfg.optimizer);
    {
        std::vector<Tensor*> params, grads;
        for (const auto& p : model.parameters()) {
            params.push_back(p.value);
            grads.push_back(p.grad);
        }
        adam.attach(params, grads);
    }

    const std::size_t h = data.dataset.height, w = data.dataset.width;
    const double tau = cfg.model.contrastive.temperature;
    PretrainResult result;
    model.set_training(true);

    for (std::size_t epoch = 0; epoch < cfg.pretrain.epochs; ++epoch) {
        const auto order =
            shuffled_indices(unlabeled.size(), derive_seed(run_seed, {kPretrainTag, epoch}));
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.pretrain.batch_size) {
            const std::size_t b = std::min(cfg.pretrain.batch_size, order.size() - start);
            if (b < 2) {
                continue; // a lone sample has no in-batch negatives
            }
            Tensor views({2 * b, 1, h, w});
            parallel_for(b, [&](std::size_t k) {
                const std::size_t sample_index = order[start + k];
                Rng aug_rng(derive_seed(run_seed, {kAugTag, sample_index, epoch}));
                const ssl::ViewPair vp =
                    ssl::make_views(unlabeled[sample_index].image, cfg.pretrain.augment, aug_rng);
                std::copy(vp.view1.values().begin(), vp.view1.values().end(),
                          views.data() + (2 * k) * h * w);
                std::copy(vp.view2.values().begin(), vp.view2.values().end(),
                          views.data() + (2 * k + 1) * h * w);
            });
            const Tensor z = model.forward_embeddings(views, cfg.pretrain.include_quantum);
            ssl::NtXentResult nt = ssl::ntxent_loss(z, tau);
            if (!std::isfinite(nt.loss)) {
                throw NumericError("pretrain: non-finite contrastive loss at epoch " +
                                   std::to_string(epoch));
            }
            model.zero_grads();
            model.backward_ntxent(nt.grad, cfg.pretrain.include_quantum);
            adam.step();
            loss_sum += nt.loss;
            ++batches;
        }
        const double mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        result.epoch_losses.push_back(mean_loss);
        progress({{"event", "epoch"},
                  {"phase", "pretrain"},
                  {"epoch", epoch},
                  {"loss", mean_loss}});
    }

    result.checkpoint = checkpoint_to_json(model, config_to_json(cfg), config_hash(cfg),
                                           "pretrain", adam.step_count());
    return result;
}

VariantSpec variant_spec(const std::string& name, const ExperimentConfig& cfg) {
    VariantSpec v;
    v.name = name;
    v.freeze = cfg.finetune.freeze;
    if (name == "ssl_quantum") {
        v.use_ssl = true;
        v.quantum = true;
    } else if (name == "ssl_only") {
        v.use_ssl = true;
        v.quantum = false;
    } else if (name == "supervised_only") {
        v.quantum = false;
        v.freeze = hybrid::FreezePolicy::all_unfrozen;
    } else if (name == "supervised_quantum") {
        v.quantum = true;
        v.freeze = hybrid::FreezePolicy::all_unfrozen;
    } else if (name == "simple_baseline") {
        v.quantum = false;
        v.simple_encoder = true;
        v.freeze = hybrid::FreezePolicy::all_unfrozen;
    } else {
        throw UsageError("unknown variant '" + name + "'");
    }
    return v;
}

hybrid::ModelConfig resolve_model_config(const ExperimentConfig& cfg,
                                         const VariantSpec& variant) {
    hybrid::ModelConfig m = cfg.model;
    m.quantum_enabled = variant.quantum;
    if (variant.simple_encoder) {
        // The SimpleCNN-class arm: two small stride-1 blocks with pooling.
        m.encoder.blocks = {{8, 1, true}, {16, 1, true}};
        m.encoder.feature_dim = 32;
    }
    return m;
}

namespace {

struct Snapshot {
    std::vector<std::vector<double>> params;
    std::vector<std::vector<double>> state;
};

Snapshot take_snapshot(hybrid::HybridModel& model) {
    Snapshot s;
    for (const auto& p : model.parameters()) {
        s.params.push_back(p.value->values());
    }
    for (const auto& st : model.state_tensors()) {
        s.state.push_back(st.value->values());
    }
    return s;
}

void restore_snapshot(hybrid::HybridModel& model, const Snapshot& s) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].value->values() = s.params[i];
    }
    auto state = model.state_tensors();
    for (std::size_t i = 0; i < state.size(); ++i) {
        state[i].value->values() = s.state[i];
    }
}

std::vector<int> labels_of(const std::vector<data::Sample>& samples, const char* where) {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (!s.label.has_value()) {
            throw DataError(std::string(where) + ": sample " + s.sample_id + " has no label");
        }
        out.push_back(*s.label);
    }
    return out;
}

} // namespace

std::vector<double> positive_scores(hybrid::HybridModel& model,
                                    const std::vector<data::Sample>& samples) {
    model.set_training(false);
    std::vector<double> scores;
    scores.reserve(samples.size());
    constexpr std::size_t chunk = 32;
    for (std::size_t start = 0; start < samples.size(); start += chunk) {
        const std::size_t b = std::min(chunk, samples.size() - start);
        std::vector<const data::Sample*> ptrs(b);
        for (std::size_t i = 0; i < b; ++i) {
            ptrs[i] = &samples[start + i];
        }
        const Tensor probs = model.forward_probs(hybrid::stack_images(ptrs));
        for (std::size_t i = 0; i < b; ++i) {
            scores.push_back(probs.at(i, 1));
        }
    }
    return scores;
}

FinetuneResult finetune(const ExperimentConfig& cfg, const DataBundle& data,
                        std::uint64_t run_seed, const VariantSpec& variant,
                        const json* pretrained_checkpoint,
                        const std::vector<double>& pretrain_losses) {
    const auto labeled = data::select_split(data.dataset, data.manifest, "train_labeled");
    const auto validation = data::select_split(data.dataset, data.manifest, "validation");
    const auto test = data::select_split(data.dataset, data.manifest, "test");
    if (labeled.empty()) {
        throw DataError("finetune: labeled split is empty");
    }
    const std::vector<int> labeled_labels = labels_of(labeled, "finetune");
    {
        const bool has0 = std::count(labeled_labels.begin(), labeled_labels.end(), 0) > 0;
        const bool has1 = std::count(labeled_labels.begin(), labeled_labels.end(), 1) > 0;
        if (!has0 || !has1) {
            throw DataError("finetune: labeled split must contain both classes");
        }
    }

    const hybrid::ModelConfig mcfg = resolve_model_config(cfg, variant);
    auto model = std::make_unique<hybrid::HybridModel>(mcfg, run_seed);
    if (variant.use_ssl) {
        if (!pretrained_checkpoint) {
            throw UsageError("variant '" + variant.name + "' needs a pretraining checkpoint");
        }
        load_checkpoint_into(*pretrained_checkpoint, *model);
    }

    Adam adam(cfg.optimizer);
    {
        std::vector<Tensor*> params, grads;
        for (const auto& p : model->parameters()) {
            params.push_back(p.value);
            grads.push_back(p.grad);
        }
        adam.attach(params, grads);
    }
    model->apply_freeze_policy(adam, variant.freeze);

    RunRecord record;
    record.variant = variant.name;
    record.seed = run_seed;
    record.config_hash = config_hash(cfg);
    record.parameter_count = model->parameter_count();
    record.pretrain_losses = pretrain_losses;
    progress({{"event", "model"},
              {"variant", variant.name},
              {"parameter_count", record.parameter_count},
              {"freeze", hybrid::to_string(variant.freeze)}});

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> val_labels = labels_of(validation, "validation");
    double best_acc = -1.0, best_auc = -1.0;
    std::size_t best_epoch = 0;
    Snapshot best = take_snapshot(*model);

    for (std::size_t epoch = 0; epoch < cfg.finetune.epochs; ++epoch) {
        const auto order =
            shuffled_indices(labeled.size(), derive_seed(run_seed, {kFinetuneTag, epoch}));
        model->set_training(true);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.finetune.batch_size) {
            const std::size_t b = std::min(cfg.finetune.batch_size, order.size() - start);
            if (b < 2) {
                continue; // batchnorm statistics need at least two samples
            }
            std::vector<const data::Sample*> ptrs(b);
            std::vector<int> batch_labels(b);
            for (std::size_t i = 0; i < b; ++i) {
                ptrs[i] = &labeled[order[start + i]];
                batch_labels[i] = labeled_labels[order[start + i]];
            }
            model->forward_logits(hybrid::stack_images(ptrs));
            model->zero_grads();
            const double loss = model->backward_cross_entropy(batch_labels);
            if (!std::isfinite(loss)) {
                throw NumericError("finetune: non-finite loss at epoch " +
                                   std::to_string(epoch));
            }
            adam.step();
            loss_sum += loss;
            ++batches;
        }

        EpochRecord er;
        er.epoch = epoch;
        er.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        const std::vector<double> val_scores = positive_scores(*model, validation);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < val_scores.size(); ++i) {
            correct += (val_scores[i] >= 0.5 ? 1 : 0) == val_labels[i];
        }
        er.val_accuracy = validation.empty()
                              ? 0.0
                              : static_cast<double>(correct) /
                                    static_cast<double>(validation.size());
        try {
            er.val_auc = eval::roc_auc(val_labels, val_scores).auc;
            er.val_auc_defined = true;
        } catch (const DataError&) {
            er.val_auc = 0.0; // single-class validation split
        }
        record.finetune_epochs.push_back(er);
        progress({{"event", "epoch"},
                  {"phase", "finetune"},
                  {"variant", variant.name},
                  {"epoch", epoch},
                  {"loss", er.train_loss},
                  {"val_accuracy", er.val_accuracy},
                  {"val_auc", er.val_auc}});

        if (er.val_accuracy > best_acc ||
            (er.val_accuracy == best_acc && er.val_auc > best_auc)) {
            best_acc = er.val_accuracy;
            best_auc = er.val_auc;
            best_epoch = epoch;
            best = take_snapshot(*model);
        } else if (epoch - best_epoch >= cfg.finetune.early_stop_patience) {
            record.early_stopped = true;
            break;
        }
    }

    restore_snapshot(*model, best);
    record.best_epoch = best_epoch;

    const std::vector<int> test_labels = labels_of(test, "test");
    const std::vector<double> test_scores = positive_scores(*model, test);
    record.test_metrics = eval::evaluate_scores(variant.name, test_labels, test_scores);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    progress({{"event", "run_complete"},
              {"variant", variant.name},
              {"seed", run_seed},
              {"best_epoch", best_epoch},
              {"test_accuracy", record.test_metrics.accuracy},
              {"test_auc", record.test_metrics.auc},
              {"wall_seconds", record.wall_seconds}});

    FinetuneResult out;
    out.record = std::move(record);
    out.model = std::move(model);
    return out;
}

MatrixResult run_matrix(const ExperimentConfig& cfg, const DataBundle& data) {
    MatrixResult result;
    const bool multi_seed = cfg.matrix.seeds.size() > 1;
    bool any_ssl = false;
    for (const auto& name : cfg.matrix.variants) {
        const VariantSpec v = variant_spec(name, cfg);
        any_ssl = any_ssl || v.use_ssl;
    }

    // Aggregation across seeds, keyed by variant in configured order.
    std::map<std::string, std::vector<eval::MetricsReport>> by_variant;

    for (const std::uint64_t seed : cfg.matrix.seeds) {
        json pretrained;
        std::vector<double> pretrain_losses;
        if (any_ssl) {
            progress({{"event", "pretrain_start"}, {"seed", seed}});
            PretrainResult pr = pretrain(cfg, data, seed);
            pretrained = std::move(pr.checkpoint);
            pretrain_losses = std::move(pr.epoch_losses);
        }
        for (const auto& name : cfg.matrix.variants) {
            const VariantSpec v = variant_spec(name, cfg);
            FinetuneResult fr =
                finetune(cfg, data, seed, v, v.use_ssl ? &pretrained : nullptr,
                         v.use_ssl ? pretrain_losses : std::vector<double>{});
            fr.record.name = multi_seed ? name + "@s" + std::to_string(seed) : name;
            fr.record.test_metrics.name = fr.record.name;
            by_variant[name].push_back(fr.record.test_metrics);
            result.reports.push_back(fr.record.test_metrics);
            result.records.push_back(std::move(fr.record));
        }
    }

    if (multi_seed) {
        for (const auto& name : cfg.matrix.variants) {
            const auto& runs = by_variant[name];
            eval::MetricsReport mean;
            mean.name = name + "@mean";
            for (const auto& r : runs) {
                mean.accuracy += r.accuracy;
                mean.auc += r.auc;
                mean.f1 += r.f1;
                mean.precision += r.precision;
                mean.recall += r.recall;
                mean.sensitivity += r.sensitivity;
                mean.specificity += r.specificity;
                mean.f1_positive += r.f1_positive;
                mean.precision_positive += r.precision_positive;
                mean.recall_positive += r.recall_positive;
                mean.confusion.tp += r.confusion.tp;
                mean.confusion.fp += r.confusion.fp;
                mean.confusion.tn += r.confusion.tn;
                mean.confusion.fn += r.confusion.fn;
                mean.degenerate = mean.degenerate || r.degenerate;
            }
            const double n = static_cast<double>(runs.size());
            mean.accuracy /= n;
            mean.auc /= n;
            mean.f1 /= n;
            mean.precision /= n;
            mean.recall /= n;
            mean.sensitivity /= n;
            mean.specificity /= n;
            mean.f1_positive /= n;
            mean.precision_positive /= n;
            mean.recall_positive /= n;
            mean.has_auc = true;
            result.reports.push_back(mean);
        }
    }
    return result;
}

} // namespace hyqal::pipeline
