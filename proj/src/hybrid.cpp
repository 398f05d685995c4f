#include "hyqal/hybrid.hpp"

#include <algorithm>
#include <cmath>

#include "hyqal/parallel.hpp"

namespace hyqal::hybrid {

void EncoderConfig::validate() const {
    if (height < 8 || width < 8) {
        throw DataError("encoder: input must be at least 8x8");
    }
    if (blocks.empty()) {
        throw DataError("encoder: at least one conv block required");
    }
    if (feature_dim == 0) {
        throw DataError("encoder: feature_dim must be positive");
    }
    for (const auto& b : blocks) {
        if (b.channels == 0 || b.stride == 0) {
            throw DataError("encoder: conv block channels and stride must be positive");
        }
    }
}

Encoder::Encoder(const EncoderConfig& cfg, Rng* rng) : cfg_(cfg) {
    cfg.validate();
    std::size_t in_ch = 1;
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        if (i + 1 == cfg.blocks.size()) {
            last_block_first_param_ = net_.params().size();
        }
        net_.emplace<Conv2d>(in_ch, cfg.blocks[i].channels, 3, cfg.blocks[i].stride, 1, rng);
        net_.emplace<BatchNorm>(cfg.blocks[i].channels);
        net_.emplace<ReLU>();
        if (cfg.blocks[i].pool) {
            net_.emplace<MaxPool>(2, 2);
        }
        in_ch = cfg.blocks[i].channels;
    }
    net_.emplace<GlobalAvgPool>();
    net_.emplace<Dense>(in_ch, cfg.feature_dim, rng);
}

Tensor Encoder::forward(const Tensor& images) {
    if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != cfg_.height ||
        images.dim(3) != cfg_.width) {
        throw ShapeError("encoder: expected [N,1," + std::to_string(cfg_.height) + "," +
                         std::to_string(cfg_.width) + "] images, got " + images.shape_str());
    }
    return net_.forward(images);
}

Tensor Encoder::backward(const Tensor& grad_h) { return net_.backward(grad_h); }

void Encoder::set_bn_training(bool t) {
    for (std::size_t i = 0; i < net_.layer_count(); ++i) {
        if (net_.layer(i)->kind() == "batchnorm") {
            net_.layer(i)->set_training(t);
        }
    }
}

std::pair<std::size_t, std::size_t> Encoder::last_block_param_range() const {
    // From the last conv block through the feature projection.
    return {last_block_first_param_, const_cast<Sequential&>(net_).params().size()};
}

void ModelConfig::validate() const {
    encoder.validate();
    circuit.validate();
    contrastive.validate();
    if (encoder.feature_dim < static_cast<std::size_t>(circuit.num_qubits)) {
        throw DataError("model: feature_dim (" + std::to_string(encoder.feature_dim) +
                        ") must be >= qubit count (" + std::to_string(circuit.num_qubits) +
                        "): the compression map must reduce");
    }
    if (head_dropout < 0.0 || head_dropout >= 1.0) {
        throw DataError("model: head_dropout must be in [0,1)");
    }
    if (classes != 2) {
        throw DataError("model: binary task only (classes must be 2)");
    }
    if (!std::isfinite(alpha_init)) {
        throw DataError("model: alpha_init must be finite");
    }
}

FreezePolicy freeze_policy_from_string(const std::string& s) {
    if (s == "all-frozen" || s == "frozen") return FreezePolicy::all_frozen;
    if (s == "last-block") return FreezePolicy::last_block;
    if (s == "all-unfrozen" || s == "none") return FreezePolicy::all_unfrozen;
    throw DataError("unknown freeze policy: " + s +
                    " (expected all-frozen | last-block | all-unfrozen)");
}

std::string to_string(FreezePolicy p) {
    switch (p) {
        case FreezePolicy::all_frozen: return "all-frozen";
        case FreezePolicy::last_block: return "last-block";
        case FreezePolicy::all_unfrozen: return "all-unfrozen";
    }
    return "?";
}

namespace {

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values()) {
        v = rng.uniform(-limit, limit);
    }
}

} // namespace

Tensor quantum_enhance(const Tensor& h, const QuantumFusionParams& params,
                       const qsim::CircuitSpec& spec, bool quantum_enabled,
                       bool bound_encoding) {
    const bool single = h.rank() == 1;
    if (!single && h.rank() != 2) {
        throw ShapeError("quantum_enhance: expected [d] or [N,d], got " + h.shape_str());
    }
    if (!quantum_enabled) {
        return h;
    }
    const std::size_t d = single ? h.dim(0) : h.dim(1);
    const std::size_t n = single ? 1 : h.dim(0);
    const std::size_t q_count = static_cast<std::size_t>(spec.num_qubits);
    if (params.w_q.shape() != std::vector<std::size_t>{q_count, d}) {
        throw ShapeError("quantum_enhance: W_q " + params.w_q.shape_str() + " does not match [" +
                         std::to_string(q_count) + "," + std::to_string(d) + "]");
    }
    Tensor out = h;
    const double alpha = params.alpha[0];
    for (std::size_t s = 0; s < n; ++s) {
        const double* hs = h.data() + s * d;
        std::vector<double> u(q_count, 0.0);
        for (std::size_t q = 0; q < q_count; ++q) {
            double acc = params.b_q[q];
            const double* wr = params.w_q.data() + q * d;
            for (std::size_t i = 0; i < d; ++i) {
                acc += wr[i] * hs[i];
            }
            u[q] = bound_encoding ? M_PI * std::tanh(acc) : acc;
        }
        const std::vector<double> z = qsim::run_circuit(u, spec, params.theta);
        if (alpha == 0.0) {
            continue; // residual contribution is exactly zero
        }
        double* os = out.data() + s * d;
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            const double* wr = params.w_r.data() + i * q_count;
            for (std::size_t q = 0; q < q_count; ++q) {
                acc += wr[q] * z[q];
            }
            os[i] += alpha * acc;
        }
    }
    return out;
}

Tensor classify(const Tensor& h_tilde, const Tensor& w_c, const Tensor& b_c) {
    const bool single = h_tilde.rank() == 1;
    if (!single && h_tilde.rank() != 2) {
        throw ShapeError("classify: expected [d] or [N,d], got " + h_tilde.shape_str());
    }
    const std::size_t d = single ? h_tilde.dim(0) : h_tilde.dim(1);
    const std::size_t n = single ? 1 : h_tilde.dim(0);
    const std::size_t c = b_c.dim(0);
    if (w_c.shape() != std::vector<std::size_t>{c, d}) {
        throw ShapeError("classify: W_c " + w_c.shape_str() + " does not match [" +
                         std::to_string(c) + "," + std::to_string(d) + "]");
    }
    Tensor logits({n, c});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = b_c[j];
            const double* wr = w_c.data() + j * d;
            const double* hs = h_tilde.data() + s * d;
            for (std::size_t i = 0; i < d; ++i) {
                acc += wr[i] * hs[i];
            }
            logits.at(s, j) = acc;
        }
    }
    Tensor probs = softmax_rows(logits);
    if (single) {
        return Tensor({c}, probs.values());
    }
    return probs;
}

HybridModel::HybridModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      init_rng_(derive_seed(seed, "model-init")),
      train_rng_(derive_seed(seed, "model-train")),
      encoder_(cfg.encoder, &init_rng_),
      projection_(cfg.encoder.feature_dim, cfg.contrastive, &init_rng_) {
    cfg.validate();
    const auto q_count = static_cast<std::size_t>(cfg.circuit.num_qubits);
    const std::size_t d = cfg.encoder.feature_dim;

    fusion_.w_q = Tensor({q_count, d});
    glorot(fusion_.w_q, d, q_count, init_rng_);
    fusion_.b_q = Tensor({q_count});
    fusion_.theta = qsim::VariationalParams::random_init(cfg.circuit, init_rng_);
    fusion_.w_r = Tensor({d, q_count});
    glorot(fusion_.w_r, q_count, d, init_rng_);
    fusion_.alpha = Tensor({1}, cfg.alpha_init);
    fusion_.grad_w_q = Tensor({q_count, d});
    fusion_.grad_b_q = Tensor({q_count});
    fusion_.grad_theta = Tensor(cfg.circuit.theta_shape());
    fusion_.grad_w_r = Tensor({d, q_count});
    fusion_.grad_alpha = Tensor({1});

    head_bn_ = std::make_unique<BatchNorm>(d, cfg.bn_momentum);
    head_dropout_ = std::make_unique<Dropout>(cfg.head_dropout, &train_rng_);
    head_dense_ = std::make_unique<Dense>(d, cfg.classes, &init_rng_);
}

Tensor HybridModel::forward_features(const Tensor& images) { return encoder_.forward(images); }

Tensor HybridModel::enhance_batch(const Tensor& h) {
    const std::size_t n = h.dim(0), d = h.dim(1);
    cached_u_.assign(n, {});
    cached_q_.assign(n, {});
    cached_v_.assign(n, {});
    if (!cfg_.quantum_enabled) {
        return h;
    }
    const auto q_count = static_cast<std::size_t>(cfg_.circuit.num_qubits);
    const double alpha = fusion_.alpha[0];
    Tensor out = h;
    parallel_for(n, [&](std::size_t s) {
        const double* hs = h.data() + s * d;
        std::vector<double> v(q_count, 0.0), u(q_count, 0.0);
        for (std::size_t q = 0; q < q_count; ++q) {
            double acc = fusion_.b_q[q];
            const double* wr = fusion_.w_q.data() + q * d;
            for (std::size_t i = 0; i < d; ++i) {
                acc += wr[i] * hs[i];
            }
            v[q] = acc;
            u[q] = cfg_.bound_encoding ? M_PI * std::tanh(acc) : acc;
        }
        std::vector<double> z = qsim::run_circuit(u, cfg_.circuit, fusion_.theta);
        if (alpha != 0.0) {
            double* os = out.data() + s * d;
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                const double* wr = fusion_.w_r.data() + i * q_count;
                for (std::size_t q = 0; q < q_count; ++q) {
                    acc += wr[q] * z[q];
                }
                os[i] += alpha * acc;
            }
        }
        cached_v_[s] = std::move(v);
        cached_u_[s] = std::move(u);
        cached_q_[s] = std::move(z);
    });
    return out;
}

Tensor HybridModel::enhance_backward(const Tensor& grad_out) {
    if (!cfg_.quantum_enabled) {
        return grad_out;
    }
    const std::size_t n = grad_out.dim(0), d = grad_out.dim(1);
    const auto q_count = static_cast<std::size_t>(cfg_.circuit.num_qubits);
    const double alpha = fusion_.alpha[0];

    Tensor grad_h = grad_out;
    // Per-sample contributions land in private buffers; the reduction below
    // runs in sample order so results are independent of the worker count.
    std::vector<Tensor> gw_q(n), gtheta(n);
    std::vector<std::vector<double>> gb_q(n), gw_r_cols(n);
    std::vector<double> galpha(n, 0.0);
    parallel_for(n, [&](std::size_t s) {
        const double* g = grad_out.data() + s * d;
        const std::vector<double>& z = cached_q_[s];
        const std::vector<double>& u = cached_u_[s];

        // d(loss)/d(alpha) and the W_r column factors.
        double wrq_dot_g = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            const double* wr = fusion_.w_r.data() + i * q_count;
            for (std::size_t q = 0; q < q_count; ++q) {
                acc += wr[q] * z[q];
            }
            wrq_dot_g += acc * g[i];
        }
        galpha[s] = wrq_dot_g;

        // grad wrt q, chained through the residual scale.
        std::vector<double> grad_q(q_count, 0.0);
        for (std::size_t q = 0; q < q_count; ++q) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                acc += fusion_.w_r.data()[i * q_count + q] * g[i];
            }
            grad_q[q] = alpha * acc;
        }
        gw_r_cols[s] = std::move(grad_q); // reused below; full W_r grad is alpha * g x z^T

        if (alpha == 0.0) {
            // grad_q is identically zero: every downstream gradient except
            // alpha's vanishes, so the parameter-shift sweep can be skipped.
            gtheta[s] = Tensor(cfg_.circuit.theta_shape());
            gb_q[s].assign(q_count, 0.0);
            gw_q[s] = Tensor({q_count, d});
            return;
        }

        qsim::QuantumGradients qg =
            qsim::quantum_gradients(u, cfg_.circuit, fusion_.theta, gw_r_cols[s]);
        gtheta[s] = std::move(qg.grad_theta);

        // Chain through the (optional) bounding and the compression map.
        std::vector<double> grad_v(q_count, 0.0);
        for (std::size_t q = 0; q < q_count; ++q) {
            double gu = qg.grad_u[q];
            if (cfg_.bound_encoding) {
                const double t = std::tanh(cached_v_[s][q]);
                gu *= M_PI * (1.0 - t * t);
            }
            grad_v[q] = gu;
        }
        gb_q[s] = grad_v;

        Tensor gw({q_count, d});
        const Tensor& h = cached_h_;
        const double* hs = h.data() + s * d;
        double* gi = grad_h.data() + s * d;
        for (std::size_t q = 0; q < q_count; ++q) {
            const double gv = grad_v[q];
            double* gwr = gw.data() + q * d;
            const double* wq = fusion_.w_q.data() + q * d;
            for (std::size_t i = 0; i < d; ++i) {
                gwr[i] = gv * hs[i];
                gi[i] += gv * wq[i];
            }
        }
        gw_q[s] = std::move(gw);
    });

    for (std::size_t s = 0; s < n; ++s) {
        fusion_.grad_alpha[0] += galpha[s];
        fusion_.grad_w_q.add_scaled(gw_q[s], 1.0);
        fusion_.grad_theta.add_scaled(gtheta[s], 1.0);
        for (std::size_t q = 0; q < q_count; ++q) {
            fusion_.grad_b_q[q] += gb_q[s][q];
        }
        // grad W_r[i][q] += alpha * g[i] * z[q]
        const double* g = grad_out.data() + s * d;
        const std::vector<double>& z = cached_q_[s];
        for (std::size_t i = 0; i < d; ++i) {
            double* row = fusion_.grad_w_r.data() + i * q_count;
            const double gi_alpha = alpha * g[i];
            for (std::size_t q = 0; q < q_count; ++q) {
                row[q] += gi_alpha * z[q];
            }
        }
    }
    return grad_h;
}

Tensor HybridModel::forward_enhanced(const Tensor& images) {
    cached_h_ = encoder_.forward(images);
    return enhance_batch(cached_h_);
}

Tensor HybridModel::forward_logits(const Tensor& images) {
    Tensor ht = forward_enhanced(images);
    Tensor z = head_bn_->forward(ht);
    z = head_dropout_->forward(z);
    cached_logits_ = head_dense_->forward(z);
    return cached_logits_;
}

Tensor HybridModel::forward_probs(const Tensor& images) {
    return softmax_rows(forward_logits(images));
}

double HybridModel::backward_cross_entropy(const std::vector<int>& labels) {
    if (cached_logits_.empty()) {
        throw ShapeError("model: backward before forward");
    }
    Tensor grad_logits;
    const double loss = cross_entropy(cached_logits_, labels, &grad_logits);
    Tensor g = head_dense_->backward(grad_logits);
    g = head_dropout_->backward(g);
    g = head_bn_->backward(g);
    g = enhance_backward(g);
    encoder_.backward(g);
    return loss;
}

Tensor HybridModel::forward_embeddings(const Tensor& views, bool include_quantum) {
    cached_h_ = encoder_.forward(views);
    cached_quantum_in_embed_path_ = include_quantum && cfg_.quantum_enabled;
    Tensor h = cached_quantum_in_embed_path_ ? enhance_batch(cached_h_) : cached_h_;
    return projection_.forward(h);
}

double HybridModel::backward_ntxent(const Tensor& grad_embeddings, bool include_quantum) {
    Tensor g = projection_.backward(grad_embeddings);
    if (include_quantum && cached_quantum_in_embed_path_) {
        g = enhance_backward(g);
    }
    encoder_.backward(g);
    return 0.0;
}

void HybridModel::set_training(bool train) {
    encoder_.set_training(train);
    projection_.set_training(train);
    head_bn_->set_training(train);
    head_dropout_->set_training(train);
}

void HybridModel::set_gradcheck_mode() {
    set_training(true);
    head_dropout_->set_training(false);
}

void HybridModel::zero_grads() {
    for (ParamRef& p : parameters()) {
        p.grad->zero();
    }
}

std::vector<ParamRef> HybridModel::parameters() {
    std::vector<ParamRef> out;
    auto add_group = [&](const std::string& group, std::vector<Tensor*> values,
                         std::vector<Tensor*> grads, std::vector<std::string> names) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out.push_back({group, names[i], values[i], grads[i]});
        }
    };
    add_group("encoder", encoder_.params(), encoder_.grads(), encoder_.param_names());
    add_group("projection", projection_.params(), projection_.grads(),
              projection_.param_names());
    out.push_back({"compression", "w_q", &fusion_.w_q, &fusion_.grad_w_q});
    out.push_back({"compression", "b_q", &fusion_.b_q, &fusion_.grad_b_q});
    out.push_back({"quantum", "theta", &fusion_.theta.theta, &fusion_.grad_theta});
    out.push_back({"fusion", "w_r", &fusion_.w_r, &fusion_.grad_w_r});
    out.push_back({"fusion", "alpha", &fusion_.alpha, &fusion_.grad_alpha});
    add_group("classifier", head_bn_->params(), head_bn_->grads(), {"bn.gamma", "bn.beta"});
    add_group("classifier", head_dense_->params(), head_dense_->grads(), {"w_c", "b_c"});
    return out;
}

std::vector<StateRef> HybridModel::state_tensors() {
    std::vector<StateRef> out;
    auto enc_state = encoder_.state();
    auto enc_names = encoder_.state_names();
    for (std::size_t i = 0; i < enc_state.size(); ++i) {
        out.push_back({"encoder", enc_names[i], enc_state[i]});
    }
    out.push_back({"classifier", "bn.running_mean", &head_bn_->running_mean});
    out.push_back({"classifier", "bn.running_var", &head_bn_->running_var});
    return out;
}

std::size_t HybridModel::parameter_count(bool include_projection) {
    std::size_t n = 0;
    for (const ParamRef& p : parameters()) {
        if (!include_projection && p.group == "projection") {
            continue;
        }
        n += p.value->size();
    }
    return n;
}

void HybridModel::apply_freeze_policy(Adam& optimizer, FreezePolicy policy) {
    auto params = parameters();
    if (optimizer.param_count() != params.size()) {
        throw ShapeError("apply_freeze_policy: optimizer not attached over model parameters");
    }
    const auto [last_begin, last_end] = encoder_.last_block_param_range();
    std::size_t encoder_index = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        bool trainable = true;
        if (params[i].group == "encoder") {
            switch (policy) {
                case FreezePolicy::all_frozen: trainable = false; break;
                case FreezePolicy::all_unfrozen: trainable = true; break;
                case FreezePolicy::last_block:
                    trainable = encoder_index >= last_begin && encoder_index < last_end;
                    break;
            }
            ++encoder_index;
        }
        if (params[i].group == "fusion" && params[i].name == "alpha" && !cfg_.train_alpha) {
            trainable = false;
        }
        optimizer.set_trainable(i, trainable);
    }
}

Tensor stack_images(const std::vector<data::Sample>& samples) {
    std::vector<const data::Sample*> ptrs;
    ptrs.reserve(samples.size());
    for (const auto& s : samples) {
        ptrs.push_back(&s);
    }
    return stack_images(ptrs);
}

Tensor stack_images(const std::vector<const data::Sample*>& samples) {
    if (samples.empty()) {
        throw DataError("stack_images: empty batch");
    }
    const std::size_t h = samples[0]->image.dim(0), w = samples[0]->image.dim(1);
    Tensor out({samples.size(), 1, h, w});
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const Tensor& img = samples[s]->image;
        if (img.dim(0) != h || img.dim(1) != w) {
            throw ShapeError("stack_images: sample " + samples[s]->sample_id + " is " +
                             img.shape_str() + ", expected " + shape_to_string({h, w}));
        }
        std::copy(img.values().begin(), img.values().end(), out.data() + s * h * w);
    }
    return out;
}

} // namespace hyqal::hybrid
