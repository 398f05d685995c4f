#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hyqal/adam.hpp"
#include "hyqal/contrastive.hpp"
#include "hyqal/dataset.hpp"
#include "hyqal/layers.hpp"
#include "hyqal/qsim.hpp"
#include "hyqal/tensor.hpp"

namespace hyqal::hybrid {

struct ConvBlockSpec {
    std::size_t channels = 8;
    std::size_t stride = 2;
    bool pool = false; // 2x2 maxpool after the activation
};

struct EncoderConfig {
    std::size_t height = 64;
    std::size_t width = 64;
    std::vector<ConvBlockSpec> blocks = {{8, 2}, {16, 2}, {32, 2}};
    std::size_t feature_dim = 128;

    void validate() const;
};

// Small conv stack playing the lightweight-backbone role: per block
// conv3x3(stride) -> batchnorm -> relu, then global average pool and a dense
// map to the feature dimension.
class Encoder {
  public:
    Encoder(const EncoderConfig& cfg, Rng* rng);

    Tensor forward(const Tensor& images); // [N,1,H,W] -> [N,d]
    Tensor backward(const Tensor& grad_h);
    void set_training(bool t) { net_.set_training_all(t); }
    void set_bn_training(bool t);

    std::vector<Tensor*> params() { return net_.params(); }
    std::vector<Tensor*> grads() { return net_.grads(); }
    std::vector<std::string> param_names() const { return net_.param_names(); }
    std::vector<Tensor*> state() { return net_.state(); }
    std::vector<std::string> state_names() const { return net_.state_names(); }

    // Index range (into params()) of the final conv block plus the feature
    // projection; the "partially unfrozen" fine-tuning boundary.
    std::pair<std::size_t, std::size_t> last_block_param_range() const;

    const EncoderConfig& config() const { return cfg_; }

  private:
    EncoderConfig cfg_;
    Sequential net_;
    std::size_t last_block_first_param_ = 0;
};

struct QuantumFusionParams {
    Tensor w_q;    // [Q, d]
    Tensor b_q;    // [Q]
    qsim::VariationalParams theta;
    Tensor w_r;    // [d, Q]
    Tensor alpha;  // [1]

    Tensor grad_w_q, grad_b_q, grad_theta, grad_w_r, grad_alpha;
};

// u = W_q h + b_q; q = <Z> after the variational circuit on RY(u)|0>;
// h_tilde = h + alpha * W_r q. With the quantum path disabled the input is
// returned unchanged (bit-exactly). Accepts [d] or [N,d].
Tensor quantum_enhance(const Tensor& h, const QuantumFusionParams& params,
                       const qsim::CircuitSpec& spec, bool quantum_enabled = true,
                       bool bound_encoding = false);

// Softmax(W_c h_tilde + b_c) for one feature vector or a batch.
Tensor classify(const Tensor& h_tilde, const Tensor& w_c, const Tensor& b_c);

enum class FreezePolicy { all_frozen, last_block, all_unfrozen };

FreezePolicy freeze_policy_from_string(const std::string& s);
std::string to_string(FreezePolicy p);

struct ModelConfig {
    EncoderConfig encoder;
    qsim::CircuitSpec circuit; // defaults: Q=8, L=2, ring, RY+RZ
    ssl::ContrastiveConfig contrastive;
    bool quantum_enabled = true;
    double alpha_init = 0.1; // exactly 0 would starve W_r of gradient forever
    bool train_alpha = true;
    bool bound_encoding = false; // optional pi*tanh(.) on the encoding angles
    double head_dropout = 0.3;
    double bn_momentum = 0.9;
    std::size_t classes = 2;

    void validate() const;
};

struct ParamRef {
    std::string group;
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct StateRef {
    std::string group;
    std::string name;
    Tensor* value;
};

// The full pipeline model. All parameter groups (including quantum ones) are
// always allocated and initialized from the seed-derived stream, so ablation
// flags change only the forward path, never the initialization draws.
class HybridModel {
  public:
    HybridModel(const ModelConfig& cfg, std::uint64_t seed);

    // Classification path.
    Tensor forward_features(const Tensor& images);   // encoder only -> h
    Tensor forward_enhanced(const Tensor& images);   // h -> h_tilde (cached)
    Tensor forward_logits(const Tensor& images);     // full path, cached for backward
    Tensor forward_probs(const Tensor& images);

    // Cross-entropy on the cached forward; accumulates all gradients and
    // returns grad wrt images (rarely needed; encoder backward always runs).
    double backward_cross_entropy(const std::vector<int>& labels);

    // Contrastive path (projection head on encoder features). When
    // include_quantum is set the quantum enhancement sits between encoder
    // and projection, mirroring the classification path.
    Tensor forward_embeddings(const Tensor& views, bool include_quantum);
    double backward_ntxent(const Tensor& grad_embeddings, bool include_quantum);

    void set_training(bool train);
    // Gradcheck mode: batchnorm uses batch statistics, dropout is identity,
    // so repeated forwards are deterministic and differentiable.
    void set_gradcheck_mode();

    void zero_grads();
    std::vector<ParamRef> parameters();
    std::vector<StateRef> state_tensors();
    std::size_t parameter_count(bool include_projection = true);

    Encoder& encoder() { return encoder_; }
    ssl::ProjectionHead& projection() { return projection_; }
    QuantumFusionParams& fusion() { return fusion_; }
    BatchNorm& head_bn() { return *head_bn_; }
    Dense& head_dense() { return *head_dense_; }
    Rng& train_rng() { return train_rng_; }
    const ModelConfig& config() const { return cfg_; }

    // Applies a freeze policy to an optimizer attached over parameters():
    // the encoder group obeys the policy, alpha obeys train_alpha, everything
    // else stays trainable.
    void apply_freeze_policy(Adam& optimizer, FreezePolicy policy);

  private:
    Tensor enhance_batch(const Tensor& h);            // caches per-sample u, q
    Tensor enhance_backward(const Tensor& grad_out);  // consumes the cache

    ModelConfig cfg_;
    Rng init_rng_;
    Rng train_rng_; // dropout stream; advances only in train mode
    Encoder encoder_;
    ssl::ProjectionHead projection_;
    QuantumFusionParams fusion_;
    std::unique_ptr<BatchNorm> head_bn_;
    std::unique_ptr<Dropout> head_dropout_;
    std::unique_ptr<Dense> head_dense_;

    // Forward caches.
    Tensor cached_h_, cached_logits_;
    std::vector<std::vector<double>> cached_u_, cached_q_, cached_v_;
    bool cached_quantum_in_embed_path_ = false;
};

// Stacks sample images into the [N,1,H,W] batch layout.
Tensor stack_images(const std::vector<data::Sample>& samples);
Tensor stack_images(const std::vector<const data::Sample*>& samples);

} // namespace hyqal::hybrid
