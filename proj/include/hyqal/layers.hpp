#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hyqal/rng.hpp"
#include "hyqal/tensor.hpp"

namespace hyqal {

// Emits a single-line JSON warning event to stderr.
void warn(const std::string& message);

// Layers consume and produce batched tensors (leading dim = batch). Each
// layer caches what its backward needs; backward before forward is an error.
// Instances are single-writer: never share one across threads.
class Layer {
  public:
    virtual ~Layer() = default;

    virtual std::string_view kind() const = 0;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }
    virtual std::vector<std::string> param_names() const { return {}; }
    // Mutable persistent state (e.g. batchnorm running stats), checkpointed
    // alongside parameters but never touched by the optimizer.
    virtual std::vector<Tensor*> state() { return {}; }
    virtual std::vector<std::string> state_names() const { return {}; }

    void set_training(bool t) {
        training_ = t;
        forwarded_ = false;
    }
    bool training() const { return training_; }

    void zero_grads();

  protected:
    void require_forwarded(std::string_view kind) const;

    bool training_ = false;
    bool forwarded_ = false;
};

class Dense : public Layer {
  public:
    // Glorot-uniform weights when rng given, zeros otherwise.
    Dense(std::size_t in_features, std::size_t out_features, Rng* rng = nullptr);

    std::string_view kind() const override { return "dense"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> params() override { return {&weight, &bias}; }
    std::vector<Tensor*> grads() override { return {&grad_weight, &grad_bias}; }
    std::vector<std::string> param_names() const override { return {"weight", "bias"}; }

    Tensor weight;      // [out, in]
    Tensor bias;        // [out]
    Tensor grad_weight;
    Tensor grad_bias;

  private:
    std::size_t in_, out_;
    Tensor input_;
};

class Conv2d : public Layer {
  public:
    // He-normal weights when rng given, zeros otherwise. Direct loops; no
    // im2col needed at this scale.
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel = 3,
           std::size_t stride = 1, std::size_t padding = 1, Rng* rng = nullptr);

    std::string_view kind() const override { return "conv2d"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> params() override { return {&weight, &bias}; }
    std::vector<Tensor*> grads() override { return {&grad_weight, &grad_bias}; }
    std::vector<std::string> param_names() const override { return {"weight", "bias"}; }

    Tensor weight;      // [oc, ic, k, k]
    Tensor bias;        // [oc]
    Tensor grad_weight;
    Tensor grad_bias;

  private:
    std::size_t ic_, oc_, k_, stride_, pad_;
    Tensor input_;
};

class ReLU : public Layer {
  public:
    std::string_view kind() const override { return "relu"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    Tensor input_;
};

// Per-channel normalization: over N for [N,C], over N*H*W for [N,C,H,W].
// Train mode uses batch statistics (biased variance) and updates running
// stats; eval mode uses running stats only.
class BatchNorm : public Layer {
  public:
    explicit BatchNorm(std::size_t channels, double momentum = 0.9, double eps = 1e-5);

    std::string_view kind() const override { return "batchnorm"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> params() override { return {&gamma, &beta}; }
    std::vector<Tensor*> grads() override { return {&grad_gamma, &grad_beta}; }
    std::vector<std::string> param_names() const override { return {"gamma", "beta"}; }
    std::vector<Tensor*> state() override { return {&running_mean, &running_var}; }
    std::vector<std::string> state_names() const override {
        return {"running_mean", "running_var"};
    }

    Tensor gamma, beta;
    Tensor grad_gamma, grad_beta;
    Tensor running_mean, running_var;

  private:
    std::size_t channels_;
    double momentum_, eps_;
    bool used_batch_stats_ = false;
    Tensor input_, xhat_;
    std::vector<double> inv_std_; // per channel, train mode
};

class Dropout : public Layer {
  public:
    // rng may be shared with the owning model; if null an internal stream
    // seeded with `seed` is used.
    explicit Dropout(double rate = 0.3, Rng* rng = nullptr, std::uint64_t seed = 0);

    std::string_view kind() const override { return "dropout"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

    double rate() const { return rate_; }

  private:
    double rate_;
    Rng* rng_;
    Rng own_rng_;
    Tensor mask_; // 0 or 1/(1-p)
};

// Row-wise x / ||x||_2 for [N,d]. An exactly-zero row passes through as zero
// (with a warning) and receives zero gradient.
class L2Normalize : public Layer {
  public:
    std::string_view kind() const override { return "l2normalize"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

    std::size_t zero_row_count() const { return zero_rows_; }

  private:
    Tensor output_;
    std::vector<double> norms_;
    std::size_t zero_rows_ = 0;
};

class GlobalAvgPool : public Layer {
  public:
    std::string_view kind() const override { return "globalavgpool"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::vector<std::size_t> in_shape_;
};

class MaxPool : public Layer {
  public:
    explicit MaxPool(std::size_t kernel = 2, std::size_t stride = 2);

    std::string_view kind() const override { return "maxpool"; }
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::size_t k_, stride_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> argmax_;
};

// Owning chain of layers with pass-through parameter collection.
class Sequential : public Layer {
  public:
    Sequential() = default;

    std::string_view kind() const override { return "sequential"; }

    template <typename L, typename... Args>
    L* emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> params() override;
    std::vector<Tensor*> grads() override;
    std::vector<std::string> param_names() const override;
    std::vector<Tensor*> state() override;
    std::vector<std::string> state_names() const override;

    void set_training_all(bool t);
    std::size_t layer_count() const { return layers_.size(); }
    Layer* layer(std::size_t i) { return layers_[i].get(); }
    const Layer* layer(std::size_t i) const { return layers_[i].get(); }

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Row-wise softmax with max subtraction; probabilities sum to 1.
Tensor softmax_rows(const Tensor& logits);

// Mean cross-entropy over the batch from raw logits (log-sum-exp form).
// Returns loss and writes d(loss)/d(logits) into grad_logits.
double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad_logits);

} // namespace hyqal
