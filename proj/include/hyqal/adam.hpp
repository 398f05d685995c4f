#pragma once

#include <cstdint>
#include <vector>

#include "hyqal/tensor.hpp"

namespace hyqal {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moments are allocated lazily to parameter
// shapes on attach; frozen parameters are left bit-unchanged (their moments
// are not advanced either).
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void attach(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads);
    void set_trainable(std::size_t index, bool trainable);
    void set_all_trainable(bool trainable);

    void step();
    std::int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }
    std::size_t param_count() const { return params_.size(); }

  private:
    AdamConfig cfg_;
    std::vector<Tensor*> params_;
    std::vector<Tensor*> grads_;
    std::vector<Tensor> m_, v_;
    std::vector<bool> trainable_;
    std::int64_t step_ = 0;
};

} // namespace hyqal
