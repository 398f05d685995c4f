#include "hyqal/adam.hpp"

#include <cmath>

namespace hyqal {

void Adam::attach(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads) {
    if (params.size() != grads.size()) {
        throw ShapeError("Adam::attach: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i])) {
            throw ShapeError("Adam::attach: param " + params[i]->shape_str() + " vs grad " +
                             grads[i]->shape_str());
        }
    }
    params_ = params;
    grads_ = grads;
    m_.clear();
    v_.clear();
    for (Tensor* p : params_) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
    }
    trainable_.assign(params_.size(), true);
    step_ = 0;
}

void Adam::set_trainable(std::size_t index, bool trainable) {
    trainable_.at(index) = trainable;
}

void Adam::set_all_trainable(bool trainable) {
    trainable_.assign(trainable_.size(), trainable);
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!trainable_[i]) {
            continue;
        }
        Tensor& p = *params_[i];
        const Tensor& g = *grads_[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

} // namespace hyqal
