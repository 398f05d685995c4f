#pragma once

#include "hyqal/layers.hpp"
#include "hyqal/tensor.hpp"

namespace hyqal::ssl {

struct ContrastiveConfig {
    double temperature = 0.5;
    std::size_t embed_dim = 64;
    std::size_t hidden_dim = 128;

    void validate() const;
};

// Two-layer perceptron onto the unit hypersphere: dense -> relu -> dense ->
// l2normalize. Discarded after pretraining.
class ProjectionHead {
  public:
    ProjectionHead(std::size_t input_dim, const ContrastiveConfig& cfg, Rng* rng = nullptr);

    Tensor forward(const Tensor& h);          // [N,d] -> [N,embed], unit rows
    Tensor backward(const Tensor& grad_z);    // -> grad wrt h
    std::vector<Tensor*> params() { return net_.params(); }
    std::vector<Tensor*> grads() { return net_.grads(); }
    std::vector<std::string> param_names() const { return net_.param_names(); }
    void set_training(bool t) { net_.set_training_all(t); }
    Sequential& net() { return net_; }

  private:
    Sequential net_;
};

// Temperature-scaled cosine similarity of unit vectors: z_i . z_j / tau.
double similarity(const Tensor& zi, const Tensor& zj, double temperature);

struct NtXentResult {
    double loss = 0.0;
    Tensor grad; // dLoss/dz, shape [2N, embed]
};

// NT-Xent over an embedding batch where views (2k, 2k+1) are positives.
// loss = (1/2N) sum_a -log( exp(sim(z_a, z_p(a))) / sum_{b != a} exp(sim(z_a, z_b)) ).
// Requires 2N >= 4 so every anchor has at least one negative.
NtXentResult ntxent_loss(const Tensor& embeddings, double temperature);

} // namespace hyqal::ssl
