#include "hyqal/contrastive.hpp"

#include <cmath>

namespace hyqal::ssl {

void ContrastiveConfig::validate() const {
    if (temperature <= 0.0) {
        throw DataError("contrastive: temperature must be > 0, got " +
                        std::to_string(temperature));
    }
    if (embed_dim == 0 || hidden_dim == 0) {
        throw DataError("contrastive: embed_dim and hidden_dim must be positive");
    }
}

ProjectionHead::ProjectionHead(std::size_t input_dim, const ContrastiveConfig& cfg, Rng* rng) {
    cfg.validate();
    net_.emplace<Dense>(input_dim, cfg.hidden_dim, rng);
    net_.emplace<ReLU>();
    net_.emplace<Dense>(cfg.hidden_dim, cfg.embed_dim, rng);
    net_.emplace<L2Normalize>();
}

Tensor ProjectionHead::forward(const Tensor& h) { return net_.forward(h); }

Tensor ProjectionHead::backward(const Tensor& grad_z) { return net_.backward(grad_z); }

double similarity(const Tensor& zi, const Tensor& zj, double temperature) {
    if (temperature <= 0.0) {
        throw DataError("similarity: temperature must be > 0");
    }
    if (!zi.same_shape(zj) || zi.rank() != 1) {
        throw ShapeError("similarity: expected matching vectors, got " + zi.shape_str() +
                         " and " + zj.shape_str());
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < zi.size(); ++i) {
        dot += zi[i] * zj[i];
    }
    return dot / temperature;
}

NtXentResult ntxent_loss(const Tensor& embeddings, double temperature) {
    if (temperature <= 0.0) {
        throw DataError("ntxent: temperature must be > 0");
    }
    if (embeddings.rank() != 2) {
        throw ShapeError("ntxent: expected [2N, embed] batch, got " + embeddings.shape_str());
    }
    const std::size_t total = embeddings.dim(0);
    const std::size_t dim = embeddings.dim(1);
    if (total < 4 || total % 2 != 0) {
        throw DataError("ntxent: need an even batch of at least 4 views (no negatives exist "
                        "below N=2), got " + std::to_string(total));
    }

    // Pairwise scaled similarities.
    std::vector<double> sim(total * total, 0.0);
    for (std::size_t a = 0; a < total; ++a) {
        const double* za = embeddings.data() + a * dim;
        for (std::size_t b = a + 1; b < total; ++b) {
            const double* zb = embeddings.data() + b * dim;
            double dot = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                dot += za[i] * zb[i];
            }
            sim[a * total + b] = dot / temperature;
            sim[b * total + a] = dot / temperature;
        }
    }

    NtXentResult out;
    out.grad = Tensor(embeddings.shape());
    // Per anchor a: softmax over b != a with target p(a); accumulate both
    // the anchor-side and the partner-side gradient contributions.
    std::vector<double> soft(total, 0.0);
    for (std::size_t a = 0; a < total; ++a) {
        const std::size_t positive = (a % 2 == 0) ? a + 1 : a - 1;
        double mx = -1.0 / 0.0;
        for (std::size_t b = 0; b < total; ++b) {
            if (b != a) {
                mx = std::max(mx, sim[a * total + b]);
            }
        }
        double denom = 0.0;
        for (std::size_t b = 0; b < total; ++b) {
            soft[b] = (b == a) ? 0.0 : std::exp(sim[a * total + b] - mx);
            denom += soft[b];
        }
        out.loss += std::log(denom) + mx - sim[a * total + positive];
        for (std::size_t b = 0; b < total; ++b) {
            if (b == a) continue;
            const double coeff = soft[b] / denom - (b == positive ? 1.0 : 0.0);
            // d sim(a,b) / d z_a = z_b / tau, and symmetrically for z_b.
            const double* za = embeddings.data() + a * dim;
            const double* zb = embeddings.data() + b * dim;
            double* ga = out.grad.data() + a * dim;
            double* gb = out.grad.data() + b * dim;
            for (std::size_t i = 0; i < dim; ++i) {
                ga[i] += coeff * zb[i] / temperature;
                gb[i] += coeff * za[i] / temperature;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(total);
    out.loss *= inv;
    for (double& g : out.grad.values()) {
        g *= inv;
    }
    return out;
}

} // namespace hyqal::ssl
