#include "hyqal/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hyqal/parallel.hpp"

namespace hyqal {

void warn(const std::string& message) {
    std::string escaped;
    escaped.reserve(message.size());
    for (char c : message) {
        if (c == '"' || c == '\\') escaped += '\\';
        escaped += c;
    }
    std::fprintf(stderr, "{\"event\":\"warning\",\"message\":\"%s\"}\n", escaped.c_str());
}

void Layer::zero_grads() {
    for (Tensor* g : grads()) {
        g->zero();
    }
}

void Layer::require_forwarded(std::string_view kind) const {
    if (!forwarded_) {
        throw ShapeError(std::string(kind) + ": backward called before forward (or mode changed)");
    }
}

namespace {

void require_rank(const Tensor& x, std::size_t rank, std::string_view kind) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(kind) + ": expected rank-" + std::to_string(rank) +
                         " input, got shape " + x.shape_str());
    }
}

} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in_features, std::size_t out_features, Rng* rng)
    : weight({out_features, in_features}),
      bias({out_features}),
      grad_weight({out_features, in_features}),
      grad_bias({out_features}),
      in_(in_features),
      out_(out_features) {
    if (rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in_features + out_features));
        for (double& w : weight.values()) {
            w = rng->uniform(-limit, limit);
        }
    }
}

Tensor Dense::forward(const Tensor& x) {
    require_rank(x, 2, kind());
    if (x.dim(1) != in_) {
        throw ShapeError("dense: weight expects input [*," + std::to_string(in_) + "], got " +
                         x.shape_str());
    }
    input_ = x;
    forwarded_ = true;
    const std::size_t n = x.dim(0);
    Tensor y({n, out_});
    parallel_for(n, [&](std::size_t r) {
        const double* xr = x.data() + r * in_;
        double* yr = y.data() + r * out_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double* wr = weight.data() + o * in_;
            double acc = bias[o];
            for (std::size_t i = 0; i < in_; ++i) {
                acc += wr[i] * xr[i];
            }
            yr[o] = acc;
        }
    });
    return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    if (grad_out.rank() != 2 || grad_out.dim(0) != input_.dim(0) || grad_out.dim(1) != out_) {
        throw ShapeError("dense: grad_out " + grad_out.shape_str() + " does not match output [" +
                         std::to_string(input_.dim(0)) + "," + std::to_string(out_) + "]");
    }
    const std::size_t n = input_.dim(0);
    Tensor grad_in({n, in_});
    parallel_for(n, [&](std::size_t r) {
        const double* gr = grad_out.data() + r * out_;
        double* gi = grad_in.data() + r * in_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = gr[o];
            const double* wr = weight.data() + o * in_;
            for (std::size_t i = 0; i < in_; ++i) {
                gi[i] += g * wr[i];
            }
        }
    });
    // Parameter grads: one output row per task, batch summed in fixed order.
    parallel_for(out_, [&](std::size_t o) {
        double* gw = grad_weight.data() + o * in_;
        double gb = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double g = grad_out.data()[r * out_ + o];
            const double* xr = input_.data() + r * in_;
            for (std::size_t i = 0; i < in_; ++i) {
                gw[i] += g * xr[i];
            }
            gb += g;
        }
        grad_bias[o] += gb;
    });
    return grad_in;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t padding, Rng* rng)
    : weight({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      grad_weight({out_channels, in_channels, kernel, kernel}),
      grad_bias({out_channels}),
      ic_(in_channels),
      oc_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding) {
    if (rng) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * kernel * kernel));
        for (double& w : weight.values()) {
            w = rng->normal(0.0, stddev);
        }
    }
}

Tensor Conv2d::forward(const Tensor& x) {
    require_rank(x, 4, kind());
    if (x.dim(1) != ic_) {
        throw ShapeError("conv2d: expected " + std::to_string(ic_) + " input channels, got " +
                         x.shape_str());
    }
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) {
        throw ShapeError("conv2d: input " + x.shape_str() + " smaller than kernel " +
                         std::to_string(k_));
    }
    const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
    input_ = x;
    forwarded_ = true;
    Tensor y({n, oc_, oh, ow});
    parallel_for(n, [&](std::size_t s) {
        const double* xs = x.data() + s * ic_ * h * w;
        double* ys = y.data() + s * oc_ * oh * ow;
        for (std::size_t oc = 0; oc < oc_; ++oc) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = bias[oc];
                    const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * stride_) -
                                               static_cast<std::ptrdiff_t>(pad_);
                    const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * stride_) -
                                               static_cast<std::ptrdiff_t>(pad_);
                    for (std::size_t ic = 0; ic < ic_; ++ic) {
                        const double* xc = xs + ic * h * w;
                        const double* wc = weight.data() + (oc * ic_ + ic) * k_ * k_;
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const std::ptrdiff_t iy = iy0 + static_cast<std::ptrdiff_t>(ky);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < k_; ++kx) {
                                const std::ptrdiff_t ix = ix0 + static_cast<std::ptrdiff_t>(kx);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                acc += wc[ky * k_ + kx] * xc[iy * w + ix];
                            }
                        }
                    }
                    ys[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
    });
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    const std::size_t n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
    if (grad_out.shape() != std::vector<std::size_t>{n, oc_, oh, ow}) {
        throw ShapeError("conv2d: grad_out " + grad_out.shape_str() + " does not match output " +
                         shape_to_string({n, oc_, oh, ow}));
    }
    Tensor grad_in({n, ic_, h, w});
    parallel_for(n, [&](std::size_t s) {
        const double* gs = grad_out.data() + s * oc_ * oh * ow;
        double* gi = grad_in.data() + s * ic_ * h * w;
        for (std::size_t oc = 0; oc < oc_; ++oc) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const double g = gs[(oc * oh + oy) * ow + ox];
                    if (g == 0.0) continue;
                    const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * stride_) -
                                               static_cast<std::ptrdiff_t>(pad_);
                    const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * stride_) -
                                               static_cast<std::ptrdiff_t>(pad_);
                    for (std::size_t ic = 0; ic < ic_; ++ic) {
                        double* gc = gi + ic * h * w;
                        const double* wc = weight.data() + (oc * ic_ + ic) * k_ * k_;
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const std::ptrdiff_t iy = iy0 + static_cast<std::ptrdiff_t>(ky);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < k_; ++kx) {
                                const std::ptrdiff_t ix = ix0 + static_cast<std::ptrdiff_t>(kx);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                gc[iy * w + ix] += g * wc[ky * k_ + kx];
                            }
                        }
                    }
                }
            }
        }
    });
    // One task per output channel; the batch loop inside keeps summation
    // order independent of thread count.
    parallel_for(oc_, [&](std::size_t oc) {
        double gb = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double* xs = input_.data() + s * ic_ * h * w;
            const double* gs = grad_out.data() + s * oc_ * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const double g = gs[(oc * oh + oy) * ow + ox];
                    gb += g;
                    if (g == 0.0) continue;
                    const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * stride_) -
                                               static_cast<std::ptrdiff_t>(pad_);
                    const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * stride_) -
                                               static_cast<std::ptrdiff_t>(pad_);
                    for (std::size_t ic = 0; ic < ic_; ++ic) {
                        const double* xc = xs + ic * h * w;
                        double* gw = grad_weight.data() + (oc * ic_ + ic) * k_ * k_;
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const std::ptrdiff_t iy = iy0 + static_cast<std::ptrdiff_t>(ky);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < k_; ++kx) {
                                const std::ptrdiff_t ix = ix0 + static_cast<std::ptrdiff_t>(kx);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                gw[ky * k_ + kx] += g * xc[iy * w + ix];
                            }
                        }
                    }
                }
            }
        }
        grad_bias[oc] += gb;
    });
    return grad_in;
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x) {
    input_ = x;
    forwarded_ = true;
    Tensor y = x;
    for (double& v : y.values()) {
        if (v < 0.0) v = 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    if (!grad_out.same_shape(input_)) {
        throw ShapeError("relu: grad_out " + grad_out.shape_str() + " vs input " +
                         input_.shape_str());
    }
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (input_[i] <= 0.0) grad_in[i] = 0.0;
    }
    return grad_in;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, double momentum, double eps)
    : gamma({channels}, 1.0),
      beta({channels}),
      grad_gamma({channels}),
      grad_beta({channels}),
      running_mean({channels}),
      running_var({channels}, 1.0),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {}

namespace {

// (channel count, per-channel element count, stride between consecutive
// elements of a channel slice) for [N,C] and [N,C,H,W].
struct BnLayout {
    std::size_t n, c, spatial;
};

BnLayout bn_layout(const Tensor& x, std::size_t channels) {
    if (x.rank() == 2) {
        if (x.dim(1) != channels) {
            throw ShapeError("batchnorm: expected " + std::to_string(channels) +
                             " features, got " + x.shape_str());
        }
        return {x.dim(0), channels, 1};
    }
    if (x.rank() == 4) {
        if (x.dim(1) != channels) {
            throw ShapeError("batchnorm: expected " + std::to_string(channels) +
                             " channels, got " + x.shape_str());
        }
        return {x.dim(0), channels, x.dim(2) * x.dim(3)};
    }
    throw ShapeError("batchnorm: expected rank-2 or rank-4 input, got " + x.shape_str());
}

} // namespace

Tensor BatchNorm::forward(const Tensor& x) {
    const BnLayout lay = bn_layout(x, channels_);
    input_ = x;
    forwarded_ = true;
    used_batch_stats_ = training_;
    const std::size_t m = lay.n * lay.spatial;
    Tensor y(x.shape());
    xhat_ = Tensor(x.shape());
    inv_std_.assign(channels_, 0.0);

    parallel_for(channels_, [&](std::size_t c) {
        double mean, var;
        if (training_) {
            double sum = 0.0;
            for (std::size_t s = 0; s < lay.n; ++s) {
                const double* base = x.data() + (s * channels_ + c) * lay.spatial;
                for (std::size_t i = 0; i < lay.spatial; ++i) {
                    sum += base[i];
                }
            }
            mean = sum / static_cast<double>(m);
            double sq = 0.0;
            for (std::size_t s = 0; s < lay.n; ++s) {
                const double* base = x.data() + (s * channels_ + c) * lay.spatial;
                for (std::size_t i = 0; i < lay.spatial; ++i) {
                    const double d = base[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / static_cast<double>(m);
            running_mean[c] = momentum_ * running_mean[c] + (1.0 - momentum_) * mean;
            running_var[c] = momentum_ * running_var[c] + (1.0 - momentum_) * var;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        const double g = gamma[c], b = beta[c];
        for (std::size_t s = 0; s < lay.n; ++s) {
            const double* base = x.data() + (s * channels_ + c) * lay.spatial;
            double* xh = xhat_.data() + (s * channels_ + c) * lay.spatial;
            double* yb = y.data() + (s * channels_ + c) * lay.spatial;
            for (std::size_t i = 0; i < lay.spatial; ++i) {
                const double v = (base[i] - mean) * inv;
                xh[i] = v;
                yb[i] = g * v + b;
            }
        }
    });
    return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    if (!grad_out.same_shape(input_)) {
        throw ShapeError("batchnorm: grad_out " + grad_out.shape_str() + " vs input " +
                         input_.shape_str());
    }
    const BnLayout lay = bn_layout(input_, channels_);
    const double m = static_cast<double>(lay.n * lay.spatial);
    Tensor grad_in(input_.shape());

    parallel_for(channels_, [&](std::size_t c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t s = 0; s < lay.n; ++s) {
            const double* g = grad_out.data() + (s * channels_ + c) * lay.spatial;
            const double* xh = xhat_.data() + (s * channels_ + c) * lay.spatial;
            for (std::size_t i = 0; i < lay.spatial; ++i) {
                sum_g += g[i];
                sum_gx += g[i] * xh[i];
            }
        }
        grad_gamma[c] += sum_gx;
        grad_beta[c] += sum_g;
        const double inv = inv_std_[c];
        const double scale = gamma[c] * inv;
        if (used_batch_stats_) {
            const double mean_g = sum_g / m;
            const double mean_gx = sum_gx / m;
            for (std::size_t s = 0; s < lay.n; ++s) {
                const double* g = grad_out.data() + (s * channels_ + c) * lay.spatial;
                const double* xh = xhat_.data() + (s * channels_ + c) * lay.spatial;
                double* gi = grad_in.data() + (s * channels_ + c) * lay.spatial;
                for (std::size_t i = 0; i < lay.spatial; ++i) {
                    gi[i] = scale * (g[i] - mean_g - xh[i] * mean_gx);
                }
            }
        } else {
            for (std::size_t s = 0; s < lay.n; ++s) {
                const double* g = grad_out.data() + (s * channels_ + c) * lay.spatial;
                double* gi = grad_in.data() + (s * channels_ + c) * lay.spatial;
                for (std::size_t i = 0; i < lay.spatial; ++i) {
                    gi[i] = scale * g[i];
                }
            }
        }
    });
    return grad_in;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate, Rng* rng, std::uint64_t seed)
    : rate_(rate), rng_(rng), own_rng_(seed) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ShapeError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
}

Tensor Dropout::forward(const Tensor& x) {
    forwarded_ = true;
    if (!training_ || rate_ == 0.0) {
        mask_ = Tensor(x.shape(), 1.0);
        return x;
    }
    Rng& rng = rng_ ? *rng_ : own_rng_;
    const double keep_scale = 1.0 / (1.0 - rate_);
    mask_ = Tensor(x.shape());
    Tensor y(x.shape());
    // Mask draws are sequential so the stream is schedule-independent.
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = rng.uniform() < rate_ ? 0.0 : keep_scale;
        mask_[i] = m;
        y[i] = x[i] * m;
    }
    return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    if (!grad_out.same_shape(mask_)) {
        throw ShapeError("dropout: grad_out " + grad_out.shape_str() + " vs input " +
                         mask_.shape_str());
    }
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        grad_in[i] *= mask_[i];
    }
    return grad_in;
}

// ---------------------------------------------------------------- L2Normalize

Tensor L2Normalize::forward(const Tensor& x) {
    if (x.rank() != 2) {
        throw ShapeError("l2normalize: expected rank-2 input, got " + x.shape_str());
    }
    forwarded_ = true;
    const std::size_t n = x.dim(0), d = x.dim(1);
    output_ = Tensor(x.shape());
    norms_.assign(n, 0.0);
    bool saw_zero = false;
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * d;
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            sq += xr[i] * xr[i];
        }
        const double norm = std::sqrt(sq);
        norms_[r] = norm;
        double* yr = output_.data() + r * d;
        if (norm == 0.0) {
            ++zero_rows_;
            saw_zero = true;
            for (std::size_t i = 0; i < d; ++i) {
                yr[i] = 0.0;
            }
        } else {
            for (std::size_t i = 0; i < d; ++i) {
                yr[i] = xr[i] / norm;
            }
        }
    }
    if (saw_zero) {
        warn("l2normalize: zero-norm row kept as zero vector");
    }
    return output_;
}

Tensor L2Normalize::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    if (!grad_out.same_shape(output_)) {
        throw ShapeError("l2normalize: grad_out " + grad_out.shape_str() + " vs input " +
                         output_.shape_str());
    }
    const std::size_t n = output_.dim(0), d = output_.dim(1);
    Tensor grad_in(output_.shape());
    for (std::size_t r = 0; r < n; ++r) {
        const double norm = norms_[r];
        double* gi = grad_in.data() + r * d;
        if (norm == 0.0) {
            continue; // zero row: gradient suppressed
        }
        const double* g = grad_out.data() + r * d;
        const double* y = output_.data() + r * d;
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            dot += g[i] * y[i];
        }
        for (std::size_t i = 0; i < d; ++i) {
            gi[i] = (g[i] - y[i] * dot) / norm;
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x) {
    if (x.rank() != 4) {
        throw ShapeError("globalavgpool: expected rank-4 input, got " + x.shape_str());
    }
    in_shape_ = x.shape();
    forwarded_ = true;
    const std::size_t n = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* base = x.data() + (s * c + ch) * spatial;
            double sum = 0.0;
            for (std::size_t i = 0; i < spatial; ++i) {
                sum += base[i];
            }
            y.at(s, ch) = sum / static_cast<double>(spatial);
        }
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    const std::size_t n = in_shape_[0], c = in_shape_[1], spatial = in_shape_[2] * in_shape_[3];
    if (grad_out.shape() != std::vector<std::size_t>{n, c}) {
        throw ShapeError("globalavgpool: grad_out " + grad_out.shape_str() +
                         " does not match output " + shape_to_string({n, c}));
    }
    Tensor grad_in(in_shape_);
    const double inv = 1.0 / static_cast<double>(spatial);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double g = grad_out.at(s, ch) * inv;
            double* base = grad_in.data() + (s * c + ch) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                base[i] = g;
            }
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------- MaxPool

MaxPool::MaxPool(std::size_t kernel, std::size_t stride) : k_(kernel), stride_(stride) {}

Tensor MaxPool::forward(const Tensor& x) {
    if (x.rank() != 4) {
        throw ShapeError("maxpool: expected rank-4 input, got " + x.shape_str());
    }
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h < k_ || w < k_) {
        throw ShapeError("maxpool: input " + x.shape_str() + " smaller than window " +
                         std::to_string(k_));
    }
    in_shape_ = x.shape();
    forwarded_ = true;
    const std::size_t oh = (h - k_) / stride_ + 1;
    const std::size_t ow = (w - k_) / stride_ + 1;
    Tensor y({n, c, oh, ow});
    argmax_.assign(n * c * oh * ow, 0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* base = x.data() + (s * c + ch) * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        for (std::size_t kx = 0; kx < k_; ++kx) {
                            const std::size_t idx = (oy * stride_ + ky) * w + ox * stride_ + kx;
                            if (base[idx] > best) {
                                best = base[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y.at(s, ch, oy, ox) = best;
                    argmax_[((s * c + ch) * oh + oy) * ow + ox] = best_idx;
                }
            }
        }
    }
    return y;
}

Tensor MaxPool::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const std::size_t oh = (h - k_) / stride_ + 1;
    const std::size_t ow = (w - k_) / stride_ + 1;
    if (grad_out.shape() != std::vector<std::size_t>{n, c, oh, ow}) {
        throw ShapeError("maxpool: grad_out " + grad_out.shape_str() + " does not match output " +
                         shape_to_string({n, c, oh, ow}));
    }
    Tensor grad_in(in_shape_);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double* base = grad_in.data() + (s * c + ch) * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    base[argmax_[((s * c + ch) * oh + oy) * ow + ox]] +=
                        grad_out.at(s, ch, oy, ox);
                }
            }
        }
    }
    return grad_in;
}

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x) {
    forwarded_ = true;
    Tensor cur = x;
    for (auto& layer : layers_) {
        cur = layer->forward(cur);
    }
    return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    require_forwarded(kind());
    Tensor cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        cur = (*it)->backward(cur);
    }
    return cur;
}

std::vector<Tensor*> Sequential::params() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        for (Tensor* p : layer->params()) {
            out.push_back(p);
        }
    }
    return out;
}

std::vector<Tensor*> Sequential::grads() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        for (Tensor* g : layer->grads()) {
            out.push_back(g);
        }
    }
    return out;
}

std::vector<std::string> Sequential::param_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (const std::string& n : layers_[i]->param_names()) {
            out.push_back(std::to_string(i) + "." + std::string(layers_[i]->kind()) + "." + n);
        }
    }
    return out;
}

std::vector<Tensor*> Sequential::state() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        for (Tensor* s : layer->state()) {
            out.push_back(s);
        }
    }
    return out;
}

std::vector<std::string> Sequential::state_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (const std::string& n : layers_[i]->state_names()) {
            out.push_back(std::to_string(i) + "." + std::string(layers_[i]->kind()) + "." + n);
        }
    }
    return out;
}

void Sequential::set_training_all(bool t) {
    set_training(t);
    for (auto& layer : layers_) {
        layer->set_training(t);
    }
}

// ---------------------------------------------------------------- softmax / CE

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax: expected rank-2 logits, got " + logits.shape_str());
    }
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    Tensor probs(logits.shape());
    for (std::size_t r = 0; r < n; ++r) {
        const double* lr = logits.data() + r * c;
        double* pr = probs.data() + r * c;
        double mx = lr[0];
        for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, lr[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            pr[j] = std::exp(lr[j] - mx);
            sum += pr[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            pr[j] /= sum;
        }
    }
    return probs;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad_logits) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
        throw ShapeError("cross_entropy: logits " + logits.shape_str() + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    const Tensor probs = softmax_rows(logits);
    if (grad_logits) {
        *grad_logits = probs;
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw DataError("cross_entropy: label " + std::to_string(y) + " out of range");
        }
        const double* lr = logits.data() + r * c;
        double mx = lr[0];
        for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, lr[j]);
        }
        double lse = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            lse += std::exp(lr[j] - mx);
        }
        loss += std::log(lse) + mx - lr[static_cast<std::size_t>(y)];
        if (grad_logits) {
            grad_logits->at(r, static_cast<std::size_t>(y)) -= 1.0;
        }
    }
    loss /= static_cast<double>(n);
    if (grad_logits) {
        for (double& g : grad_logits->values()) {
            g /= static_cast<double>(n);
        }
    }
    return loss;
}

} // namespace hyqal
