#include "hyqal/fdcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hyqal {

Tensor finite_difference_gradient(const std::function<double()>& f, Tensor& param, double step) {
    Tensor grad(param.shape());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + step;
        const double up = f();
        param[i] = saved - step;
        const double down = f();
        param[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric) {
    if (!analytic.same_shape(numeric)) {
        throw ShapeError("compare_gradients: " + analytic.shape_str() + " vs " +
                         numeric.shape_str());
    }
    GradCompare out;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double abs_err = std::abs(analytic[i] - numeric[i]);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1.0});
        const double rel = abs_err / denom;
        if (abs_err > out.max_abs_err) {
            out.max_abs_err = abs_err;
        }
        if (rel > out.max_rel_err) {
            out.max_rel_err = rel;
            out.worst_index = i;
        }
    }
    return out;
}

} // namespace hyqal
