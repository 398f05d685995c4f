#pragma once

#include <functional>
#include <vector>

#include "hyqal/tensor.hpp"

namespace hyqal {

// Central finite differences of a scalar functional with respect to the
// entries of `param`. The functional must only depend on `param` through
// forward evaluation, so the numeric gradient stays independent of any
// analytic backward path it is used to check.
Tensor finite_difference_gradient(const std::function<double()>& f, Tensor& param,
                                  double step = 1e-5);

struct GradCompare {
    double max_abs_err = 0.0;
    double max_rel_err = 0.0; // |a-f| / max(|a|,|f|,1)
    std::size_t worst_index = 0;
};

GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric);

} // namespace hyqal
