#pragma once

// Central-difference gradient verification for scalar-valued tensor
// functions. Used by the test suites; not part of the training path.

#include <cmath>
#include <functional>
#include <vector>

#include "spa/tensor.hpp"

namespace spa {

struct GradCheckResult {
    double max_error = 0.0;   // max over elements of relative error
    bool ok = false;
    std::size_t worst_param = 0;
    std::size_t worst_elem = 0;
};

// f maps the current parameter values to a scalar loss tensor (building a
// fresh graph each call). Analytic gradients are taken from one backward
// pass and compared against (f(x+eps) - f(x-eps)) / (2 eps), with error
// |analytic - central| / max(1, |central|).
inline GradCheckResult grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                  std::vector<Tensor> params, double eps = 1e-5,
                                  double tol = 1e-6) {
    for (auto& p : params) p.zero_grad();
    Tensor loss = f(params);
    backward(loss);

    GradCheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        if (!p.requires_grad()) continue;
        std::vector<double> analytic =
            p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double orig = p.values()[i];
            p.mutable_values()[i] = orig + eps;
            const double hi = f(params).value();
            p.mutable_values()[i] = orig - eps;
            const double lo = f(params).value();
            p.mutable_values()[i] = orig;
            const double central = (hi - lo) / (2.0 * eps);
            const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
            if (err > res.max_error) {
                res.max_error = err;
                res.worst_param = pi;
                res.worst_elem = i;
            }
        }
    }
    res.ok = res.max_error <= tol;
    return res;
}

}  // namespace spa
