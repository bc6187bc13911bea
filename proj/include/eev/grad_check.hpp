#pragma once

#include <functional>

#include "eev/ops.hpp"

namespace eev {

// Central finite-difference check of a scalar-valued closure. Returns the
// max over elements of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8). Meant to run with T = double; float rounding swamps the difference
// quotient otherwise.
template <typename T>
double grad_check(const std::function<TensorPtrT<T>(GradTape<T>&, const TensorPtrT<T>&)>& closure,
                  const TensorPtrT<T>& point, T epsilon) {
    auto x = make_tensor<T>(point->shape, point->data);
    x->requires_grad = true;
    GradTape<T> tape;
    auto loss = closure(tape, x);
    if (!loss->is_scalar())
        throw ShapeError("grad_check: closure must return a scalar, got " + loss->shape.str());
    tape.backward(loss);
    const std::vector<T> analytic = x->grad;

    auto eval = [&](const std::vector<T>& values) {
        auto p = make_tensor<T>(point->shape, values);
        GradTape<T> t;
        return static_cast<double>(closure(t, p)->scalar());
    };

    double max_err = 0.0;
    std::vector<T> probe = point->data;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const T saved = probe[i];
        probe[i] = saved + epsilon;
        const double fp = eval(probe);
        probe[i] = saved - epsilon;
        const double fm = eval(probe);
        probe[i] = saved;
        const double numeric = (fp - fm) / (2.0 * static_cast<double>(epsilon));
        const double a = static_cast<double>(analytic[i]);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
    return max_err;
}

} // namespace eev
