#pragma once

#include <functional>

#include "hes/losses.hpp"

namespace hes {

struct DescentResult {
    Vector point;
    double value = 0.0;
    bool improved = false;       // strictly beat the initialization
    std::vector<double> trace;   // objective after each accepted step
};

// Projected first-order descent with a cosine step-size schedule and
// backtracking acceptance: a step is only taken if it lowers the objective,
// so the trace is non-increasing. Stops early once no halved step helps.
DescentResult projected_descent(const std::function<double(const Vector&)>& value_fn,
                                const std::function<double(const Vector&, Vector&)>& value_grad_fn,
                                Vector init, const Box& bounds, int steps, double step_size);

}  // namespace hes
