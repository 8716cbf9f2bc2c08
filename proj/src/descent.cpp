#include "hes/descent.hpp"

#include <cmath>

namespace hes {

DescentResult projected_descent(const std::function<double(const Vector&)>& value_fn,
                                const std::function<double(const Vector&, Vector&)>& value_grad_fn,
                                Vector init, const Box& bounds, int steps, double step_size) {
    DescentResult out;
    out.point = bounds.clamp(std::move(init));
    Vector grad(out.point.size());
    double cur = value_grad_fn(out.point, grad);
    const double init_value = cur;
    out.trace.reserve(steps);

    for (int t = 0; t < steps; ++t) {
        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax == 0.0) break;

        const double lr = step_size * 0.5 * (1.0 + std::cos(M_PI * t / std::max(1, steps)));
        double s = lr;
        bool accepted = false;
        for (int h = 0; h < 15; ++h) {
            Vector cand(out.point.size());
            for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = out.point[i] - s * grad[i];
            cand = bounds.clamp(std::move(cand));
            const double v = value_fn(cand);
            if (v < cur) {
                out.point = std::move(cand);
                cur = v;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if (!accepted) break;
        out.trace.push_back(cur);
        if (t + 1 < steps) cur = value_grad_fn(out.point, grad);
    }

    out.value = cur;
    out.improved = cur < init_value;
    return out;
}

}  // namespace hes
