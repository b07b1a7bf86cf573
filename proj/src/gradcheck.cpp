#include "hvq/gradcheck.hpp"

#include <cmath>

#include "hvq/error.hpp"

namespace hvq {

double finite_diff_check(const LossFn& loss, ParamStore& params, double eps) {
    if (!(eps > 0)) throw ConfigError("finite_diff_check: eps must be > 0");

    params.zero_grads();
    const double base = loss(params, true);
    if (!std::isfinite(base)) throw DataError("finite_diff_check: non-finite loss");

    std::vector<std::vector<double>> analytic(params.count());
    for (size_t i = 0; i < params.count(); ++i) analytic[i] = params[static_cast<int>(i)].grad;

    double worst = 0.0;
    for (size_t pi = 0; pi < params.count(); ++pi) {
        Param& p = params[static_cast<int>(pi)];
        for (size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + eps;
            const double up = loss(params, false);
            p.value[i] = saved - eps;
            const double down = loss(params, false);
            p.value[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw DataError("finite_diff_check: non-finite loss during perturbation");
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace hvq
