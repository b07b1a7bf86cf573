#pragma once

#include <functional>

#include "hvq/optim.hpp"

namespace hvq {

// Scalar loss over a ParamStore. When `with_grad` is set the callee must also
// write analytic gradients into the store's grad buffers; otherwise it only
// returns the value. The map must be deterministic.
using LossFn = std::function<double(ParamStore&, bool with_grad)>;

// Central-difference check of every scalar parameter. Returns
// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-12);
// 0 for a parameter-free store. Throws DataError if the loss is non-finite.
double finite_diff_check(const LossFn& loss, ParamStore& params, double eps = 1e-5);

}  // namespace hvq
