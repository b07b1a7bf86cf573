#include "hvq/optim.hpp"

#include <cmath>

#include "hvq/error.hpp"

namespace hvq {

void OptimConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("optim: learning_rate must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
        throw ConfigError("optim: betas must lie in [0,1)");
    if (!(epsilon > 0)) throw ConfigError("optim: epsilon must be > 0");
    if (weight_decay < 0) throw ConfigError("optim: weight_decay must be >= 0");
}

int ParamStore::add(std::string name, std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d < 1) throw ConfigError("param '" + name + "': non-positive dimension");
        n *= static_cast<size_t>(d);
    }
    Param p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    p.m.assign(n, 0.0);
    p.v.assign(n, 0.0);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
    for (size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return static_cast<int>(i);
    return -1;
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

void adamw_step(ParamStore& params, const OptimConfig& config) {
    config.validate();
    params.step_ += 1;
    const double t = static_cast<double>(params.step_);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (auto& p : params.params_) {
        for (size_t i = 0; i < p.value.size(); ++i) {
            double w = p.value[i];
            w -= config.learning_rate * config.weight_decay * w;
            const double g = p.grad[i];
            p.m[i] = config.beta1 * p.m[i] + (1.0 - config.beta1) * g;
            p.v[i] = config.beta2 * p.v[i] + (1.0 - config.beta2) * g * g;
            const double mhat = p.m[i] / bc1;
            const double vhat = p.v[i] / bc2;
            p.value[i] = w - config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
    }
}

double global_grad_norm(const ParamStore& params) {
    double s = 0.0;
    for (const auto& p : params.entries())
        for (double g : p.grad) s += g * g;
    return std::sqrt(s);
}

void clip_global_grad_norm(ParamStore& params, double max_norm) {
    if (max_norm <= 0) return;
    const double norm = global_grad_norm(params);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& p : params.entries())
        for (double& g : p.grad) g *= scale;
}

}  // namespace hvq
