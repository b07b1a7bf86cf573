#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hvq {

struct OptimConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
};

// Named parameter tensors plus their gradient and AdamW moment buffers.
// Iteration order is registration order, which makes seeded initialization
// and the optimizer fully deterministic.
class ParamStore {
public:
    int add(std::string name, std::vector<int> shape);

    Param& operator[](int handle) { return params_[handle]; }
    const Param& operator[](int handle) const { return params_[handle]; }

    int find(const std::string& name) const;
    size_t count() const { return params_.size(); }
    size_t scalar_count() const;

    void zero_grads();
    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    std::vector<Param>& entries() { return params_; }
    const std::vector<Param>& entries() const { return params_; }

private:
    std::vector<Param> params_;
    int64_t step_ = 0;

    friend void adamw_step(ParamStore&, const OptimConfig&);
};

// Decoupled weight decay (w -= lr*wd*w) followed by the bias-corrected Adam
// update. Moments start at zero on first use.
void adamw_step(ParamStore& params, const OptimConfig& config);

double global_grad_norm(const ParamStore& params);
void clip_global_grad_norm(ParamStore& params, double max_norm);

}  // namespace hvq
