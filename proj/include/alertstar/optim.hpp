#pragma once
// Adam with bias correction plus global-norm gradient clipping.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "alertstar/diff.hpp"

namespace alertstar {

// Scales every gradient by max_norm/g when the global L2 norm g exceeds
// max_norm. Returns the norm before clipping.
inline double clip_global_norm(std::vector<Array>& params, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& p : params)
            for (auto& g : p.grad_ref()) g *= s;
    }
    return norm;
}

class Adam {
public:
    explicit Adam(double lr = 5e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // In-place update of params from their accumulated grads. Moment buffers
    // are created on first use and must keep their shapes thereafter.
    void step(std::vector<Array>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.size(), 0.0);
                v_.emplace_back(p.size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter count changed between steps");
        for (size_t i = 0; i < params.size(); ++i)
            if (static_cast<int64_t>(m_[i].size()) != params[i].size())
                throw std::invalid_argument("adam: parameter shape changed between steps");

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& val = params[i].mutable_values();
            const auto& g = params[i].grad();
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < val.size(); ++j) {
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    int64_t step_count() const { return t_; }
    double lr() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace alertstar
