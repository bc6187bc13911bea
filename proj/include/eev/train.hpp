#pragma once

#include <vector>

#include "eev/tensor.hpp"

namespace eev {

// Plain Adam over an explicit parameter list. State is indexed by position,
// so the list must stay stable across steps.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<TensorPtr> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            params_[i]->requires_grad = true;
            m_[i].assign(params_[i]->data.size(), 0.0f);
            v_[i].assign(params_[i]->data.size(), 0.0f);
        }
    }

    void zero_grad() {
        for (auto& p : params_) {
            p->ensure_grad();
            p->zero_grad();
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            if (p.grad.empty()) continue;
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                const double g = p.grad[j];
                m_[i][j] = static_cast<float>(beta1_ * m_[i][j] + (1.0 - beta1_) * g);
                v_[i][j] = static_cast<float>(beta2_ * v_[i][j] + (1.0 - beta2_) * g * g);
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                p.data[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    double learning_rate() const { return lr_; }

private:
    std::vector<TensorPtr> params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
};

} // namespace eev
