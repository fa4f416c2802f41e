#pragma once

#include "attnx/ops.hpp"

namespace attnx {

// Bias-corrected Adam over an explicit parameter group. GAN-conventional
// beta1 = 0.5.
template <class T>
class adam {
public:
    T alpha = T(2e-4);
    T beta1 = T(0.5);
    T beta2 = T(0.999);
    T eps = T(1e-8);

    adam() = default;
    explicit adam(T lr) : alpha(lr) {}

    void attach(const std::vector<tensor<T>>& params) {
        params_ = params;
        m_.clear();
        v_.clear();
        for (const auto& p : params_) {
            m_.emplace_back(p.numel(), T(0));
            v_.emplace_back(p.numel(), T(0));
        }
        step_count_ = 0;
    }

    std::size_t size() const { return params_.size(); }
    long step_count() const { return step_count_; }

    void step() {
        ++step_count_;
        const T bc1 = T(1) - std::pow(beta1, static_cast<T>(step_count_));
        const T bc2 = T(1) - std::pow(beta2, static_cast<T>(step_count_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.has_grad()) continue;  // untouched parameter: moments and value stay put
            if (p.numel() != m_[i].size())
                throw std::logic_error("adam moment shape mismatch");
            const auto& g = p.grad();
            auto& val = p.data();
            for (std::size_t j = 0; j < val.size(); ++j) {
                m_[i][j] = beta1 * m_[i][j] + (T(1) - beta1) * g[j];
                v_[i][j] = beta2 * v_[i][j] + (T(1) - beta2) * g[j] * g[j];
                const T mhat = m_[i][j] / bc1;
                const T vhat = v_[i][j] / bc2;
                val[j] -= alpha * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    // Checkpoint access.
    std::vector<std::vector<T>>& moments1() { return m_; }
    std::vector<std::vector<T>>& moments2() { return v_; }
    void set_step_count(long c) { step_count_ = c; }

private:
    std::vector<tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    long step_count_ = 0;
};

// Central-difference check of a scalar-valued differentiable function against
// its reverse-mode gradients. Returns the worst relative error over all
// coordinates of all points.
template <class T>
T grad_check(const std::function<tensor<T>(std::vector<tensor<T>>&)>& f,
             std::vector<tensor<T>> points, T eps) {
    for (auto& p : points) {
        p.set_requires_grad(true);
        p.zero_grad();  // points may carry gradients from an earlier backward pass
    }
    tensor<T> loss = f(points);
    if (!loss.finite()) throw std::runtime_error("grad_check: non-finite loss");
    backward(loss);

    T worst = T(0);
    for (auto& p : points) {
        std::vector<T> analytic = p.has_grad() ? p.grad() : std::vector<T>(p.numel(), T(0));
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const T orig = p.data()[j];
            p.data()[j] = orig + eps;
            T fp;
            {
                no_grad_guard ng;
                fp = f(points).item();
            }
            p.data()[j] = orig - eps;
            T fm;
            {
                no_grad_guard ng;
                fm = f(points).item();
            }
            p.data()[j] = orig;
            if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm)))
                throw std::runtime_error("grad_check: non-finite evaluation");
            const T numeric = (fp - fm) / (T(2) * eps);
            const T a = analytic[j];
            const T denom = std::max({std::abs(a), std::abs(numeric), T(1e-3)});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace attnx
