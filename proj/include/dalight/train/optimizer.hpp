#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dalight/nn/layer.hpp"

namespace dalight::train {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double eps = 1e-8;
};

// Cosine annealing: eta_min + (eta_max - eta_min) * (1 + cos(pi t / T)) / 2,
// with the endpoints returned exactly.
inline double cosine_lr(int64_t t, int64_t t_max, double eta_max, double eta_min) {
    if (t_max < 1) throw ConfigError("cosine_lr: horizon must be >= 1");
    if (t < 0 || t > t_max) {
        throw ConfigError("cosine_lr: step " + std::to_string(t) + " outside [0," +
                          std::to_string(t_max) + "]");
    }
    if (t == 0) return eta_max;
    if (t == t_max) return eta_min;
    constexpr double pi = 3.14159265358979323846;
    return eta_min + (eta_max - eta_min) *
                         (1.0 + std::cos(pi * static_cast<double>(t) / static_cast<double>(t_max))) /
                         2.0;
}

// AdamW with bias-corrected moments and decoupled weight decay, applied to the
// pre-update parameter value. A non-finite gradient rejects the whole step
// before any parameter mutates.
class AdamW {
public:
    explicit AdamW(std::vector<nn::ParamEntry> params, AdamWConfig cfg = {})
        : cfg_(cfg) {
        for (auto& e : params) {
            if (!e.learnable) continue;
            params_.push_back(e);
            m_.emplace_back(e.tensor.shape());
            v_.emplace_back(e.tensor.shape());
        }
    }

    void step(double lr) {
        for (const auto& e : params_) {
            const double* g = e.tensor.grad();
            if (!g) continue;
            for (int64_t i = 0; i < e.tensor.size(); ++i) {
                if (!std::isfinite(g[i])) {
                    throw NumericError("adamw_step: non-finite gradient in " + e.name +
                                       "; step rejected");
                }
            }
        }
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            Tensor& theta = params_[pi].tensor;
            Tensor& m = m_[pi];
            Tensor& v = v_[pi];
            for (int64_t i = 0; i < theta.size(); ++i) {
                const double g = theta.grad_at(i);
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                const double update =
                    lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) + lr * cfg_.weight_decay * theta[i];
                theta[i] -= update;
            }
        }
    }

    void zero_grad() {
        for (auto& e : params_) e.tensor.zero_grad();
    }

    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t n) { step_count_ = n; }
    const AdamWConfig& config() const { return cfg_; }
    const std::vector<nn::ParamEntry>& params() const { return params_; }
    Tensor& first_moment(size_t i) { return m_[i]; }
    Tensor& second_moment(size_t i) { return v_[i]; }

private:
    AdamWConfig cfg_;
    std::vector<nn::ParamEntry> params_;
    std::vector<Tensor> m_, v_;
    int64_t step_count_ = 0;
};

}  // namespace dalight::train
