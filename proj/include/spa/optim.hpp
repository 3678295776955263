#pragma once

// Adam with decoupled weight decay, global-norm gradient clipping, and a
// reduce-on-plateau learning-rate schedule.

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "spa/tensor.hpp"

namespace spa {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled: applied to values, not gradients
};

// Moments are kept per parameter node and stepped lazily: a parameter whose
// gradient never materialised in an update keeps its step count, so sparse
// touch patterns stay bias-corrected per parameter.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
        if (cfg_.lr <= 0.0 || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 ||
            cfg_.beta2 >= 1.0 || cfg_.eps <= 0.0 || cfg_.weight_decay < 0.0)
            throw SpaError("optim", "config", "invalid adam hyperparameters");
    }

    double lr() const { return cfg_.lr; }
    void set_lr(double lr) {
        if (lr <= 0.0) throw SpaError("optim", "config", "lr must be positive");
        cfg_.lr = lr;
    }
    const AdamConfig& config() const { return cfg_; }

    // Applies one update to every parameter that has a gradient, then the
    // caller typically zeroes grads. Parameters without grads are untouched.
    void step(const std::vector<Tensor>& params) {
        for (const auto& p : params) {
            if (!p.requires_grad() || !p.has_grad()) continue;
            State& st = state_[p.id()];
            if (st.m.empty()) {
                st.m.assign(p.numel(), 0.0);
                st.v.assign(p.numel(), 0.0);
            }
            st.t += 1;
            const double bc1 = 1.0 - std::pow(cfg_.beta1, double(st.t));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, double(st.t));
            auto& vals = p.node()->values;
            const auto& g = p.grad();
            for (std::size_t i = 0; i < vals.size(); ++i) {
                if (!std::isfinite(g[i]))
                    throw SpaError("optim", "numeric", "non-finite gradient in adam step");
                st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i];
                st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                vals[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                      cfg_.weight_decay * vals[i]);
            }
        }
    }

    std::int64_t step_count(const Tensor& p) const {
        auto it = state_.find(p.id());
        return it == state_.end() ? 0 : it->second.t;
    }

private:
    struct State {
        std::vector<double> m, v;
        std::int64_t t = 0;
    };
    AdamConfig cfg_;
    std::unordered_map<std::int64_t, State> state_;
};

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm. The tiny slack keeps a rescaled set of gradients (whose norm is
// max_norm up to rounding) from being rescaled again, so clipping is
// idempotent bit for bit. Returns the pre-clip norm.
inline double clip_gradients(const std::vector<Tensor>& params, double max_norm) {
    if (max_norm <= 0.0) throw SpaError("optim", "config", "max_norm must be positive");
    double sq = 0.0;
    for (const auto& p : params) {
        if (!p.has_grad()) continue;
        for (double g : p.grad()) {
            if (!std::isfinite(g)) throw SpaError("optim", "numeric", "non-finite gradient in clip");
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm * (1.0 + 1e-12)) {
        const double scale = max_norm / norm;
        for (const auto& p : params) {
            if (!p.has_grad()) continue;
            for (double& g : p.node()->grad) g *= scale;
        }
    }
    return norm;
}

// Scales the learning rate by `factor` after `patience` consecutive
// observations without improvement, never dropping below min_lr. The counter
// resets on improvement and after each reduction.
class PlateauScheduler {
public:
    enum class Mode { Maximize, Minimize };

    PlateauScheduler(double factor, int patience, double min_lr, Mode mode = Mode::Maximize)
        : factor_(factor), patience_(patience), min_lr_(min_lr), mode_(mode) {
        if (factor <= 0.0 || factor >= 1.0 || patience < 1 || min_lr < 0.0)
            throw SpaError("optim", "config", "invalid plateau scheduler parameters");
        best_ = mode == Mode::Maximize ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
    }

    // Returns the (possibly reduced) learning rate to use after observing
    // `metric`; callers feed the result back into the optimiser.
    double observe(double metric, double current_lr) {
        if (!std::isfinite(metric))
            throw SpaError("optim", "numeric", "non-finite metric in plateau scheduler");
        const bool improved = mode_ == Mode::Maximize ? metric > best_ : metric < best_;
        if (improved) {
            best_ = metric;
            bad_ = 0;
            return current_lr;
        }
        ++bad_;
        if (bad_ >= patience_) {
            bad_ = 0;
            return std::max(current_lr * factor_, min_lr_);
        }
        return current_lr;
    }

    double best() const { return best_; }
    int bad_count() const { return bad_; }

private:
    double factor_;
    int patience_;
    double min_lr_;
    Mode mode_;
    double best_;
    int bad_ = 0;
};

}  // namespace spa
