#include "tdn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tdn::optim {

RAdam::RAdam(nn::ParamStore& params, double lr, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(params), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& [name, t] : params_.items) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void RAdam::step() {
    for (auto& [name, t] : params_.items) {
        if (t.grad().empty()) continue;
        for (double g : t.grad())
            if (!std::isfinite(g))
                throw std::runtime_error("RAdam: non-finite gradient in " + name +
                                         "; step rejected");
    }
    ++t_;
    const double b1t = std::pow(beta1_, static_cast<double>(t_));
    const double b2t = std::pow(beta2_, static_cast<double>(t_));
    const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
    const double rho_t = rho_inf - 2.0 * static_cast<double>(t_) * b2t / (1.0 - b2t);
    const bool rectified = rho_t > 4.0;
    double r_t = 0.0;
    if (rectified)
        r_t = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                        ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    for (size_t p = 0; p < params_.items.size(); ++p) {
        auto& t = params_.items[p].second;
        auto& val = t.val();
        auto& m = m_[p];
        auto& v = v_[p];
        const bool has_grad = !t.grad().empty();
        for (size_t i = 0; i < val.size(); ++i) {
            const double g = has_grad ? t.grad()[i] : 0.0;
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / (1.0 - b1t);
            if (wd_ != 0.0) val[i] *= 1.0 - lr_ * wd_;
            if (rectified) {
                const double vhat = std::sqrt(v[i] / (1.0 - b2t));
                val[i] -= lr_ * r_t * mhat / (vhat + eps_);
            } else {
                val[i] -= lr_ * mhat;
            }
        }
    }
}

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor, double min_lr,
                                   double threshold)
    : lr_(lr), factor_(factor), min_lr_(min_lr), threshold_(threshold), patience_(patience) {
    check(factor > 0.0 && factor < 1.0, "PlateauScheduler: factor must be in (0, 1)");
    check(patience >= 1, "PlateauScheduler: patience must be >= 1");
}

double PlateauScheduler::observe(double val_loss) {
    if (!has_best_ || val_loss < best_ * (1.0 - threshold_)) {
        best_ = val_loss;
        has_best_ = true;
        bad_ = 0;
    } else {
        ++bad_;
        if (bad_ >= patience_) {
            lr_ = std::max(min_lr_, lr_ * factor_);
            bad_ = 0;
        }
    }
    return lr_;
}

double plateau_schedule(const std::vector<double>& history, double lr0, int patience,
                        double factor, double min_lr) {
    PlateauScheduler sched(lr0, patience, factor, min_lr);
    double lr = lr0;
    for (double v : history) lr = sched.observe(v);
    return lr;
}

}  // namespace tdn::optim
