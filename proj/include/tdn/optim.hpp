#pragma once

#include <cstdint>
#include <vector>

#include "tdn/nn.hpp"

namespace tdn::optim {

// Rectified Adam with decoupled weight decay. While the variance rectification
// term is intractable (rho_t <= 4) the update falls back to bias-corrected
// momentum; afterwards the rectified adaptive step applies.
class RAdam {
public:
    RAdam(nn::ParamStore& params, double lr, double weight_decay, double beta1 = 0.9,
          double beta2 = 0.999, double eps = 1e-8);

    void zero_grad() { params_.zero_grad(); }
    // Applies one update from the accumulated gradients. Rejects non-finite
    // gradients with std::runtime_error before touching any state.
    void step();

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    int64_t t() const { return t_; }

    // checkpoint access
    std::vector<std::vector<double>>& moments1() { return m_; }
    std::vector<std::vector<double>>& moments2() { return v_; }
    void set_t(int64_t t) { t_ = t; }

private:
    nn::ParamStore& params_;
    double lr_, wd_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// ReduceLROnPlateau: multiplies lr by `factor` once the best seen loss has
// not improved (relative threshold 1e-4) for `patience` consecutive
// observations; never drops below `min_lr`.
class PlateauScheduler {
public:
    PlateauScheduler(double lr, int patience, double factor, double min_lr,
                     double threshold = 1e-4);

    double observe(double val_loss);  // returns the (possibly reduced) lr
    double lr() const { return lr_; }

    // checkpoint access
    double best() const { return best_; }
    int bad_epochs() const { return bad_; }
    void restore(double lr, double best, int bad) {
        lr_ = lr;
        best_ = best;
        bad_ = bad;
        has_best_ = true;
    }

private:
    double lr_, factor_, min_lr_, threshold_;
    int patience_, bad_ = 0;
    double best_ = 0.0;
    bool has_best_ = false;
};

// Stateless replay of the plateau rule over a validation-loss history.
double plateau_schedule(const std::vector<double>& history, double lr0, int patience,
                        double factor, double min_lr);

}  // namespace tdn::optim
