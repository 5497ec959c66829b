#pragma once

#include "tdn/net.hpp"

namespace tdn::loss {

// Eq-style weights; defaults all 1.
struct LossWeights {
    double srm = 1.0, consis = 1.0, fsm = 1.0, irm = 1.0;
    double fc = 1.0, spatial = 1.0;

    void validate() const {
        for (double v : {srm, consis, fsm, irm, fc, spatial})
            check(v >= 0.0 && std::isfinite(v), "LossWeights: weights must be finite and >= 0");
    }
};

// ||a - b||_2 in RMS form: sqrt(mean((a-b)^2)).
ag::Tensor l2_rms(const ag::Tensor& pred, const ag::Tensor& target);

// Per-coefficient formulas on already-normalized amplitudes.
inline double l_amp_value(double a_hat, double a) { return 1.0 + (a_hat - a) * (a_hat - a); }
inline double l_phase_value(double ph_hat, double ph) { return 2.0 - std::cos(ph_hat - ph); }

// Mean over i of l_amp * l_phase, amplitudes compared in the ground-truth
// sequence's normalized (log-compressed) space. Floor is 1 at exact
// prediction.
double l_fc_value(const FourierSequence& pred, const FourierSequence& gt);

// Differentiable l_fc on the FSM heads: amp_pred holds raw amplitudes,
// phase_pred raw phases; both [L].
ag::Tensor l_fc(const ag::Tensor& amp_pred, const ag::Tensor& phase_pred,
                const FourierSequence& gt);

struct TotalLoss {
    ag::Tensor total;
    ag::Tensor srm, consis, fsm, irm;  // the four Eq-1 terms (unweighted)
    ag::Tensor fc, spatial;            // FSM sub-terms (unweighted)
};

// lambda_fc * l_fc + lambda_spatial * l_spatial.
ag::Tensor l_fsm(const ag::Tensor& fc, const ag::Tensor& spatial, const LossWeights& w);

// The full weighted sum over SRM/consistency/FSM/IRM supervision.
TotalLoss l_total(const net::TDNet::Forward& f, const Sinogram& s_gt, const Image& i_gt,
                  const LossWeights& w);

}  // namespace tdn::loss
