#include "tdn/loss.hpp"

#include <cmath>

namespace tdn::loss {

using ag::Tensor;

ag::Tensor l2_rms(const Tensor& pred, const Tensor& target) {
    return ag::sqrt_t(ag::mse(pred, target));
}

double l_fc_value(const FourierSequence& pred, const FourierSequence& gt) {
    check(pred.length() == gt.length(), "l_fc: sequence lengths differ: " +
                                            std::to_string(pred.length()) + " vs " +
                                            std::to_string(gt.length()));
    double scale = log_amp_scale(gt);
    if (scale <= 0.0) scale = 1.0;
    double acc = 0.0;
    for (int i = 0; i < gt.length(); ++i) {
        const double ap = std::log1p(pred.amp[i]) / scale;
        const double a = std::log1p(gt.amp[i]) / scale;
        acc += l_amp_value(ap, a) * l_phase_value(pred.phase[i], gt.phase[i]);
    }
    return acc / gt.length();
}

ag::Tensor l_fc(const Tensor& amp_pred, const Tensor& phase_pred, const FourierSequence& gt) {
    const int length = gt.length();
    check(static_cast<int>(amp_pred.numel()) == length &&
              static_cast<int>(phase_pred.numel()) == length,
          "l_fc: prediction length does not match ground truth length " +
              std::to_string(length));
    double scale = log_amp_scale(gt);
    if (scale <= 0.0) scale = 1.0;
    Tensor a_gt = Tensor::from({length}, normalized_amplitudes(gt));
    // gt amplitudes are normalized by their own scale; map predictions into
    // the same space
    Tensor a_pred = ag::affine(ag::log1p_t(amp_pred), 1.0 / scale, 0.0);
    Tensor d = ag::sub(a_pred, a_gt);
    Tensor amp_term = ag::affine(ag::mul(d, d), 1.0, 1.0);
    Tensor ph_gt = Tensor::from({length}, gt.phase);
    Tensor ph_term = ag::affine(ag::cos_t(ag::sub(phase_pred, ph_gt)), -1.0, 2.0);
    return ag::mean_all(ag::mul(amp_term, ph_term));
}

ag::Tensor l_fsm(const Tensor& fc, const Tensor& spatial, const LossWeights& w) {
    return ag::add(ag::affine(fc, w.fc, 0.0), ag::affine(spatial, w.spatial, 0.0));
}

TotalLoss l_total(const net::TDNet::Forward& f, const Sinogram& s_gt, const Image& i_gt,
                  const LossWeights& w) {
    w.validate();
    TotalLoss out;
    Tensor s_gt_t = Tensor::from_mat(s_gt.data);
    Tensor i_gt_t = Tensor::from_mat(i_gt.data);
    out.srm = l2_rms(f.s_hat, s_gt_t);
    out.consis = l2_rms(f.i2, i_gt_t);
    out.spatial = l2_rms(f.i3, i_gt_t);
    const auto gt_seq = unroll_half_spectrum(dft2(i_gt.data), i_gt.h(), i_gt.w());
    out.fc = l_fc(f.fsm_amp, f.fsm_phase, gt_seq);
    out.fsm = l_fsm(out.fc, out.spatial, w);
    out.irm = l2_rms(f.i_hat, i_gt_t);
    out.total = ag::add(ag::add(ag::affine(out.srm, w.srm, 0.0), ag::affine(out.consis, w.consis, 0.0)),
                        ag::add(ag::affine(out.fsm, w.fsm, 0.0), ag::affine(out.irm, w.irm, 0.0)));
    return out;
}

}  // namespace tdn::loss
