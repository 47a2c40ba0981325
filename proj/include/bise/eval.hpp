#pragma once

#include <utility>
#include <vector>

#include "bise/gain.hpp"
#include "bise/spectral.hpp"

namespace bise {

// Mean per-frame SNR in dB, frames of 256 samples, clamped to [-10, 35];
// frames whose clean energy sits below -40 dB of the peak frame are skipped.
double segmental_snr(const std::vector<double>& clean, const std::vector<double>& test,
                     int frame_len = 256);

double segmental_snr_improvement(const std::vector<double>& clean,
                                 const std::vector<double>& noisy,
                                 const std::vector<double>& enhanced, int frame_len = 256);

// Mean spectral distortion d(A, A_hat) over all bins and frames.
double distortion_metric(const std::vector<Spectrum>& clean,
                         const std::vector<Spectrum>& enhanced, Criterion criterion, int p = 0);

// P: N x N confusion matrix, P[i][j] = P(decide i | true j), columns sum to 1.
// Q: N x N quality matrix; priors: length N. Returns (per-class, overall).
std::pair<std::vector<double>, double> expected_quality(
    const std::vector<std::vector<double>>& P, const std::vector<std::vector<double>>& Q,
    const std::vector<double>& priors);

double suppression_advantage(double quality_pipeline, double quality_nosuppression);

// P_Q = 1 - mean |Q - Q_hat| over frames; labels are 0/1.
double quiet_detection_score(const std::vector<int>& actual, const std::vector<int>& estimated);

}  // namespace bise
