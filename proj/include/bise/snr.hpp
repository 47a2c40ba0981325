#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "bise/spectral.hpp"

namespace bise {

// Frame label emitted by the VAD (environment module); the noise tracker is gated on it.
enum class Background { Voice, Noise, Quiet };

// Gain-table axes: uniform dB bins over the prior/posterior SNR ranges.
struct SnrAxes {
    int I = 60, J = 70;
    double prior_db_min = -19.0, prior_db_max = 40.0;
    double posterior_db_min = -30.0, posterior_db_max = 40.0;
};

struct SnrState {
    double alpha = 0.98;                       // decision-directed weight
    double zeta_min = std::pow(10.0, -1.9);    // linear-domain prior floor (-19 dB)
    double noise_alpha = 0.95;                 // noise-update smoothing
    int init_frames = 6;
    long frames_seen = 0;
    std::vector<double> noise_psd, prev_amp;

    void reset(int bins);
    double noise_at(int bin) const { return std::max(noise_psd[bin], 1e-12); }
};

double posterior_snr(double r, double lambda);

// Decision-directed prior: alpha prev^2/lambda + (1 - alpha) max(xi - 1, zeta_min).
double decision_directed_prior(double prev_amp, double r, double lambda, double alpha,
                               double zeta_min);

void update_noise_psd(SnrState& state, const Spectrum& spectrum, Background background);

std::pair<int, int> quantize_snr(double zeta, double xi, const SnrAxes& axes);

}  // namespace bise
