#include "bise/snr.hpp"

#include <algorithm>

namespace bise {

void SnrState::reset(int bins) {
    frames_seen = 0;
    noise_psd.assign(bins, 1e-12);
    prev_amp.assign(bins, 0.0);
}

double posterior_snr(double r, double lambda) {
    return r * r / std::max(lambda, 1e-12);
}

double decision_directed_prior(double prev_amp, double r, double lambda, double alpha,
                               double zeta_min) {
    lambda = std::max(lambda, 1e-12);
    const double xi = r * r / lambda;
    return alpha * prev_amp * prev_amp / lambda + (1.0 - alpha) * std::max(xi - 1.0, zeta_min);
}

void update_noise_psd(SnrState& state, const Spectrum& spectrum, Background background) {
    const int bins = spectrum.bins();
    if (int(state.noise_psd.size()) != bins) state.reset(bins);
    if (state.frames_seen < state.init_frames) {
        const double n = double(state.frames_seen);
        for (int k = 0; k < bins; ++k) {
            const double p = spectrum.mag[k] * spectrum.mag[k];
            state.noise_psd[k] = (state.noise_psd[k] * n + p) / (n + 1.0);
        }
    } else if (background != Background::Voice) {
        for (int k = 0; k < bins; ++k) {
            const double p = spectrum.mag[k] * spectrum.mag[k];
            state.noise_psd[k] = state.noise_alpha * state.noise_psd[k] +
                                 (1.0 - state.noise_alpha) * p;
        }
    }
    state.frames_seen++;
}

namespace {

int quantize_db(double linear, double db_min, double db_max, int bins) {
    const double db = linear <= 0.0 ? db_min : 10.0 * std::log10(linear);
    const double width = (db_max - db_min) / bins;
    const int idx = int(std::floor((db - db_min) / width));
    return std::clamp(idx, 0, bins - 1);
}

}  // namespace

std::pair<int, int> quantize_snr(double zeta, double xi, const SnrAxes& axes) {
    return {quantize_db(zeta, axes.prior_db_min, axes.prior_db_max, axes.I),
            quantize_db(xi, axes.posterior_db_min, axes.posterior_db_max, axes.J)};
}

}  // namespace bise
