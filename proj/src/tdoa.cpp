#include "bise/tdoa.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "bise/spectral.hpp"

namespace bise {

DelayEstimate gcc_delay(const std::vector<double>& frame_left,
                        const std::vector<double>& frame_right, int max_lag,
                        GccWeighting weighting) {
    const size_t n = frame_left.size();
    if (frame_right.size() != n) throw std::invalid_argument("gcc_delay: length mismatch");
    if (n < size_t(2 * max_lag)) throw std::invalid_argument("gcc_delay: frames too short");

    double energy = 0.0;
    for (size_t i = 0; i < n; ++i)
        energy += frame_left[i] * frame_left[i] + frame_right[i] * frame_right[i];
    if (energy <= 0.0) return {0.0, 0.0};

    size_t m = 1;
    while (m < n + size_t(max_lag) + 1) m <<= 1;
    std::vector<std::complex<double>> a(m), b(m);
    for (size_t i = 0; i < n; ++i) {
        a[i] = frame_left[i];
        b[i] = frame_right[i];
    }
    fft(a, false);
    fft(b, false);
    for (size_t k = 0; k < m; ++k) {
        std::complex<double> c = std::conj(a[k]) * b[k];
        if (weighting == GccWeighting::Phat) {
            const double mag = std::abs(c);
            c = mag < 1e-12 ? std::complex<double>(0.0) : c / mag;
        }
        a[k] = c;
    }
    fft(a, true);

    auto corr_at = [&](int lag) {
        return a[(lag >= 0 ? size_t(lag) : m + lag)].real();
    };
    // Scan outward from zero so ties resolve toward the smaller |tau|.
    int best_lag = 0;
    double best = corr_at(0);
    for (int d = 1; d <= max_lag; ++d) {
        for (int lag : {d, -d}) {
            const double c = corr_at(lag);
            if (c > best) {
                best = c;
                best_lag = lag;
            }
        }
    }
    double mean_abs = 0.0;
    for (int lag = -max_lag; lag <= max_lag; ++lag) mean_abs += std::abs(corr_at(lag));
    mean_abs /= double(2 * max_lag + 1);
    const double confidence = mean_abs < 1e-12 ? 0.0 : best / mean_abs;
    return {double(best_lag), confidence};
}

double update_tracker(DelayTracker& tracker, double estimate) {
    tracker.history.push_back(estimate);
    while (int(tracker.history.size()) > tracker.window) tracker.history.pop_front();
    std::vector<double> sorted(tracker.history.begin(), tracker.history.end());
    std::sort(sorted.begin(), sorted.end());
    const size_t k = sorted.size();
    return k % 2 == 1 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
}

int quantize_delay(double tau, int L, double tau_max) {
    if (L < 1) throw std::invalid_argument("quantize_delay: L must be >= 1");
    const double width = 2.0 * tau_max / L;
    const int l = int(std::floor((tau + tau_max) / width));
    return std::clamp(l, 0, L - 1);
}

RefChannel select_reference(double tau) {
    return tau >= 0.0 ? RefChannel::Input1 : RefChannel::Input2;
}

}  // namespace bise
