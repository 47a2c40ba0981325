#include "bise/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bise {

namespace {

constexpr double kEvalFloor = 1e-10;

double frame_energy(const std::vector<double>& x, size_t start, int len) {
    double e = 0.0;
    for (int i = 0; i < len; ++i) e += x[start + i] * x[start + i];
    return e;
}

}  // namespace

double segmental_snr(const std::vector<double>& clean, const std::vector<double>& test,
                     int frame_len) {
    if (clean.size() != test.size()) throw std::invalid_argument("segmental_snr: length mismatch");
    const size_t frames = clean.size() / frame_len;
    if (frames == 0) return 0.0;

    double peak = 0.0;
    for (size_t k = 0; k < frames; ++k)
        peak = std::max(peak, frame_energy(clean, k * frame_len, frame_len));
    const double floor_energy = peak * 1e-4;

    double total = 0.0;
    long counted = 0;
    for (size_t k = 0; k < frames; ++k) {
        const double es = frame_energy(clean, k * frame_len, frame_len);
        if (es <= floor_energy) continue;
        double en = 0.0;
        for (int i = 0; i < frame_len; ++i) {
            const double d = clean[k * frame_len + i] - test[k * frame_len + i];
            en += d * d;
        }
        double snr = en <= 0.0 ? 35.0 : 10.0 * std::log10(es / en);
        snr = std::clamp(snr, -10.0, 35.0);
        total += snr;
        counted++;
    }
    return counted == 0 ? 0.0 : total / counted;
}

double segmental_snr_improvement(const std::vector<double>& clean,
                                 const std::vector<double>& noisy,
                                 const std::vector<double>& enhanced, int frame_len) {
    return segmental_snr(clean, enhanced, frame_len) - segmental_snr(clean, noisy, frame_len);
}

double distortion_metric(const std::vector<Spectrum>& clean,
                         const std::vector<Spectrum>& enhanced, Criterion criterion, int p) {
    if (clean.size() != enhanced.size())
        throw std::invalid_argument("distortion_metric: frame count mismatch");
    double total = 0.0;
    long count = 0;
    for (size_t k = 0; k < clean.size(); ++k) {
        if (clean[k].mag.size() != enhanced[k].mag.size())
            throw std::invalid_argument("distortion_metric: bin count mismatch");
        for (size_t b = 0; b < clean[k].mag.size(); ++b) {
            const double a = std::max(clean[k].mag[b], kEvalFloor);
            const double ahat = std::max(enhanced[k].mag[b], kEvalFloor);
            const double w = std::pow(a, p);
            double d;
            switch (criterion) {
                case Criterion::WE: d = w * (a - ahat) * (a - ahat); break;
                case Criterion::LE: {
                    const double l = std::log(a) - std::log(ahat);
                    d = l * l;
                    break;
                }
                case Criterion::WC: d = w * (a / ahat + ahat / a - 1.0); break;
                default: throw std::invalid_argument("distortion_metric: unknown criterion");
            }
            total += d;
            count++;
        }
    }
    return count == 0 ? 0.0 : total / count;
}

std::pair<std::vector<double>, double> expected_quality(
    const std::vector<std::vector<double>>& P, const std::vector<std::vector<double>>& Q,
    const std::vector<double>& priors) {
    const size_t n = P.size();
    if (Q.size() != n || priors.size() != n)
        throw std::invalid_argument("expected_quality: dimension mismatch");
    for (size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (P[i].size() != n || Q[i].size() != n)
                throw std::invalid_argument("expected_quality: dimension mismatch");
            col += P[i][j];
        }
        if (std::abs(col - 1.0) > 1e-9)
            throw std::invalid_argument("expected_quality: confusion columns must sum to 1");
    }
    std::vector<double> per_class(n, 0.0);
    double overall = 0.0;
    for (size_t j = 0; j < n; ++j) {
        for (size_t i = 0; i < n; ++i) per_class[j] += P[i][j] * Q[i][j];
        overall += priors[j] * per_class[j];
    }
    return {std::move(per_class), overall};
}

double suppression_advantage(double quality_pipeline, double quality_nosuppression) {
    return quality_pipeline - quality_nosuppression;
}

double quiet_detection_score(const std::vector<int>& actual, const std::vector<int>& estimated) {
    if (actual.size() != estimated.size())
        throw std::invalid_argument("quiet_detection_score: length mismatch");
    if (actual.empty()) return 1.0;
    double total = 0.0;
    for (size_t m = 0; m < actual.size(); ++m) total += std::abs(actual[m] - estimated[m]);
    return 1.0 - total / double(actual.size());
}

}  // namespace bise
