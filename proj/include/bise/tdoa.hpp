#pragma once

#include <deque>
#include <vector>

namespace bise {

// tau is the delay of the right channel relative to the left; positive means the
// left channel leads.
struct DelayEstimate {
    double tau = 0.0;
    double confidence = 0.0;  // peak-to-mean ratio of the correlation
};

enum class GccWeighting { Phat, Plain };

DelayEstimate gcc_delay(const std::vector<double>& frame_left,
                        const std::vector<double>& frame_right, int max_lag = 24,
                        GccWeighting weighting = GccWeighting::Phat);

// Median filter over the last 20 raw estimates.
struct DelayTracker {
    int window = 20;
    std::deque<double> history;
};

double update_tracker(DelayTracker& tracker, double estimate);

// Uniform bins over [-tau_max, tau_max], clamped.
int quantize_delay(double tau, int L, double tau_max);

enum class RefChannel { Input1, Input2 };

// The earlier-arriving input is the reference: Input1 when tau >= 0.
RefChannel select_reference(double tau);

}  // namespace bise
