#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bise/tdoa.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bise;
using testutil::white_noise;

namespace {

// Shift right relative to left by `delay` samples (positive: right lags).
std::pair<std::vector<double>, std::vector<double>> shifted_pair(const std::vector<double>& src,
                                                                 int delay, int frame_len,
                                                                 int offset = 64) {
    std::vector<double> left(frame_len), right(frame_len);
    for (int i = 0; i < frame_len; ++i) {
        left[i] = src[offset + i];
        right[i] = src[offset + i - delay];
    }
    return {left, right};
}

}  // namespace

TEST_CASE("gcc_delay finds zero delay on identical frames") {
    const auto x = white_noise(512, 51);
    const DelayEstimate d = gcc_delay(x, x);
    CHECK(d.tau == 0.0);
    CHECK(d.confidence > 1.0);
}

TEST_CASE("gcc_delay recovers pure shifts with the documented sign") {
    const auto src = white_noise(2048, 52);
    for (const int delay : {5, -5, 1, -12, 24, -24}) {
        const auto [left, right] = shifted_pair(src, delay, 1024);
        CHECK(gcc_delay(left, right).tau == double(delay));
    }
}

TEST_CASE("gcc_delay is antisymmetric") {
    const auto src = white_noise(2048, 53);
    const auto [left, right] = shifted_pair(src, 7, 1024);
    CHECK(gcc_delay(left, right).tau == -gcc_delay(right, left).tau);
}

TEST_CASE("gcc_delay matches the time-domain correlation argmax under noise") {
    const auto src = white_noise(4096, 54);
    const int delay = 7, frame = 1024;
    auto [left, right] = shifted_pair(src, delay, frame);
    std::mt19937 gen(55);
    // 10 dB SNR: signal variance 1/3 for U(-1,1), so noise sigma^2 = var/10.
    std::normal_distribution<double> noise(0.0, std::sqrt(1.0 / 30.0));
    for (int i = 0; i < frame; ++i) {
        left[i] += noise(gen);
        right[i] += noise(gen);
    }
    const DelayEstimate d = gcc_delay(left, right, 24, GccWeighting::Plain);

    int best_lag = 0;
    double best = -1e300;
    for (int lag = -24; lag <= 24; ++lag) {
        double acc = 0.0;
        for (int i = 0; i < frame; ++i) {
            const int j = i + lag;
            if (j >= 0 && j < frame) acc += left[i] * right[j];
        }
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    CHECK(d.tau == double(best_lag));
}

TEST_CASE("gcc_delay handles degenerate input") {
    const std::vector<double> zeros(256, 0.0);
    const DelayEstimate d = gcc_delay(zeros, zeros);
    CHECK(d.tau == 0.0);
    CHECK(d.confidence == 0.0);
    CHECK_THROWS(gcc_delay(std::vector<double>(16, 1.0), std::vector<double>(16, 1.0), 24));
}

TEST_CASE("update_tracker returns the running median") {
    DelayTracker t;
    for (int i = 0; i < 20; ++i) CHECK(update_tracker(t, 4.0) == 4.0);

    DelayTracker t2;
    for (int i = 0; i < 19; ++i) update_tracker(t2, 4.0);
    CHECK(update_tracker(t2, -20.0) == 4.0);

    DelayTracker t3;
    std::mt19937 gen(56);
    std::uniform_real_distribution<double> dist(-24.0, 24.0);
    std::vector<double> window;
    for (int i = 0; i < 100; ++i) {
        const double v = dist(gen);
        window.push_back(v);
        if (window.size() > 20) window.erase(window.begin());
        std::vector<double> sorted = window;
        std::sort(sorted.begin(), sorted.end());
        const size_t n = sorted.size();
        const double want = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        const double got = update_tracker(t3, v);
        CHECK(got == doctest::Approx(want).epsilon(1e-15));
        CHECK(got >= sorted.front());
        CHECK(got <= sorted.back());
    }
}

TEST_CASE("quantize_delay bins uniformly and clamps") {
    CHECK(quantize_delay(-24.0, 7, 24.0) == 0);
    CHECK(quantize_delay(0.0, 7, 24.0) == 3);
    CHECK(quantize_delay(24.0, 7, 24.0) == 6);
    CHECK(quantize_delay(-1e9, 7, 24.0) == 0);
    CHECK(quantize_delay(1e9, 7, 24.0) == 6);

    std::mt19937 gen(57);
    std::uniform_real_distribution<double> dist(-30.0, 30.0);
    const double width = 48.0 / 7.0;
    for (int t = 0; t < 5000; ++t) {
        const double tau = dist(gen);
        int want = 0;
        while (want < 6 && tau >= -24.0 + (want + 1) * width) ++want;
        if (tau < -24.0) want = 0;
        CHECK(quantize_delay(tau, 7, 24.0) == want);
    }
}

TEST_CASE("quantize_delay mirrors under negation for odd L") {
    std::mt19937 gen(58);
    std::uniform_real_distribution<double> dist(-23.9, 23.9);
    const double width = 48.0 / 7.0;
    for (int t = 0; t < 2000; ++t) {
        double tau = dist(gen);
        // Keep away from bin edges, where negation lands on the adjacent cell.
        const double pos = std::fmod(tau + 24.0, width);
        if (pos < 1e-6 || width - pos < 1e-6) continue;
        CHECK(quantize_delay(-tau, 7, 24.0) == 6 - quantize_delay(tau, 7, 24.0));
    }
}

TEST_CASE("select_reference follows the delay sign") {
    CHECK(select_reference(3.0) == RefChannel::Input1);
    CHECK(select_reference(-3.0) == RefChannel::Input2);
    CHECK(select_reference(0.0) == RefChannel::Input1);
}
