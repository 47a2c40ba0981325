#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bise/eval.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bise;

namespace {

Spectrum mono_bin(double mag) {
    Spectrum s;
    s.fft_size = 2;
    s.mag = {mag};
    s.phase = {0.0};
    return s;
}

std::vector<Spectrum> random_frames(std::mt19937& gen, int frames, int bins) {
    std::uniform_real_distribution<double> u(0.01, 3.0);
    std::vector<Spectrum> out(frames);
    for (auto& s : out) {
        s.fft_size = 2 * (bins - 1);
        s.mag.resize(bins);
        s.phase.assign(bins, 0.0);
        for (double& m : s.mag) m = u(gen);
    }
    return out;
}

}  // namespace

TEST_CASE("segmental snr saturates at the clamp for a perfect match") {
    const std::vector<double> clean = testutil::sine(1024, 440.0, 22050, 0.3);
    CHECK(segmental_snr(clean, clean) == 35.0);
    CHECK(segmental_snr_improvement(clean, clean, clean) == 0.0);

    std::vector<double> wrecked(clean.size());
    for (size_t i = 0; i < clean.size(); ++i) wrecked[i] = clean[i] + ((i % 2) ? 50.0 : -50.0);
    CHECK(segmental_snr(clean, wrecked) == -10.0);
}

TEST_CASE("segmental snr rejects mismatched lengths and empty framings") {
    const std::vector<double> clean = testutil::sine(512, 300.0, 22050, 0.2);
    CHECK_THROWS_AS(segmental_snr(clean, std::vector<double>(511, 0.0)),
                    std::invalid_argument);
    const std::vector<double> stub(100, 0.1);
    CHECK(segmental_snr(stub, stub) == 0.0);
}

TEST_CASE("silent frames are excluded from the segmental average") {
    std::vector<double> clean(1024, 0.0);
    const std::vector<double> tone = testutil::sine(768, 500.0, 22050, 0.4);
    std::copy(tone.begin(), tone.end(), clean.begin() + 256);

    std::vector<double> test = clean;
    for (int i = 0; i < 256; ++i) test[size_t(i)] = 0.5;
    CHECK(segmental_snr(clean, test) == 35.0);
}

TEST_CASE("segmental snr matches a per-frame recomputation") {
    std::mt19937 gen(606);
    std::vector<double> clean = testutil::white_noise(4 * 256, 1, 0.5);
    std::vector<double> noise = testutil::white_noise(4 * 256, 2, 0.05);
    std::vector<double> test(clean.size());
    for (size_t i = 0; i < clean.size(); ++i) test[i] = clean[i] + noise[i];

    double peak = 0.0;
    for (int k = 0; k < 4; ++k) {
        double es = 0.0;
        for (int i = 0; i < 256; ++i) es += clean[size_t(k) * 256 + i] * clean[size_t(k) * 256 + i];
        peak = std::max(peak, es);
    }
    double total = 0.0;
    int counted = 0;
    for (int k = 0; k < 4; ++k) {
        double es = 0.0, en = 0.0;
        for (int i = 0; i < 256; ++i) {
            const double c = clean[size_t(k) * 256 + i];
            const double d = c - test[size_t(k) * 256 + i];
            es += c * c;
            en += d * d;
        }
        if (es <= peak * 1e-4) continue;
        total += std::clamp(en <= 0.0 ? 35.0 : 10.0 * std::log10(es / en), -10.0, 35.0);
        counted++;
    }
    CHECK(segmental_snr(clean, test) == doctest::Approx(total / counted).epsilon(1e-12));
}

TEST_CASE("spectral distortion of identical frames") {
    std::mt19937 gen(17);
    const std::vector<Spectrum> frames = random_frames(gen, 3, 8);
    CHECK(distortion_metric(frames, frames, Criterion::WE) == 0.0);
    CHECK(distortion_metric(frames, frames, Criterion::LE) == 0.0);
    CHECK(distortion_metric(frames, frames, Criterion::WC) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral distortion closed forms") {
    const std::vector<Spectrum> clean = {mono_bin(2.0)};
    const std::vector<Spectrum> half = {mono_bin(1.0)};
    CHECK(distortion_metric(clean, half, Criterion::WE, 0) == 1.0);
    CHECK(distortion_metric(clean, half, Criterion::WE, 1) == 2.0);
    CHECK(distortion_metric(clean, half, Criterion::LE) ==
          doctest::Approx(std::log(2.0) * std::log(2.0)).epsilon(1e-12));
    CHECK(distortion_metric(clean, half, Criterion::WC) == doctest::Approx(1.5).epsilon(1e-12));

    std::mt19937 gen(23);
    std::vector<Spectrum> c = random_frames(gen, 4, 6);
    std::vector<Spectrum> scaled = c;
    for (auto& s : scaled)
        for (double& m : s.mag) m *= 2.0;
    CHECK(distortion_metric(c, scaled, Criterion::LE) ==
          doctest::Approx(std::log(2.0) * std::log(2.0)).epsilon(1e-9));

    const std::vector<Spectrum> zero = {mono_bin(0.0)};
    const double d = distortion_metric(clean, zero, Criterion::LE);
    CHECK(std::isfinite(d));
    CHECK(d == doctest::Approx(std::pow(std::log(2e10), 2.0)).epsilon(1e-9));

    CHECK_THROWS_AS(distortion_metric(clean, {}, Criterion::WE), std::invalid_argument);
    std::vector<Spectrum> wide = {mono_bin(1.0)};
    wide[0].mag.push_back(1.0);
    CHECK_THROWS_AS(distortion_metric(clean, wide, Criterion::WE), std::invalid_argument);
}

TEST_CASE("spectral distortion matches a direct double loop") {
    std::mt19937 gen(303);
    const std::vector<Spectrum> clean = random_frames(gen, 5, 9);
    const std::vector<Spectrum> enh = random_frames(gen, 5, 9);
    for (Criterion crit : {Criterion::WE, Criterion::LE, Criterion::WC})
        for (int p : {0, 1}) {
            double total = 0.0;
            long count = 0;
            for (size_t k = 0; k < clean.size(); ++k)
                for (size_t b = 0; b < clean[k].mag.size(); ++b) {
                    const double a = std::max(clean[k].mag[b], 1e-10);
                    const double ahat = std::max(enh[k].mag[b], 1e-10);
                    const double w = std::pow(a, p);
                    if (crit == Criterion::WE)
                        total += w * (a - ahat) * (a - ahat);
                    else if (crit == Criterion::LE)
                        total += std::pow(std::log(a) - std::log(ahat), 2.0);
                    else
                        total += w * (a / ahat + ahat / a - 1.0);
                    count++;
                }
            CHECK(distortion_metric(clean, enh, crit, p) ==
                  doctest::Approx(total / double(count)).epsilon(1e-12));
        }
}

TEST_CASE("expected quality under a perfect classifier") {
    const std::vector<std::vector<double>> P = {
        {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    const std::vector<std::vector<double>> Q = {
        {2.5, 1.0, 0.5}, {1.5, 2.5, 0.0}, {0.5, 1.0, 2.5}};
    const auto [per_class, overall] = expected_quality(P, Q, {0.25, 0.5, 0.25});
    REQUIRE(per_class.size() == 3);
    for (double q : per_class) CHECK(q == 2.5);
    CHECK(overall == 2.5);
    CHECK(suppression_advantage(3.0, 2.5) == 0.5);
}

TEST_CASE("expected quality validates its inputs") {
    std::vector<std::vector<double>> P = {{0.5, 0.0}, {0.0, 1.0}};
    const std::vector<std::vector<double>> Q = {{1.0, 1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(expected_quality(P, Q, {0.5, 0.5}), std::invalid_argument);
    P[0][0] = 1.0;
    CHECK_NOTHROW(expected_quality(P, Q, {0.5, 0.5}));
    CHECK_THROWS_AS(expected_quality(P, {{1.0}}, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(expected_quality(P, Q, {1.0}), std::invalid_argument);
}

TEST_CASE("expected quality matches the double sum and ignores the classifier when flat") {
    std::mt19937 gen(1212);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 4;
    std::vector<std::vector<double>> P(n, std::vector<double>(n));
    for (int j = 0; j < n; ++j) {
        double col = 0.0;
        for (int i = 0; i < n; ++i) {
            P[size_t(i)][size_t(j)] = u(gen) + 0.05;
            col += P[size_t(i)][size_t(j)];
        }
        for (int i = 0; i < n; ++i) P[size_t(i)][size_t(j)] /= col;
    }
    std::vector<std::vector<double>> Q(n, std::vector<double>(n));
    for (auto& row : Q)
        for (double& q : row) q = 4.0 * u(gen);
    std::vector<double> priors(n);
    double psum = 0.0;
    for (double& p : priors) {
        p = u(gen) + 0.1;
        psum += p;
    }
    for (double& p : priors) p /= psum;

    const auto [per_class, overall] = expected_quality(P, Q, priors);
    double want_overall = 0.0;
    for (int j = 0; j < n; ++j) {
        double want = 0.0;
        for (int i = 0; i < n; ++i) want += P[size_t(i)][size_t(j)] * Q[size_t(i)][size_t(j)];
        CHECK(per_class[size_t(j)] == doctest::Approx(want).epsilon(1e-12));
        want_overall += priors[size_t(j)] * want;
    }
    CHECK(overall == doctest::Approx(want_overall).epsilon(1e-12));

    std::vector<std::vector<double>> flat(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) flat[size_t(i)][size_t(j)] = 0.5 + j;
    const auto [fa, fo] = expected_quality(P, flat, priors);
    std::vector<std::vector<double>> ident(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) ident[size_t(i)][size_t(i)] = 1.0;
    const auto [fb, fo2] = expected_quality(ident, flat, priors);
    for (int j = 0; j < n; ++j)
        CHECK(fa[size_t(j)] == doctest::Approx(fb[size_t(j)]).epsilon(1e-12));
    CHECK(fo == doctest::Approx(fo2).epsilon(1e-12));
}

TEST_CASE("quiet detection score counts label agreement") {
    CHECK(quiet_detection_score({1, 0, 1}, {1, 0, 1}) == 1.0);
    CHECK(quiet_detection_score({1, 1}, {0, 0}) == 0.0);
    CHECK(quiet_detection_score({1, 0, 1, 1}, {1, 1, 1, 0}) == 0.5);
    CHECK(quiet_detection_score({}, {}) == 1.0);
    CHECK_THROWS_AS(quiet_detection_score({1}, {1, 0}), std::invalid_argument);
}