#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "bise/spectral.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bise;
using testutil::white_noise;

namespace {

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (size_t m = 0; m < n; ++m)
            acc += x[m] * std::polar(1.0, -2.0 * M_PI * double(k) * double(m) / double(n));
        out[k] = acc;
    }
    return out;
}

Spectrum single_bin(int fft_size, int bin, double mag, double phase) {
    Spectrum s;
    s.fft_size = fft_size;
    s.mag.assign(fft_size / 2 + 1, 0.0);
    s.phase.assign(fft_size / 2 + 1, 0.0);
    s.mag[bin] = mag;
    s.phase[bin] = phase;
    return s;
}

}  // namespace

TEST_CASE("analyze matches a naive DFT") {
    const auto x = white_noise(256, 21);
    const std::vector<double> rect(256, 1.0);
    const Spectrum s = analyze(x, rect);
    REQUIRE(s.bins() == 129);
    const auto ref = naive_dft(x);
    for (int k = 0; k < s.bins(); ++k) {
        const std::complex<double> got = std::polar(s.mag[k], s.phase[k]);
        CHECK(std::abs(got - ref[k]) < 1e-9);
    }
}

TEST_CASE("analyze of a bin-aligned cosine concentrates at one bin") {
    const int n = 256, k0 = 16;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = std::cos(2.0 * M_PI * k0 * i / n);
    const Spectrum s = analyze(x, std::vector<double>(n, 1.0));
    CHECK(s.mag[k0] == doctest::Approx(n / 2.0).epsilon(1e-10));
    for (int k = 0; k < s.bins(); ++k)
        if (k != k0) CHECK(s.mag[k] < 1e-9);

    const Spectrum z = analyze(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0));
    for (double m : z.mag) CHECK(m == 0.0);
}

TEST_CASE("analyze then synthesize returns the windowed frame") {
    const auto x = white_noise(256, 23);
    std::vector<double> w(256);
    for (int i = 0; i < 256; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / 256);
    const auto back = synthesize(analyze(x, w));
    REQUIRE(back.size() == 256);
    for (int i = 0; i < 256; ++i) CHECK(back[i] == doctest::Approx(x[i] * w[i]).epsilon(1e-9));
}

TEST_CASE("synthesize of a single bin is a pure sinusoid") {
    const int n = 256, k0 = 10;
    const double amp = 3.0, phase = 0.4;
    const auto frame = synthesize(single_bin(n, k0, amp, phase));
    for (int i = 0; i < n; ++i) {
        const double want = 2.0 * amp / n * std::cos(2.0 * M_PI * k0 * i / n + phase);
        CHECK(frame[i] == doctest::Approx(want).epsilon(1e-10));
    }
    const auto zero = synthesize(single_bin(n, 0, 0.0, 0.0));
    for (double v : zero) CHECK(v == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("bark_bands partitions the one-sided bins") {
    const BandPartition p = bark_bands(22050, 256);
    CHECK(p.bands() == 22);
    REQUIRE(p.edges.front() == 0);
    REQUIRE(p.edges.back() == 129);
    for (size_t e = 1; e < p.edges.size(); ++e) CHECK(p.edges[e] > p.edges[e - 1]);
    for (int b = 0; b < p.bands(); ++b)
        for (int k = p.edges[b]; k < p.edges[b + 1]; ++k) CHECK(p.band_of(k) == b);

    const BandPartition low = bark_bands(8000, 256);
    CHECK(low.edges.front() == 0);
    CHECK(low.edges.back() == 129);
    CHECK(low.bands() >= 1);
}

TEST_CASE("compute_ipd of identical spectra is zero") {
    const auto x = white_noise(256, 24);
    const Spectrum s = analyze(x, std::vector<double>(256, 1.0));
    const BandPartition p = bark_bands(22050, 256);
    for (double v : compute_ipd(s, s, p)) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("compute_ipd of a single occupied bin returns its phase difference") {
    const BandPartition p = bark_bands(22050, 256);
    const Spectrum l = single_bin(256, 5, 2.0, 0.3);
    const Spectrum r = single_bin(256, 5, 3.0, 0.3 - M_PI / 4.0);
    const auto ipd = compute_ipd(l, r, p);
    CHECK(ipd[p.band_of(5)] == doctest::Approx(M_PI / 4.0).epsilon(1e-12));
    for (int b = 0; b < p.bands(); ++b)
        if (b != p.band_of(5)) CHECK(ipd[b] == 0.0);
}

TEST_CASE("compute_ipd matches a brute-force complex sum and is antisymmetric") {
    const BandPartition p = bark_bands(22050, 256);
    std::mt19937 gen(25);
    std::uniform_real_distribution<double> mag(0.1, 2.0), ph(-3.0, 3.0);
    Spectrum l, r;
    l.fft_size = r.fft_size = 256;
    for (int k = 0; k < 129; ++k) {
        l.mag.push_back(mag(gen));
        l.phase.push_back(ph(gen));
        r.mag.push_back(mag(gen));
        r.phase.push_back(ph(gen));
    }
    const auto ipd = compute_ipd(l, r, p);
    for (int b = 0; b < p.bands(); ++b) {
        std::complex<double> acc = 0.0;
        for (int k = p.edges[b]; k < p.edges[b + 1]; ++k)
            acc += std::polar(l.mag[k] * r.mag[k], l.phase[k] - r.phase[k]);
        CHECK(ipd[b] == doctest::Approx(std::arg(acc)).epsilon(1e-12));
    }

    const auto swapped = compute_ipd(r, l, p);
    for (int b = 0; b < p.bands(); ++b)
        CHECK(swapped[b] == doctest::Approx(-ipd[b]).epsilon(1e-12));

    Spectrum ls = l, rs = r;
    for (auto& m : ls.mag) m *= 3.7;
    for (auto& m : rs.mag) m *= 3.7;
    const auto scaled = compute_ipd(ls, rs, p);
    for (int b = 0; b < p.bands(); ++b) CHECK(scaled[b] == doctest::Approx(ipd[b]).epsilon(1e-12));
}

TEST_CASE("quantize_ipd bins uniformly over the circle") {
    CHECK(quantize_ipd(-M_PI, 13) == 0);
    CHECK(quantize_ipd(0.0, 13) == 6);
    CHECK(quantize_ipd(M_PI, 13) == 12);

    std::mt19937 gen(26);
    std::uniform_real_distribution<double> dist(-4.0, 4.0);
    const int q_cells = 13;
    const double width = 2.0 * M_PI / q_cells;
    int prev = 0;
    for (int t = 0; t < 10000; ++t) {
        const double v = dist(gen);
        int want = 0;
        while (want < q_cells - 1 && v >= -M_PI + (want + 1) * width) ++want;
        if (v < -M_PI) want = 0;
        CHECK(quantize_ipd(v, q_cells) == want);
        (void)prev;
    }
    for (double v = -M_PI; v <= M_PI; v += 0.01) {
        const int q = quantize_ipd(v, q_cells);
        CHECK(q >= prev);
        prev = q;
    }
}

TEST_CASE("subband_split separates low and high content") {
    const std::vector<double> dc(64, 1.0);
    auto [low_dc, high_dc] = subband_split(dc);
    REQUIRE(low_dc.size() == 32);
    double el = 0.0, eh = 0.0;
    for (double v : low_dc) el += v * v;
    for (double v : high_dc) eh += v * v;
    CHECK(eh < 1e-6 * (el + eh));

    std::vector<double> nyq(64);
    for (int i = 0; i < 64; ++i) nyq[i] = i % 2 ? -1.0 : 1.0;
    auto [low_ny, high_ny] = subband_split(nyq);
    el = eh = 0.0;
    for (double v : low_ny) el += v * v;
    for (double v : high_ny) eh += v * v;
    CHECK(el < 1e-6 * (el + eh));

    CHECK_THROWS(subband_split(std::vector<double>(63, 1.0)));
}

TEST_CASE("subband_split preserves energy") {
    const auto x = white_noise(256, 27);
    auto [low, high] = subband_split(x);
    double ein = 0.0, eout = 0.0;
    for (double v : x) ein += v * v;
    for (double v : low) eout += v * v;
    for (double v : high) eout += v * v;
    CHECK(eout == doctest::Approx(ein).epsilon(1e-9));
}
