#include "bise/spectral.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace bise {

namespace {

bool is_pow2(size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// Bit-reversal permutation for size n, cached per size.
const std::vector<uint32_t>& bitrev_table(size_t n) {
    static std::mutex mu;
    static std::map<size_t, std::unique_ptr<std::vector<uint32_t>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        auto table = std::make_unique<std::vector<uint32_t>>(n, 0u);
        for (size_t i = 1, j = 0; i < n; ++i) {
            size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            (*table)[i] = uint32_t(j);
        }
        slot = std::move(table);
    }
    return *slot;
}

// e^(+-2 pi i k / n) for k < n/2, cached per size and direction.
const std::vector<std::complex<double>>& root_table(size_t n, bool inverse) {
    static std::mutex mu;
    static std::map<std::pair<size_t, bool>,
                    std::unique_ptr<std::vector<std::complex<double>>>>
        cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{n, inverse}];
    if (!slot) {
        auto table = std::make_unique<std::vector<std::complex<double>>>(n / 2);
        for (size_t k = 0; k < n / 2; ++k) {
            const double ang =
                (inverse ? 2.0 : -2.0) * std::numbers::pi * double(k) / double(n);
            (*table)[k] = {std::cos(ang), std::sin(ang)};
        }
        slot = std::move(table);
    }
    return *slot;
}

// Zwicker critical-band edges in Hz.
constexpr double kBarkEdges[] = {100,  200,  300,  400,  510,  630,  770,   920,
                                 1080, 1270, 1480, 1720, 2000, 2320, 2700,  3150,
                                 3700, 4400, 5300, 6400, 7700, 9500, 12000, 15500};

}  // namespace

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
    const std::vector<uint32_t>& rev = bitrev_table(n);
    for (size_t i = 1; i < n; ++i) {
        const size_t j = rev[i];
        if (i < j) std::swap(a[i], a[j]);
    }
    const std::vector<std::complex<double>>& roots = root_table(n, inverse);
    for (size_t len = 2; len <= n; len <<= 1) {
        const size_t stride = n / len;
        for (size_t i = 0; i < n; i += len) {
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * roots[k * stride];
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

Spectrum analyze(const std::vector<double>& frame, const std::vector<double>& window) {
    if (frame.size() != window.size())
        throw std::invalid_argument("analyze: frame/window size mismatch");
    const size_t n = frame.size();
    std::vector<std::complex<double>> a(n);
    for (size_t i = 0; i < n; ++i) a[i] = frame[i] * window[i];
    fft(a, false);

    Spectrum s;
    s.fft_size = int(n);
    s.mag.resize(n / 2 + 1);
    s.phase.resize(n / 2 + 1);
    for (size_t k = 0; k <= n / 2; ++k) {
        s.mag[k] = std::abs(a[k]);
        s.phase[k] = std::arg(a[k]);
    }
    return s;
}

std::vector<double> synthesize(const Spectrum& spec) {
    const size_t n = spec.fft_size;
    if (spec.mag.size() != n / 2 + 1) throw std::invalid_argument("synthesize: bin count mismatch");
    if (n < 4) {
        std::vector<std::complex<double>> a(n);
        for (size_t k = 0; k <= n / 2; ++k) {
            a[k] = std::polar(spec.mag[k], spec.phase[k]);
            if (k > 0 && k < n / 2) a[n - k] = std::conj(a[k]);
        }
        fft(a, true);
        std::vector<double> frame(n);
        for (size_t i = 0; i < n; ++i) frame[i] = a[i].real();
        return frame;
    }
    // Hermitian spectrum, so the inverse reduces to a half-size complex
    // transform on even/odd interleaved output samples.
    const size_t h = n / 2;
    const std::vector<std::complex<double>>& w = root_table(n, true);
    static thread_local std::vector<std::complex<double>> full;
    static thread_local std::vector<std::complex<double>> packed;
    full.resize(h + 1);
    packed.resize(h);
    for (size_t k = 0; k <= h; ++k) full[k] = std::polar(spec.mag[k], spec.phase[k]);
    for (size_t k = 0; k < h; ++k) {
        const std::complex<double> rc = std::conj(full[h - k]);
        const std::complex<double> even = 0.5 * (full[k] + rc);
        const std::complex<double> odd = 0.5 * (full[k] - rc) * w[k];
        packed[k] = {even.real() - odd.imag(), even.imag() + odd.real()};
    }
    fft(packed, true);
    std::vector<double> frame(n);
    for (size_t m = 0; m < h; ++m) {
        frame[2 * m] = packed[m].real();
        frame[2 * m + 1] = packed[m].imag();
    }
    return frame;
}

int BandPartition::band_of(int bin) const {
    for (int b = 0; b < bands(); ++b)
        if (bin < edges[b + 1]) return b;
    return bands() - 1;
}

BandPartition bark_bands(int sample_rate, int fft_size) {
    const int bins = fft_size / 2 + 1;
    const double nyquist = sample_rate / 2.0;
    BandPartition p;
    p.edges.push_back(0);
    // Skip the lowest edge so the region below it joins the first band.
    for (size_t i = 1; i < std::size(kBarkEdges); ++i) {
        if (kBarkEdges[i] >= nyquist) break;
        int bin = int(std::lround(kBarkEdges[i] * fft_size / sample_rate));
        if (bin > p.edges.back() && bin < bins) p.edges.push_back(bin);
    }
    p.edges.push_back(bins);
    return p;
}

std::vector<double> compute_ipd(const Spectrum& left, const Spectrum& right,
                                const BandPartition& bands) {
    if (left.bins() != right.bins() || bands.edges.back() != left.bins())
        throw std::invalid_argument("compute_ipd: bin count mismatch");
    std::vector<double> ipd(bands.bands(), 0.0);
    for (int b = 0; b < bands.bands(); ++b) {
        std::complex<double> cross(0.0);
        for (int k = bands.edges[b]; k < bands.edges[b + 1]; ++k)
            cross += std::polar(left.mag[k] * right.mag[k], left.phase[k] - right.phase[k]);
        ipd[b] = std::abs(cross) < 1e-12 ? 0.0 : std::arg(cross);
    }
    return ipd;
}

int quantize_ipd(double ipd, int num_cells) {
    const double width = 2.0 * std::numbers::pi / num_cells;
    int cell = int(std::floor((ipd + std::numbers::pi) / width));
    return std::clamp(cell, 0, num_cells - 1);
}

std::pair<std::vector<double>, std::vector<double>> subband_split(
    const std::vector<double>& frame) {
    const size_t n = frame.size();
    if (n < 4 || n % 2 != 0) throw std::invalid_argument("subband_split: length must be even, >= 4");
    const double s3 = std::sqrt(3.0);
    const double norm = 4.0 * std::sqrt(2.0);
    const double h[4] = {(1 + s3) / norm, (3 + s3) / norm, (3 - s3) / norm, (1 - s3) / norm};
    const double g[4] = {h[3], -h[2], h[1], -h[0]};

    std::vector<double> low(n / 2), high(n / 2);
    for (size_t k = 0; k < n / 2; ++k) {
        double a = 0.0, d = 0.0;
        for (int m = 0; m < 4; ++m) {
            const double x = frame[(2 * k + m) % n];
            a += h[m] * x;
            d += g[m] * x;
        }
        low[k] = a;
        high[k] = d;
    }
    return {std::move(low), std::move(high)};
}

}  // namespace bise
