#pragma once

#include <complex>
#include <utility>
#include <vector>

namespace bise {

// One-sided spectrum of a real frame: bins 0..fft_size/2.
struct Spectrum {
    int fft_size = 0;
    std::vector<double> mag, phase;

    int bins() const { return int(mag.size()); }
};

// In-place radix-2 FFT; size must be a power of two. The inverse includes the 1/N scale.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Windowed DFT of a frame. frame and window must be equal power-of-two length.
Spectrum analyze(const std::vector<double>& frame, const std::vector<double>& window);

// Inverse of analyze: returns the windowed time frame.
std::vector<double> synthesize(const Spectrum& spec);

// Contiguous partition of the one-sided bins into B bands.
// edges has B+1 entries, edges[0] = 0 and edges[B] = bin count.
struct BandPartition {
    std::vector<int> edges;

    int bands() const { return int(edges.size()) - 1; }
    int band_of(int bin) const;
};

// Zwicker critical-band edges mapped to the nearest bin; everything below the
// first edge joins band 1, the last band runs to Nyquist, empty bands merge forward.
BandPartition bark_bands(int sample_rate, int fft_size);

// Per-band interaural phase difference: the angle of sum_k L_k R_k e^{j(phL - phR)}.
// Bands whose cross-power magnitude is below 1e-12 report 0.
std::vector<double> compute_ipd(const Spectrum& left, const Spectrum& right,
                                const BandPartition& bands);

// Uniform cells over (-pi, pi]; out-of-range values clamp to the end cells.
int quantize_ipd(double ipd, int num_cells);

// One level of an orthonormal Daubechies-4 wavelet split with periodic extension.
// Returns (approximation, detail), each of length frame/2.
std::pair<std::vector<double>, std::vector<double>> subband_split(
    const std::vector<double>& frame);

}  // namespace bise
