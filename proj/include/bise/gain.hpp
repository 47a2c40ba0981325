#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bise/snr.hpp"
#include "bise/spectral.hpp"

namespace bise {

enum class Criterion { WE, LE, WC, Direct };

std::string criterion_name(Criterion c);
Criterion parse_criterion(const std::string& name);

constexpr double kGainMax = 40.0;

// I x J suppression gains over quantized (prior, posterior) SNR cells.
struct GainTable {
    SnrAxes axes;
    Criterion criterion = Criterion::Direct;
    int p = 0;
    std::string noise_class = "default";
    std::vector<double> values;  // row-major, values[i * J + j]

    double at(int i, int j) const { return values[size_t(i) * axes.J + j]; }
    double& at(int i, int j) { return values[size_t(i) * axes.J + j]; }

    static GainTable constant(const SnrAxes& axes, double value);
};

enum class HrtfModel { Tdoa, Ipd };

std::string hrtf_model_name(HrtfModel m);
HrtfModel parse_hrtf_model(const std::string& name);

// Reconstruction gains: a length-L vector indexed by quantized delay, or a
// Q x B matrix indexed by (quantized IPD, bark band). The band partition is a
// runtime attachment (derived from rate/fft size), not persisted.
struct HrtfGain {
    HrtfModel model = HrtfModel::Tdoa;
    int L = 0;
    double tau_max = 0.0;
    int Q = 0, B = 0;
    std::vector<double> values;
    BandPartition bands;

    double at(int l) const { return values[l]; }
    double at(int q, int b) const { return values[size_t(q) * B + b]; }
    double& at(int q, int b) { return values[size_t(q) * B + b]; }
    int cells() const { return model == HrtfModel::Tdoa ? L : Q * B; }

    static HrtfGain tdoa_constant(int L, double tau_max, double value);
    static HrtfGain ipd_constant(int Q, int B, double value);
};

// Closed-form gains. Both clamp to [0, kGainMax] and require positive inputs.
double gain_mmse(double zeta, double xi);
double gain_log_mmse(double zeta, double xi);

double lookup(const GainTable& table, int i, int j);

// Per bin: xi and the decision-directed zeta from state, quantize, multiply the
// magnitude by the table gain. Phase untouched; state.prev_amp updated.
Spectrum apply_suppression(const Spectrum& spectrum, const GainTable& table, SnrState& state);

// Non-reference magnitudes = H * enhanced reference magnitudes; phase comes from
// the non-reference input's own noisy spectrum.
Spectrum reconstruct_nonref_tdoa(const Spectrum& enhanced_ref, const HrtfGain& hrtf, int l,
                                 const Spectrum& noisy_nonref);
Spectrum reconstruct_nonref_ipd(const Spectrum& enhanced_ref, const HrtfGain& hrtf,
                                const std::vector<int>& q_per_band,
                                const Spectrum& noisy_nonref);

enum class StorageMode { Double, PerDirection, Proposed };

long storage_bits(StorageMode mode, long I, long J, long L, long W);

void save_model(const std::string& path, const GainTable& table, const HrtfGain& hrtf);
std::pair<GainTable, HrtfGain> load_model(const std::string& path);

}  // namespace bise
