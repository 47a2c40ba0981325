#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bise/audio.hpp"
#include "bise/gain.hpp"
#include "bise/snr.hpp"
#include "bise/spectral.hpp"
#include "bise/tdoa.hpp"

namespace bise {

// Criterion-agnostic sufficient statistics for one table cell. Amplitudes are
// floored at 1e-10 before logs and divisions.
struct CellSums {
    double s1 = 0;      // sum A^(p+1) R
    double s2 = 0;      // sum A^p R^2
    double log_a = 0;   // sum log A
    double log_r = 0;   // sum log R
    double log_sq = 0;  // sum (log A - log R)^2
    double c1 = 0;      // sum A^(p+1) / R
    double c2 = 0;      // sum A^(p-1) R
    double ap = 0;      // sum A^p
    double ap2 = 0;     // sum A^(p+2)
    long count = 0;

    void add(double amp, double r, int p);
    void merge(const CellSums& other);
};

constexpr double kAmpFloor = 1e-10;

// Per-cell sums for the reference side (I x J) and the non-reference side
// (I x J x D), where D is L delay cells or Q x B phase-band cells.
struct TrainAccumulator {
    SnrAxes axes;
    int p = 0;
    HrtfModel model = HrtfModel::Tdoa;
    int L = 7;
    double tau_max = 24.0;
    int Q = 13;
    BandPartition bands;  // ipd model only
    std::vector<CellSums> ref, nonref;
    long frames = 0;

    int dcells() const { return model == HrtfModel::Tdoa ? L : Q * bands.bands(); }
    void init();
    void accumulate(double clean_ref_amp, double noisy_ref_amp, double clean_nonref_amp,
                    int i, int j, int dcell);
    void merge(const TrainAccumulator& other);
    const CellSums& ref_cell(int i, int j) const { return ref[size_t(i) * axes.J + j]; }
    const CellSums& nonref_cell(int i, int j, int d) const {
        return nonref[(size_t(i) * axes.J + j) * dcells() + d];
    }
};

// Averaged: per-cell means with 1/IJ and beta/D weights, the objective the
// gradient descent minimizes. Summed: raw sums, the objective the alternating
// closed-form updates minimize exactly.
enum class DistortionForm { Averaged, Summed };

double total_distortion(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                        Criterion criterion, double beta,
                        DistortionForm form = DistortionForm::Averaged);

// first: dD/dG (I*J row-major), second: dD/dH (D cells).
using Gradients = std::pair<std::vector<double>, std::vector<double>>;

Gradients grad_we(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                  double beta);
Gradients grad_le(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                  double beta);
Gradients grad_wc(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                  double beta);

// K/Lambda/Phi/Psi assembly. Matches the direct gradients exactly for WC and up to
// a factor 1/2 for WE and LE (those carry the half-quadratic convention here).
Gradients grad_generalized(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                           Criterion criterion, double beta);

// G = s1/s2 on populated cells; empties filled by nearest-neighbor propagation
// along the prior axis, then the posterior axis, then log-MMSE at cell centers.
GainTable init_unilateral(const TrainAccumulator& acc);

// Closed-form H given G; cells with no data get 1.
HrtfGain init_hrtf(const TrainAccumulator& acc, const GainTable& g);

struct QuasistaticResult {
    GainTable g;
    HrtfGain h;
    std::vector<double> trace;  // Summed-form distortion per iteration
};

QuasistaticResult solve_we_quasistatic(const TrainAccumulator& acc, double beta,
                                       int iterations = 50);

struct OptimizerConfig {
    double learning_rate = 0.5;
    double momentum = 0.9;
    int iterations = 200;
    double beta = 1.0;
    double min_gain = 1e-4;
    double divergence_factor = 1e6;
};

double default_learning_rate(Criterion criterion);

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(std::vector<double> t)
        : std::runtime_error("optimization diverged"), trace(std::move(t)) {}
    std::vector<double> trace;
};

struct OptimizeResult {
    GainTable g;
    HrtfGain h;
    std::vector<double> trace;
};

OptimizeResult optimize(const TrainAccumulator& acc, Criterion criterion,
                        const OptimizerConfig& config, const GainTable& init_g,
                        const HrtfGain& init_h);

struct TrainingSetConfig {
    int sample_rate = 22050;
    int frame_len = 256;
    int hop = 128;
    double snr_db = 5.0;
    std::vector<double> azimuths = {-80, -65, -55, -45, -30, -15, 0,
                                    15,  30,  45,  55,  65,  80};
    SnrAxes axes;
    int p = 0;
    HrtfModel model = HrtfModel::Tdoa;
    int L = 7;
    double tau_max = 24.0;
    int Q = 13;
    int max_lag = 24;
    std::string hrir_dir;  // empty: synthesize spherical-head pairs
};

// Loops/truncates noise to the clean length and scales it so the mixture hits the
// target global SNR.
std::vector<double> mix_at_snr(const std::vector<double>& clean,
                               const std::vector<double>& noise, double snr_db);

// Mixes each clean file with a noise file at the target SNR, spatializes clean and
// noisy through the azimuth's HRIR pair, runs the runtime front-end for cell keys,
// and accumulates clean/noisy amplitude statistics.
TrainAccumulator build_training_set(const std::vector<std::string>& clean_files,
                                    const std::vector<std::string>& noise_files,
                                    const TrainingSetConfig& config);

}  // namespace bise
