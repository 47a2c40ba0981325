#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "bise/snr.hpp"
#include "bise/spectral.hpp"

namespace bise {

// Subband power difference between the level-1 wavelet bands.
double spd(const std::vector<double>& low, const std::vector<double>& high);

// Dw = spd [0.5 + (16/log 2) log(1 + 2 p)], Dc = tanh(Dw). The caller (VadState)
// applies the 0.9/0.1 first-order smoothing on top.
double weight_compress(double spd_value, double frame_power);

struct VadParams {
    double k_q = 0.01;
    int buffer_size = 32;
    int warmup_frames = 32;
    double jump = 0.008;        // Dcs(b) - Dcs(b-4) trigger
    double threshold_alpha = 0.975;
    double threshold_init = 0.1;
    int quiet_guard = 10;       // consecutive raw-Quiet frames before Quiet
    int noise_guard = 3;        // consecutive raw-Noise frames before Voice -> Noise
    double smooth = 0.9;        // Dc <- smooth * prev + (1 - smooth) * new
};

struct VadState {
    VadParams params;
    double threshold;
    double dc_smoothed = 0.0;
    std::deque<double> dc_buffer;
    long frames_seen = 0;
    Background emitted = Background::Noise;
    int quiet_streak = 0, noise_streak = 0;

    explicit VadState(const VadParams& p = {}) : params(p), threshold(p.threshold_init) {}

    // Full per-frame step: split, compress, smooth, adapt threshold, decide.
    Background observe(const std::vector<double>& frame);
};

// Sorted-buffer scan: smallest b >= 4 with Dcs(b) - Dcs(b-4) > jump sets the
// candidate; threshold <- 0.975 threshold + 0.025 candidate.
double update_threshold(VadState& state, double dc);

// Raw label (>= Tv Voice, >= k_q Tv Noise, else Quiet) with entry hangovers.
Background vad_decide(VadState& state, double dc);

Background combine_vad(Background left, Background right);

// 40 triangular filters: 13 linear from 133 Hz at 66.66 Hz spacing, 27 log-spaced
// up to 4000 Hz. Each filter is normalized to unit weight sum over its bins.
struct MelFilterbank {
    int sample_rate = 0, fft_size = 0;
    std::vector<std::vector<std::pair<int, double>>> filters;  // (bin, weight)
};

MelFilterbank build_filterbank(int sample_rate, int fft_size);

// Log power in each filter (floored at 1e-10), DCT-II, coefficients 0..12.
std::vector<double> mfcc(const Spectrum& spectrum, const MelFilterbank& bank);

std::vector<double> delta_mfcc(const std::vector<double>& current,
                               const std::vector<double>& previous);

std::vector<double> fuse_features(const std::vector<double>& left26,
                                  const std::vector<double>& right26);

struct GmmModel {
    struct Component {
        double weight = 0;
        std::vector<double> mean, var;
    };
    std::string label;
    int dim = 0;
    std::vector<Component> components;
};

// Seeded k-means then EM; ll_trace, when given, receives the per-iteration
// mean log-likelihood (non-decreasing).
GmmModel gmm_train(const std::vector<std::vector<double>>& samples, int k, uint32_t seed,
                   std::vector<double>* ll_trace = nullptr);

double gmm_score(const GmmModel& model, const std::vector<double>& x);

// Argmax class; ties go to the lowest index.
int classify(const std::vector<GmmModel>& models, const std::vector<double>& x);

// Majority vote over the last `window` labels; ties keep the previous output.
struct VoteFilter {
    int window = 20;
    std::deque<int> history;
    int last = -1;

    int push(int label);
};

void save_gmm(const std::string& path, const GmmModel& model);
GmmModel load_gmm(const std::string& path);

// Directory bundle: manifest.json naming the music/noise pair and the noise-class models.
struct ClassifierBundle {
    GmmModel music, noise;
    std::vector<GmmModel> classes;
};

void save_bundle(const std::string& dir, const ClassifierBundle& bundle);
ClassifierBundle load_bundle(const std::string& dir);

struct BackgroundDecision {
    enum class Kind { Voice, Quiet, Music, Noise } kind = Kind::Noise;
    std::string noise_class;  // set when kind == Noise

    bool bypass() const { return kind == Kind::Quiet || kind == Kind::Music; }
};

// Decision hierarchy with two voting stages (music/noise, then noise class).
struct EnvironmentClassifier {
    ClassifierBundle bundle;
    VoteFilter music_votes, class_votes;

    explicit EnvironmentClassifier(ClassifierBundle b, int vote_window = 20);
    BackgroundDecision decide(Background vad, const std::vector<double>& features);
};

}  // namespace bise
