#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bise/audio.hpp"
#include "bise/env.hpp"
#include "bise/gain.hpp"
#include "bise/snr.hpp"
#include "bise/spectral.hpp"
#include "bise/tdoa.hpp"

namespace bise {

struct PipelineConfig {
    int sample_rate = 22050;
    int frame_len = 256;
    int hop = 128;
    HrtfModel model = HrtfModel::Tdoa;
    int max_lag = 24;
    int median_window = 20;
    int vote_window = 20;
    int ref_switch_frames = 20;  // persistent sign flips before the reference moves
    VadParams vad;
};

struct FrameDecision {
    long frame = 0;
    Background vad = Background::Noise;
    BackgroundDecision background;
    double tau = 0.0;            // filtered delay (tdoa model)
    std::vector<int> q_per_band; // ipd model
    RefChannel ref = RefChannel::Input1;
    bool bypass = false;
};

struct FrameResult {
    // Synthesis contributions: windowed frames on processed paths, verbatim input
    // copies on bypass (process_file windows those itself before overlap-add).
    std::vector<double> left, right;
    FrameDecision decision;
};

struct ProcessResult {
    AudioBuffer output;
    std::vector<FrameDecision> log;
};

class Pipeline {
  public:
    // models: per-noise-class (G, H); the first entry is active initially.
    Pipeline(PipelineConfig config, std::map<std::string, std::pair<GainTable, HrtfGain>> models,
             std::optional<ClassifierBundle> bundle = std::nullopt);

    FrameResult process_frame(const std::vector<double>& left, const std::vector<double>& right);
    ProcessResult process_file(const AudioBuffer& input);

    const std::string& active_class() const { return active_class_; }
    RefChannel reference() const { return ref_; }

  private:
    struct FrontFrame;
    FrontFrame front_end(const std::vector<double>& left, const std::vector<double>& right);
    void maybe_swap_model(const std::string& cls);

    PipelineConfig cfg_;
    std::vector<double> window_;
    BandPartition bands_;
    MelFilterbank bank_;
    std::map<std::string, std::pair<GainTable, HrtfGain>> models_;
    std::string active_class_;
    const GainTable* g_ = nullptr;
    const HrtfGain* h_ = nullptr;
    std::optional<EnvironmentClassifier> classifier_;
    VadState vad_left_, vad_right_;
    SnrState snr_;
    DelayTracker tracker_;
    RefChannel ref_ = RefChannel::Input1;
    bool ref_locked_ = false;
    int flip_streak_ = 0;
    std::vector<double> prev_mfcc_left_, prev_mfcc_right_;
    long frame_index_ = 0;
};

void write_decision_log(const std::string& path, const std::vector<FrameDecision>& log);

struct BenchRow {
    std::string mode;
    double total_s = 0;
    double per_frame_us = 0;
    long storage_bits = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;  // proposed, sequential, independent
    AudioBuffer proposed_out, sequential_out, independent_out;
    RefChannel ref = RefChannel::Input1;
};

// Times three suppression architectures over one precomputed front end (framing,
// spectra, VAD, direction): proposed (reference chain + reconstruction),
// sequential (the full unilateral chain run once per channel on one thread), and
// independent (the slower of the two separately timed unilateral chains, as if
// run in parallel). Sharing the front end keeps every mode's reference-channel
// bytes identical; totals are medians over the repetitions.
BenchResult bench_modes(const PipelineConfig& config, const GainTable& g, const HrtfGain& h,
                        const AudioBuffer& input, int repetitions = 3);

void write_bench_report(const std::string& path, const BenchResult& result);

}  // namespace bise
