#include "bise/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace bise {

namespace {

std::vector<int> quantize_ipd_bands(const std::vector<double>& ipd, int num_cells) {
    std::vector<int> out(ipd.size());
    for (size_t b = 0; b < ipd.size(); ++b) out[b] = quantize_ipd(ipd[b], num_cells);
    return out;
}

}  // namespace

struct Pipeline::FrontFrame {
    Spectrum left, right;
    Background vad = Background::Noise;
    double tau = 0.0;
    int delay_cell = 0;
    std::vector<int> q_per_band;
    std::vector<double> features;
};

Pipeline::Pipeline(PipelineConfig config,
                   std::map<std::string, std::pair<GainTable, HrtfGain>> models,
                   std::optional<ClassifierBundle> bundle)
    : cfg_(config),
      window_(hann_window(config.frame_len)),
      bands_(bark_bands(config.sample_rate, config.frame_len)),
      bank_(build_filterbank(config.sample_rate, config.frame_len)),
      models_(std::move(models)),
      vad_left_(config.vad),
      vad_right_(config.vad) {
    if (models_.empty()) throw std::invalid_argument("pipeline: no models");
    for (auto& entry : models_) {
        const GainTable& g = entry.second.first;
        HrtfGain& h = entry.second.second;
        if (h.model != cfg_.model) throw std::invalid_argument("pipeline: hrtf model mismatch");
        const auto& first = models_.begin()->second;
        if (g.axes.I != first.first.axes.I || g.axes.J != first.first.axes.J ||
            h.cells() != first.second.cells())
            throw std::invalid_argument("pipeline: model dimensions differ across classes");
        if (cfg_.model == HrtfModel::Ipd) {
            if (h.B != bands_.bands())
                throw std::invalid_argument("pipeline: band count mismatch");
            h.bands = bands_;
        }
    }
    if (!check_cola(window_, cfg_.hop)) throw std::invalid_argument("pipeline: window/hop not COLA");
    active_class_ = models_.begin()->first;
    g_ = &models_.begin()->second.first;
    h_ = &models_.begin()->second.second;
    if (bundle) classifier_.emplace(std::move(*bundle), cfg_.vote_window);
    tracker_.window = cfg_.median_window;
    snr_.reset(cfg_.frame_len / 2 + 1);
    prev_mfcc_left_.assign(13, 0.0);
    prev_mfcc_right_.assign(13, 0.0);
}

Pipeline::FrontFrame Pipeline::front_end(const std::vector<double>& left,
                                         const std::vector<double>& right) {
    FrontFrame f;
    f.vad = combine_vad(vad_left_.observe(left), vad_right_.observe(right));
    f.left = analyze(left, window_);
    f.right = analyze(right, window_);

    if (cfg_.model == HrtfModel::Tdoa) {
        const DelayEstimate raw = gcc_delay(left, right, cfg_.max_lag);
        f.tau = update_tracker(tracker_, raw.tau);
        f.delay_cell = quantize_delay(f.tau, h_->L, h_->tau_max);
    } else {
        f.q_per_band = quantize_ipd_bands(compute_ipd(f.left, f.right, bands_), h_->Q);
    }

    const std::vector<double> ml = mfcc(f.left, bank_);
    const std::vector<double> mr = mfcc(f.right, bank_);
    f.features = fuse_features(fuse_features(ml, delta_mfcc(ml, prev_mfcc_left_)),
                               fuse_features(mr, delta_mfcc(mr, prev_mfcc_right_)));
    prev_mfcc_left_ = ml;
    prev_mfcc_right_ = mr;
    return f;
}

void Pipeline::maybe_swap_model(const std::string& cls) {
    if (cls == active_class_) return;
    auto it = models_.find(cls);
    if (it == models_.end()) return;
    active_class_ = cls;
    g_ = &it->second.first;
    h_ = &it->second.second;
}

FrameResult Pipeline::process_frame(const std::vector<double>& left,
                                    const std::vector<double>& right) {
    if (int(left.size()) != cfg_.frame_len || int(right.size()) != cfg_.frame_len)
        throw std::invalid_argument("process_frame: frame length mismatch");
    FrontFrame f = front_end(left, right);

    FrameResult out;
    out.decision.frame = frame_index_++;
    out.decision.vad = f.vad;
    out.decision.tau = f.tau;
    out.decision.q_per_band = f.q_per_band;

    if (classifier_) {
        out.decision.background = classifier_->decide(f.vad, f.features);
    } else {
        switch (f.vad) {
            case Background::Voice:
                out.decision.background.kind = BackgroundDecision::Kind::Voice;
                break;
            case Background::Quiet:
                out.decision.background.kind = BackgroundDecision::Kind::Quiet;
                break;
            case Background::Noise:
                out.decision.background.kind = BackgroundDecision::Kind::Noise;
                out.decision.background.noise_class = active_class_;
                break;
        }
    }
    if (out.decision.background.kind == BackgroundDecision::Kind::Noise)
        maybe_swap_model(out.decision.background.noise_class);

    if (cfg_.model == HrtfModel::Tdoa) {
        const RefChannel want = select_reference(f.tau);
        if (want != ref_) {
            if (++flip_streak_ >= cfg_.ref_switch_frames) {
                ref_ = want;
                flip_streak_ = 0;
                snr_.reset(cfg_.frame_len / 2 + 1);
            }
        } else {
            flip_streak_ = 0;
        }
    }
    out.decision.ref = ref_;

    if (out.decision.background.bypass()) {
        out.decision.bypass = true;
        out.left = left;
        out.right = right;
        if (out.decision.background.kind == BackgroundDecision::Kind::Quiet) {
            const Spectrum& ref_spec = ref_ == RefChannel::Input1 ? f.left : f.right;
            update_noise_psd(snr_, ref_spec, Background::Quiet);
        }
        return out;
    }

    const bool ref_left = ref_ == RefChannel::Input1;
    const Spectrum& ref_spec = ref_left ? f.left : f.right;
    const Spectrum& nonref_spec = ref_left ? f.right : f.left;
    update_noise_psd(snr_, ref_spec, f.vad);
    const Spectrum enh_ref = apply_suppression(ref_spec, *g_, snr_);
    const Spectrum enh_nonref =
        cfg_.model == HrtfModel::Tdoa
            ? reconstruct_nonref_tdoa(enh_ref, *h_, f.delay_cell, nonref_spec)
            : reconstruct_nonref_ipd(enh_ref, *h_, f.q_per_band, nonref_spec);
    std::vector<double> ref_out = synthesize(enh_ref);
    std::vector<double> nonref_out = synthesize(enh_nonref);
    out.left = ref_left ? std::move(ref_out) : std::move(nonref_out);
    out.right = ref_left ? std::move(nonref_out) : std::move(ref_out);
    return out;
}

ProcessResult Pipeline::process_file(const AudioBuffer& input) {
    if (!input.stereo()) throw std::invalid_argument("process_file: stereo input required");
    if (input.sample_rate != cfg_.sample_rate)
        throw std::invalid_argument("process_file: sample rate mismatch");
    const auto frames_l = frame_stream(input.channels[0], cfg_.frame_len, cfg_.hop);
    const auto frames_r = frame_stream(input.channels[1], cfg_.frame_len, cfg_.hop);

    ProcessResult result;
    std::vector<std::vector<double>> out_l, out_r;
    out_l.reserve(frames_l.size());
    out_r.reserve(frames_r.size());
    for (size_t k = 0; k < frames_l.size(); ++k) {
        FrameResult fr = process_frame(frames_l[k], frames_r[k]);
        if (fr.decision.bypass) {
            for (int n = 0; n < cfg_.frame_len; ++n) {
                fr.left[n] *= window_[n];
                fr.right[n] *= window_[n];
            }
        }
        out_l.push_back(std::move(fr.left));
        out_r.push_back(std::move(fr.right));
        result.log.push_back(std::move(fr.decision));
    }
    std::vector<double> left = overlap_add(out_l, cfg_.hop, window_);
    std::vector<double> right = overlap_add(out_r, cfg_.hop, window_);
    left.resize(input.length());
    right.resize(input.length());
    result.output = AudioBuffer{cfg_.sample_rate, {std::move(left), std::move(right)}};
    return result;
}

namespace {

const char* vad_name(Background b) {
    switch (b) {
        case Background::Voice: return "voice";
        case Background::Noise: return "noise";
        default: return "quiet";
    }
}

const char* kind_name(BackgroundDecision::Kind k) {
    switch (k) {
        case BackgroundDecision::Kind::Voice: return "voice";
        case BackgroundDecision::Kind::Quiet: return "quiet";
        case BackgroundDecision::Kind::Music: return "music";
        default: return "noise";
    }
}

}  // namespace

void write_decision_log(const std::string& path, const std::vector<FrameDecision>& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "frame,vad,background,class,tau_or_q,ref_channel\n";
    char buf[64];
    for (const FrameDecision& d : log) {
        out << d.frame << ',' << vad_name(d.vad) << ',' << kind_name(d.background.kind) << ','
            << d.background.noise_class << ',';
        if (d.q_per_band.empty()) {
            std::snprintf(buf, sizeof buf, "%.6g", d.tau);
            out << buf;
        } else {
            for (size_t b = 0; b < d.q_per_band.size(); ++b)
                out << (b ? ";" : "") << d.q_per_band[b];
        }
        out << ',' << (d.ref == RefChannel::Input1 ? 1 : 2) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

using Clock = std::chrono::steady_clock;

struct BenchFront {
    std::vector<std::vector<double>> frames_l, frames_r;
    std::vector<Spectrum> spec_l, spec_r;
    std::vector<Background> vads;
    std::vector<int> dcell;
    std::vector<std::vector<int>> q_per_band;
    RefChannel ref = RefChannel::Input1;
};

BenchFront bench_front_end(const PipelineConfig& cfg, const HrtfGain& h,
                           const AudioBuffer& input) {
    BenchFront f;
    f.frames_l = frame_stream(input.channels[0], cfg.frame_len, cfg.hop);
    f.frames_r = frame_stream(input.channels[1], cfg.frame_len, cfg.hop);
    const std::vector<double> window = hann_window(cfg.frame_len);

    VadState vl(cfg.vad), vr(cfg.vad);
    DelayTracker tracker;
    tracker.window = cfg.median_window;
    BandPartition bands = bark_bands(cfg.sample_rate, cfg.frame_len);
    long ref_votes = 0;
    for (size_t k = 0; k < f.frames_l.size(); ++k) {
        f.vads.push_back(combine_vad(vl.observe(f.frames_l[k]), vr.observe(f.frames_r[k])));
        f.spec_l.push_back(analyze(f.frames_l[k], window));
        f.spec_r.push_back(analyze(f.frames_r[k], window));
        if (h.model == HrtfModel::Tdoa) {
            const double tau =
                update_tracker(tracker, gcc_delay(f.frames_l[k], f.frames_r[k], cfg.max_lag).tau);
            f.dcell.push_back(quantize_delay(tau, h.L, h.tau_max));
            ref_votes += select_reference(tau) == RefChannel::Input1 ? 1 : -1;
        } else {
            f.q_per_band.push_back(
                quantize_ipd_bands(compute_ipd(f.spec_l[k], f.spec_r[k], bands), h.Q));
        }
    }
    f.ref = ref_votes >= 0 ? RefChannel::Input1 : RefChannel::Input2;
    return f;
}

// One full unilateral suppression chain over precomputed frames: noise tracking,
// per-bin SNR estimation, table gain, synthesis, overlap-add.
std::pair<double, std::vector<double>> unilateral_pass(
    const PipelineConfig& cfg, const GainTable& g, const std::vector<double>& window,
    const std::vector<std::vector<double>>& frames, const std::vector<Spectrum>& spectra,
    const std::vector<Background>& vads, size_t out_len) {
    std::vector<std::vector<double>> contrib(frames.size());
    SnrState snr;
    const auto t0 = Clock::now();
    snr.reset(cfg.frame_len / 2 + 1);
    for (size_t k = 0; k < frames.size(); ++k) {
        if (vads[k] == Background::Quiet) {
            contrib[k] = frames[k];
            for (int n = 0; n < cfg.frame_len; ++n) contrib[k][n] *= window[n];
        } else {
            update_noise_psd(snr, spectra[k], vads[k]);
            contrib[k] = synthesize(apply_suppression(spectra[k], g, snr));
        }
    }
    std::vector<double> out = overlap_add(contrib, cfg.hop, window);
    const auto t1 = Clock::now();
    out.resize(out_len);
    return {std::chrono::duration<double>(t1 - t0).count(), std::move(out)};
}

// Reference chain plus non-reference reconstruction through H.
std::pair<double, std::pair<std::vector<double>, std::vector<double>>> proposed_pass(
    const PipelineConfig& cfg, const GainTable& g, const HrtfGain& h, const BenchFront& f,
    const std::vector<double>& window, size_t out_len) {
    const bool ref_left = f.ref == RefChannel::Input1;
    const auto& ref_frames = ref_left ? f.frames_l : f.frames_r;
    const auto& nonref_frames = ref_left ? f.frames_r : f.frames_l;
    const auto& ref_spec = ref_left ? f.spec_l : f.spec_r;
    const auto& nonref_spec = ref_left ? f.spec_r : f.spec_l;

    std::vector<std::vector<double>> contrib_ref(ref_frames.size()),
        contrib_nonref(ref_frames.size());
    SnrState snr;
    const auto t0 = Clock::now();
    snr.reset(cfg.frame_len / 2 + 1);
    for (size_t k = 0; k < ref_frames.size(); ++k) {
        if (f.vads[k] == Background::Quiet) {
            contrib_ref[k] = ref_frames[k];
            contrib_nonref[k] = nonref_frames[k];
            for (int n = 0; n < cfg.frame_len; ++n) {
                contrib_ref[k][n] *= window[n];
                contrib_nonref[k][n] *= window[n];
            }
        } else {
            update_noise_psd(snr, ref_spec[k], f.vads[k]);
            const Spectrum enh = apply_suppression(ref_spec[k], g, snr);
            const Spectrum recon =
                h.model == HrtfModel::Tdoa
                    ? reconstruct_nonref_tdoa(enh, h, f.dcell[k], nonref_spec[k])
                    : reconstruct_nonref_ipd(enh, h, f.q_per_band[k], nonref_spec[k]);
            contrib_ref[k] = synthesize(enh);
            contrib_nonref[k] = synthesize(recon);
        }
    }
    std::vector<double> out_ref = overlap_add(contrib_ref, cfg.hop, window);
    std::vector<double> out_nonref = overlap_add(contrib_nonref, cfg.hop, window);
    const auto t1 = Clock::now();
    out_ref.resize(out_len);
    out_nonref.resize(out_len);
    return {std::chrono::duration<double>(t1 - t0).count(),
            {std::move(out_ref), std::move(out_nonref)}};
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchResult bench_modes(const PipelineConfig& config, const GainTable& g, const HrtfGain& hrtf,
                        const AudioBuffer& input, int repetitions) {
    if (!input.stereo()) throw std::invalid_argument("bench_modes: stereo input required");
    if (repetitions < 1) throw std::invalid_argument("bench_modes: repetitions must be >= 1");
    HrtfGain h = hrtf;
    if (h.model == HrtfModel::Ipd) {
        h.bands = bark_bands(config.sample_rate, config.frame_len);
        if (h.bands.bands() != h.B)
            throw std::invalid_argument("bench_modes: band count does not match input rate");
    }
    const BenchFront front = bench_front_end(config, h, input);
    const std::vector<double> window = hann_window(config.frame_len);
    const size_t n = input.length();
    const size_t frames = front.frames_l.size();

    BenchResult result;
    result.ref = front.ref;
    std::vector<double> t_prop, t_seq, t_ind;
    for (int rep = 0; rep < repetitions; ++rep) {
        auto [tp, prop] = proposed_pass(config, g, h, front, window, n);
        auto [tl, left] =
            unilateral_pass(config, g, window, front.frames_l, front.spec_l, front.vads, n);
        auto [tr, right] =
            unilateral_pass(config, g, window, front.frames_r, front.spec_r, front.vads, n);
        t_prop.push_back(tp);
        t_seq.push_back(tl + tr);
        t_ind.push_back(std::max(tl, tr));
        if (rep == 0) {
            const bool ref_left = front.ref == RefChannel::Input1;
            result.proposed_out = AudioBuffer{
                config.sample_rate,
                ref_left ? std::vector<std::vector<double>>{prop.first, prop.second}
                         : std::vector<std::vector<double>>{prop.second, prop.first}};
            result.sequential_out = AudioBuffer{config.sample_rate, {left, right}};
            result.independent_out = result.sequential_out;
            const auto& prop_ref = ref_left ? result.proposed_out.channels[0]
                                            : result.proposed_out.channels[1];
            const auto& seq_ref = ref_left ? left : right;
            if (prop_ref != seq_ref)
                throw std::logic_error("bench_modes: reference-channel outputs differ");
        }
    }

    const long cells = h.cells();
    const double fp = double(frames);
    result.rows = {
        {"proposed", median_of(t_prop), median_of(t_prop) / fp * 1e6,
         storage_bits(StorageMode::Proposed, g.axes.I, g.axes.J, cells, 16)},
        {"sequential", median_of(t_seq), median_of(t_seq) / fp * 1e6,
         storage_bits(StorageMode::Double, g.axes.I, g.axes.J, cells, 16)},
        {"independent", median_of(t_ind), median_of(t_ind) / fp * 1e6,
         storage_bits(StorageMode::Double, g.axes.I, g.axes.J, cells, 16)},
    };
    return result;
}

void write_bench_report(const std::string& path, const BenchResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "mode,total_s,per_frame_us,storage_bits\n";
    char buf[128];
    for (const BenchRow& r : result.rows) {
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%ld\n", r.mode.c_str(), r.total_s,
                      r.per_frame_us, r.storage_bits);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace bise
