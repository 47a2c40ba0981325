#include "bise/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bise/env.hpp"

namespace bise {

void CellSums::add(double amp, double r, int p) {
    const double a = std::max(amp, kAmpFloor);
    const double rr = std::max(r, kAmpFloor);
    const double ap_v = std::pow(a, p);
    s1 += ap_v * a * rr;
    s2 += ap_v * rr * rr;
    const double la = std::log(a), lr = std::log(rr);
    log_a += la;
    log_r += lr;
    log_sq += (la - lr) * (la - lr);
    c1 += ap_v * a / rr;
    c2 += ap_v / a * rr;
    ap += ap_v;
    ap2 += ap_v * a * a;
    count++;
}

void CellSums::merge(const CellSums& other) {
    s1 += other.s1;
    s2 += other.s2;
    log_a += other.log_a;
    log_r += other.log_r;
    log_sq += other.log_sq;
    c1 += other.c1;
    c2 += other.c2;
    ap += other.ap;
    ap2 += other.ap2;
    count += other.count;
}

void TrainAccumulator::init() {
    ref.assign(size_t(axes.I) * axes.J, CellSums{});
    nonref.assign(size_t(axes.I) * axes.J * dcells(), CellSums{});
    frames = 0;
}

void TrainAccumulator::accumulate(double clean_ref_amp, double noisy_ref_amp,
                                  double clean_nonref_amp, int i, int j, int dcell) {
    ref[size_t(i) * axes.J + j].add(clean_ref_amp, noisy_ref_amp, p);
    nonref[(size_t(i) * axes.J + j) * dcells() + dcell].add(clean_nonref_amp, noisy_ref_amp, p);
}

void TrainAccumulator::merge(const TrainAccumulator& other) {
    if (other.ref.size() != ref.size() || other.nonref.size() != nonref.size())
        throw std::invalid_argument("TrainAccumulator::merge: shape mismatch");
    for (size_t c = 0; c < ref.size(); ++c) ref[c].merge(other.ref[c]);
    for (size_t c = 0; c < nonref.size(); ++c) nonref[c].merge(other.nonref[c]);
    frames += other.frames;
}

namespace {

// Raw per-cell distortion sums from the stored moments.
double cell_sum(const CellSums& s, Criterion crit, double gain) {
    switch (crit) {
        case Criterion::WE:
            return s.ap2 - 2.0 * gain * s.s1 + gain * gain * s.s2;
        case Criterion::LE: {
            const double lg = std::log(gain);
            return s.log_sq - 2.0 * lg * (s.log_a - s.log_r) + double(s.count) * lg * lg;
        }
        case Criterion::WC:
            return s.c1 / gain + gain * s.c2 - s.ap;
        default:
            throw std::invalid_argument("cell_sum: unsupported criterion");
    }
}

double hrtf_value(const HrtfGain& h, int d) { return h.values[d]; }

}  // namespace

double total_distortion(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                        Criterion criterion, double beta, DistortionForm form) {
    const int IJ = acc.axes.I * acc.axes.J;
    const int D = acc.dcells();
    if (int(g.values.size()) != IJ || int(h.values.size()) != D)
        throw std::invalid_argument("total_distortion: dimension mismatch");

    double d_ref = 0.0, d_nonref = 0.0;
    for (int c = 0; c < IJ; ++c) {
        const CellSums& s = acc.ref[c];
        if (s.count > 0) {
            const double sum = cell_sum(s, criterion, g.values[c]);
            d_ref += form == DistortionForm::Averaged ? sum / double(s.count) : sum;
        }
        for (int d = 0; d < D; ++d) {
            const CellSums& sn = acc.nonref[size_t(c) * D + d];
            if (sn.count == 0) continue;
            const double sum = cell_sum(sn, criterion, g.values[c] * hrtf_value(h, d));
            d_nonref += form == DistortionForm::Averaged ? sum / double(sn.count) : sum;
        }
    }
    if (form == DistortionForm::Averaged)
        return d_ref / IJ + beta * d_nonref / (double(IJ) * D);
    return d_ref + beta * d_nonref;
}

Gradients grad_we(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                  double beta) {
    const int IJ = acc.axes.I * acc.axes.J;
    const int D = acc.dcells();
    std::vector<double> dg(IJ, 0.0), dh(D, 0.0);
    for (int c = 0; c < IJ; ++c) {
        const double G = g.values[c];
        double acc_g = 0.0;
        const CellSums& s = acc.ref[c];
        if (s.count > 0) acc_g += (s.s1 - G * s.s2) / double(s.count);
        for (int d = 0; d < D; ++d) {
            const CellSums& sn = acc.nonref[size_t(c) * D + d];
            if (sn.count == 0) continue;
            const double H = h.values[d];
            acc_g += beta / D * (H * sn.s1 - H * H * G * sn.s2) / double(sn.count);
            dh[d] += -2.0 * beta / (double(IJ) * D) * (G * sn.s1 - G * G * H * sn.s2) /
                     double(sn.count);
        }
        dg[c] = -2.0 / IJ * acc_g;
    }
    return {std::move(dg), std::move(dh)};
}

Gradients grad_le(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                  double beta) {
    const int IJ = acc.axes.I * acc.axes.J;
    const int D = acc.dcells();
    std::vector<double> dg(IJ, 0.0), dh(D, 0.0);
    for (int c = 0; c < IJ; ++c) {
        const double G = g.values[c];
        double acc_g = 0.0;
        const CellSums& s = acc.ref[c];
        if (s.count > 0)
            acc_g += (s.log_a - s.log_r - double(s.count) * std::log(G)) / double(s.count);
        for (int d = 0; d < D; ++d) {
            const CellSums& sn = acc.nonref[size_t(c) * D + d];
            if (sn.count == 0) continue;
            const double H = h.values[d];
            const double p_nr =
                (sn.log_a - sn.log_r - double(sn.count) * std::log(G * H)) / double(sn.count);
            acc_g += beta / D * p_nr;
            dh[d] += -2.0 * beta / (double(IJ) * D * H) * p_nr;
        }
        dg[c] = -2.0 / (double(IJ) * G) * acc_g;
    }
    return {std::move(dg), std::move(dh)};
}

Gradients grad_wc(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                  double beta) {
    const int IJ = acc.axes.I * acc.axes.J;
    const int D = acc.dcells();
    std::vector<double> dg(IJ, 0.0), dh(D, 0.0);
    for (int c = 0; c < IJ; ++c) {
        const double G = g.values[c];
        double acc_g = 0.0;
        const CellSums& s = acc.ref[c];
        if (s.count > 0) acc_g += (-s.c1 / (G * G) + s.c2) / double(s.count);
        for (int d = 0; d < D; ++d) {
            const CellSums& sn = acc.nonref[size_t(c) * D + d];
            if (sn.count == 0) continue;
            const double H = h.values[d];
            acc_g += beta / D * (-sn.c1 / (G * G * H) + H * sn.c2) / double(sn.count);
            dh[d] += beta / (double(IJ) * D) * (-sn.c1 / (G * H * H) + G * sn.c2) /
                     double(sn.count);
        }
        dg[c] = acc_g / IJ;
    }
    return {std::move(dg), std::move(dh)};
}

Gradients grad_generalized(const TrainAccumulator& acc, const GainTable& g, const HrtfGain& h,
                           Criterion criterion, double beta) {
    if (acc.model != HrtfModel::Ipd)
        throw std::invalid_argument("grad_generalized: requires an ipd-model accumulator");
    const int IJ = acc.axes.I * acc.axes.J;
    const int D = acc.dcells();
    std::vector<double> dg(IJ, 0.0), dh(D, 0.0);

    // Data quantities: amplitude-weighted means for WE/WC, loudness means for LE.
    auto phi_psi = [&](const CellSums& s) -> std::pair<double, double> {
        const double m = double(s.count);
        switch (criterion) {
            case Criterion::WE: return {s.s1 / m, s.s2 / m};
            case Criterion::WC: return {s.c1 / m, s.c2 / m};
            case Criterion::LE: return {s.log_a / m, s.log_r / m};
            default: throw std::invalid_argument("grad_generalized: unsupported criterion");
        }
    };
    auto d_ref_dg = [&](double G, double phi, double psi) {
        switch (criterion) {
            case Criterion::WE: return -phi + G * psi;
            case Criterion::WC: return -phi / (G * G) + psi;
            default: return (std::log(G) - phi + psi) / G;
        }
    };
    auto d_nonref_dg = [&](double G, double H, double phi, double psi) {
        switch (criterion) {
            case Criterion::WE: return -H * phi + G * H * H * psi;
            case Criterion::WC: return -phi / (G * G * H) + H * psi;
            default: return (std::log(G * H) - phi + psi) / G;
        }
    };
    auto d_nonref_dh = [&](double G, double H, double phi, double psi) {
        switch (criterion) {
            case Criterion::WE: return -G * phi + G * G * H * psi;
            case Criterion::WC: return -phi / (G * H * H) + G * psi;
            default: return (std::log(G * H) - phi + psi) / H;
        }
    };

    for (int c = 0; c < IJ; ++c) {
        const double G = g.values[c];
        double acc_g = 0.0;
        const CellSums& s = acc.ref[c];
        if (s.count > 0) {
            const auto [phi, psi] = phi_psi(s);
            acc_g += d_ref_dg(G, phi, psi);
        }
        for (int d = 0; d < D; ++d) {
            const CellSums& sn = acc.nonref[size_t(c) * D + d];
            if (sn.count == 0) continue;
            const double H = h.values[d];
            const auto [phi, psi] = phi_psi(sn);
            acc_g += beta / D * d_nonref_dg(G, H, phi, psi);
            dh[d] += beta / (double(IJ) * D) * d_nonref_dh(G, H, phi, psi);
        }
        dg[c] = acc_g / IJ;
    }
    return {std::move(dg), std::move(dh)};
}

namespace {

// Nearest populated neighbor along the prior axis, then the posterior axis,
// then the log-MMSE closed form at the cell-center SNRs.
void fill_empty_cells(GainTable& g, const std::vector<char>& filled_in) {
    const int I = g.axes.I, J = g.axes.J;
    std::vector<char> filled = filled_in;
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<char> next = filled;
        for (int i = 0; i < I; ++i) {
            for (int j = 0; j < J; ++j) {
                if (filled[size_t(i) * J + j]) continue;
                for (int d = 1; d < (pass == 0 ? I : J); ++d) {
                    const int lo = (pass == 0 ? i : j) - d;
                    const int hi = (pass == 0 ? i : j) + d;
                    int src = -1;
                    if (lo >= 0 && filled[pass == 0 ? size_t(lo) * J + j : size_t(i) * J + lo])
                        src = lo;
                    else if (hi < (pass == 0 ? I : J) &&
                             filled[pass == 0 ? size_t(hi) * J + j : size_t(i) * J + hi])
                        src = hi;
                    if (src >= 0) {
                        g.values[size_t(i) * J + j] =
                            g.values[pass == 0 ? size_t(src) * J + j : size_t(i) * J + src];
                        next[size_t(i) * J + j] = 1;
                        break;
                    }
                }
            }
        }
        filled = next;
    }
    const double iw = (g.axes.prior_db_max - g.axes.prior_db_min) / g.axes.I;
    const double jw = (g.axes.posterior_db_max - g.axes.posterior_db_min) / g.axes.J;
    for (int i = 0; i < I; ++i) {
        for (int j = 0; j < J; ++j) {
            if (filled[size_t(i) * J + j]) continue;
            const double zeta = std::pow(10.0, (g.axes.prior_db_min + (i + 0.5) * iw) / 10.0);
            const double xi = std::pow(10.0, (g.axes.posterior_db_min + (j + 0.5) * jw) / 10.0);
            g.values[size_t(i) * J + j] = gain_log_mmse(zeta, xi);
        }
    }
}

}  // namespace

GainTable init_unilateral(const TrainAccumulator& acc) {
    GainTable g = GainTable::constant(acc.axes, 0.0);
    g.criterion = Criterion::WE;
    g.p = acc.p;
    std::vector<char> filled(g.values.size(), 0);
    for (size_t c = 0; c < g.values.size(); ++c) {
        if (acc.ref[c].count > 0) {
            g.values[c] = acc.ref[c].s1 / acc.ref[c].s2;
            filled[c] = 1;
        }
    }
    fill_empty_cells(g, filled);
    return g;
}

HrtfGain init_hrtf(const TrainAccumulator& acc, const GainTable& g) {
    const int D = acc.dcells();
    HrtfGain h = acc.model == HrtfModel::Tdoa
                     ? HrtfGain::tdoa_constant(acc.L, acc.tau_max, 1.0)
                     : HrtfGain::ipd_constant(acc.Q, acc.bands.bands(), 1.0);
    h.bands = acc.bands;
    for (int d = 0; d < D; ++d) {
        double num = 0.0, den = 0.0;
        for (int c = 0; c < acc.axes.I * acc.axes.J; ++c) {
            const CellSums& sn = acc.nonref[size_t(c) * D + d];
            if (sn.count == 0) continue;
            num += g.values[c] * sn.s1;
            den += g.values[c] * g.values[c] * sn.s2;
        }
        if (den > 0.0) h.values[d] = num / den;
    }
    return h;
}

QuasistaticResult solve_we_quasistatic(const TrainAccumulator& acc, double beta, int iterations) {
    if (acc.model != HrtfModel::Tdoa)
        throw std::invalid_argument("solve_we_quasistatic: requires a tdoa-model accumulator");
    const int IJ = acc.axes.I * acc.axes.J;
    const int D = acc.dcells();

    GainTable g = init_unilateral(acc);
    HrtfGain h = HrtfGain::tdoa_constant(acc.L, acc.tau_max, 1.0);
    std::vector<double> trace;
    trace.push_back(total_distortion(acc, g, h, Criterion::WE, beta, DistortionForm::Summed));

    for (int it = 0; it < iterations; ++it) {
        double max_change = 0.0;
        for (int d = 0; d < D; ++d) {
            double num = 0.0, den = 0.0;
            for (int c = 0; c < IJ; ++c) {
                const CellSums& sn = acc.nonref[size_t(c) * D + d];
                if (sn.count == 0) continue;
                num += g.values[c] * sn.s1;
                den += g.values[c] * g.values[c] * sn.s2;
            }
            if (den > 0.0) {
                const double next = num / den;
                max_change = std::max(max_change,
                                      std::abs(next - h.values[d]) /
                                          std::max(std::abs(h.values[d]), 1e-12));
                h.values[d] = next;
            }
        }
        for (int c = 0; c < IJ; ++c) {
            const CellSums& s = acc.ref[c];
            double num = s.count > 0 ? s.s1 : 0.0;
            double den = s.count > 0 ? s.s2 : 0.0;
            for (int d = 0; d < D; ++d) {
                const CellSums& sn = acc.nonref[size_t(c) * D + d];
                if (sn.count == 0) continue;
                num += beta * h.values[d] * sn.s1;
                den += beta * h.values[d] * h.values[d] * sn.s2;
            }
            if (den > 0.0) {
                const double next = num / den;
                max_change = std::max(max_change,
                                      std::abs(next - g.values[c]) /
                                          std::max(std::abs(g.values[c]), 1e-12));
                g.values[c] = next;
            }
        }
        trace.push_back(total_distortion(acc, g, h, Criterion::WE, beta, DistortionForm::Summed));
        if (max_change < 1e-9) break;
    }
    return {std::move(g), std::move(h), std::move(trace)};
}

double default_learning_rate(Criterion criterion) {
    switch (criterion) {
        case Criterion::WE: return 0.5;
        case Criterion::LE: return 1e-6;
        case Criterion::WC: return 5e-7;
        default: throw std::invalid_argument("default_learning_rate: unsupported criterion");
    }
}

OptimizeResult optimize(const TrainAccumulator& acc, Criterion criterion,
                        const OptimizerConfig& config, const GainTable& init_g,
                        const HrtfGain& init_h) {
    GainTable g = init_g;
    HrtfGain h = init_h;
    std::vector<double> vg(g.values.size(), 0.0), vh(h.values.size(), 0.0);
    std::vector<double> trace;

    auto gradients = [&]() {
        switch (criterion) {
            case Criterion::WE: return grad_we(acc, g, h, config.beta);
            case Criterion::LE: return grad_le(acc, g, h, config.beta);
            case Criterion::WC: return grad_wc(acc, g, h, config.beta);
            default: throw std::invalid_argument("optimize: unsupported criterion");
        }
    };

    for (int it = 0; it <= config.iterations; ++it) {
        const double d = total_distortion(acc, g, h, criterion, config.beta);
        trace.push_back(d);
        if (!std::isfinite(d) || d > config.divergence_factor * (trace.front() + 1e-30))
            throw DivergenceError(trace);
        if (it == config.iterations) break;

        const auto [dg, dh] = gradients();
        for (size_t c = 0; c < g.values.size(); ++c) {
            vg[c] = config.momentum * vg[c] - config.learning_rate * dg[c];
            g.values[c] = std::max(g.values[c] + vg[c], config.min_gain);
        }
        for (size_t d2 = 0; d2 < h.values.size(); ++d2) {
            vh[d2] = config.momentum * vh[d2] - config.learning_rate * dh[d2];
            h.values[d2] = std::max(h.values[d2] + vh[d2], config.min_gain);
        }
    }
    g.criterion = criterion;
    return {std::move(g), std::move(h), std::move(trace)};
}

std::vector<double> mix_at_snr(const std::vector<double>& clean,
                               const std::vector<double>& noise, double snr_db) {
    if (noise.empty()) throw std::invalid_argument("mix_at_snr: empty noise");
    double pc = 0.0;
    for (double x : clean) pc += x * x;
    std::vector<double> looped(clean.size());
    double pn = 0.0;
    for (size_t i = 0; i < clean.size(); ++i) {
        looped[i] = noise[i % noise.size()];
        pn += looped[i] * looped[i];
    }
    const double scale = pn <= 0.0 ? 0.0 : std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
    std::vector<double> out(clean.size());
    for (size_t i = 0; i < clean.size(); ++i) out[i] = clean[i] + scale * looped[i];
    return out;
}

namespace {

std::vector<double> load_mono(const std::string& path, int expect_rate) {
    AudioBuffer b = read_wav(path);
    if (b.sample_rate != expect_rate)
        throw std::runtime_error(path + ": sample rate mismatch");
    return b.channels[0];
}

// Runs the runtime front-end over one spatialized scene and accumulates
// clean/noisy amplitude pairs into the cell keyed by that frame's estimates.
void accumulate_scene(TrainAccumulator& acc, const AudioBuffer& clean_st,
                      const AudioBuffer& noisy_st, const TrainingSetConfig& config,
                      const std::vector<double>& window) {
    const auto clean_l = frame_stream(clean_st.channels[0], config.frame_len, config.hop);
    const auto clean_r = frame_stream(clean_st.channels[1], config.frame_len, config.hop);
    const auto noisy_l = frame_stream(noisy_st.channels[0], config.frame_len, config.hop);
    const auto noisy_r = frame_stream(noisy_st.channels[1], config.frame_len, config.hop);
    const size_t frames = std::min(clean_l.size(), noisy_l.size());

    VadState vad_l, vad_r;
    SnrState snr_l, snr_r;
    const int bins = config.frame_len / 2 + 1;
    snr_l.reset(bins);
    snr_r.reset(bins);
    DelayTracker tracker;

    for (size_t k = 0; k < frames; ++k) {
        const Spectrum sl = analyze(noisy_l[k], window);
        const Spectrum sr = analyze(noisy_r[k], window);
        const Spectrum cl = analyze(clean_l[k], window);
        const Spectrum cr = analyze(clean_r[k], window);

        const Background bg = combine_vad(vad_l.observe(noisy_l[k]), vad_r.observe(noisy_r[k]));
        update_noise_psd(snr_l, sl, bg);
        update_noise_psd(snr_r, sr, bg);

        RefChannel ref = RefChannel::Input1;
        int delay_cell = 0;
        std::vector<int> q_per_band;
        if (acc.model == HrtfModel::Tdoa) {
            const DelayEstimate est =
                gcc_delay(noisy_l[k], noisy_r[k], config.max_lag, GccWeighting::Phat);
            const double tau = update_tracker(tracker, est.tau);
            ref = select_reference(tau);
            delay_cell = quantize_delay(tau, acc.L, acc.tau_max);
        } else {
            const std::vector<double> ipd = compute_ipd(sl, sr, acc.bands);
            q_per_band.resize(ipd.size());
            for (size_t b = 0; b < ipd.size(); ++b)
                q_per_band[b] = quantize_ipd(ipd[b], acc.Q);
        }

        const bool ref_left = ref == RefChannel::Input1;
        SnrState& snr_ref = ref_left ? snr_l : snr_r;
        const Spectrum& clean_ref = ref_left ? cl : cr;
        const Spectrum& clean_nonref = ref_left ? cr : cl;

        // Bootstrap the decision-directed feedback with the closed-form gain on
        // both channels so a reference switch keeps a live history.
        for (SnrState* state : {&snr_l, &snr_r}) {
            const Spectrum& spec = state == &snr_l ? sl : sr;
            const bool gather = state == &snr_ref && k >= size_t(state->init_frames);
            for (int b = 0; b < bins; ++b) {
                const double r = spec.mag[b];
                const double lambda = state->noise_at(b);
                const double xi = posterior_snr(r, lambda);
                const double zeta =
                    decision_directed_prior(state->prev_amp[b], r, lambda, state->alpha,
                                            state->zeta_min);
                state->prev_amp[b] = r > 0.0 ? gain_log_mmse(zeta, xi) * r : 0.0;
                if (!gather) continue;
                const auto [i, j] = quantize_snr(zeta, xi, acc.axes);
                const int dcell = acc.model == HrtfModel::Tdoa
                                      ? delay_cell
                                      : q_per_band[acc.bands.band_of(b)] * acc.bands.bands() +
                                            acc.bands.band_of(b);
                acc.accumulate(clean_ref.mag[b], r, clean_nonref.mag[b], i, j, dcell);
            }
        }
        acc.frames++;
    }
}

}  // namespace

TrainAccumulator build_training_set(const std::vector<std::string>& clean_files,
                                    const std::vector<std::string>& noise_files,
                                    const TrainingSetConfig& config) {
    if (clean_files.empty() || noise_files.empty())
        throw std::runtime_error("build_training_set: empty corpus");

    TrainAccumulator acc;
    acc.axes = config.axes;
    acc.p = config.p;
    acc.model = config.model;
    acc.L = config.L;
    acc.tau_max = config.tau_max;
    acc.Q = config.Q;
    acc.bands = bark_bands(config.sample_rate, config.frame_len);
    acc.init();

    const std::vector<double> window = hann_window(config.frame_len);

    for (size_t ci = 0; ci < clean_files.size(); ++ci) {
        const std::vector<double> clean = load_mono(clean_files[ci], config.sample_rate);
        for (size_t ai = 0; ai < config.azimuths.size(); ++ai) {
            const double az = config.azimuths[ai];
            const std::vector<double> noise =
                load_mono(noise_files[(ci + ai) % noise_files.size()], config.sample_rate);

            HrirPair hrir;
            if (config.hrir_dir.empty()) {
                hrir = synth_hrir(az, config.sample_rate);
            } else {
                char name[64];
                std::snprintf(name, sizeof name, "az%g", az);
                const std::string base = config.hrir_dir + "/" + name;
                hrir = read_hrir(base + "_left.txt", base + "_right.txt");
                if (hrir.sample_rate != config.sample_rate)
                    throw std::runtime_error(base + ": hrir sample rate mismatch");
            }

            AudioBuffer mono_clean{config.sample_rate, {clean}};
            AudioBuffer mono_noisy{config.sample_rate,
                                   {mix_at_snr(clean, noise, config.snr_db)}};
            accumulate_scene(acc, convolve_hrir(mono_clean, hrir),
                             convolve_hrir(mono_noisy, hrir), config, window);
        }
    }
    return acc;
}

}  // namespace bise
