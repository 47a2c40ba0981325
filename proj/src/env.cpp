#include "bise/env.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace bise {

double spd(const std::vector<double>& low, const std::vector<double>& high) {
    double pl = 0.0, ph = 0.0;
    for (double x : low) pl += x * x;
    for (double x : high) ph += x * x;
    return std::abs(pl - ph);
}

double weight_compress(double spd_value, double frame_power) {
    const double dw = spd_value * (0.5 + 16.0 / std::log(2.0) * std::log(1.0 + 2.0 * frame_power));
    return std::tanh(dw);
}

double update_threshold(VadState& state, double dc) {
    state.dc_buffer.push_back(dc);
    if (int(state.dc_buffer.size()) > state.params.buffer_size) state.dc_buffer.pop_front();
    std::vector<double> sorted(state.dc_buffer.begin(), state.dc_buffer.end());
    std::sort(sorted.begin(), sorted.end());
    for (size_t b = 4; b < sorted.size(); ++b) {
        if (sorted[b] - sorted[b - 4] > state.params.jump) {
            state.threshold = state.params.threshold_alpha * state.threshold +
                              (1.0 - state.params.threshold_alpha) * sorted[b];
            break;
        }
    }
    return state.threshold;
}

Background vad_decide(VadState& state, double dc) {
    Background raw = Background::Quiet;
    if (dc >= state.threshold)
        raw = Background::Voice;
    else if (dc >= state.params.k_q * state.threshold)
        raw = Background::Noise;

    if (state.frames_seen < state.params.warmup_frames) {
        state.quiet_streak = state.noise_streak = 0;
        state.emitted = Background::Noise;
        return state.emitted;
    }
    switch (raw) {
        case Background::Voice:
            state.quiet_streak = state.noise_streak = 0;
            state.emitted = Background::Voice;
            break;
        case Background::Noise:
            state.quiet_streak = 0;
            state.noise_streak++;
            if (state.emitted != Background::Voice || state.noise_streak >= state.params.noise_guard)
                state.emitted = Background::Noise;
            break;
        case Background::Quiet:
            state.noise_streak = 0;
            state.quiet_streak++;
            if (state.emitted == Background::Quiet || state.quiet_streak >= state.params.quiet_guard)
                state.emitted = Background::Quiet;
            break;
    }
    return state.emitted;
}

Background VadState::observe(const std::vector<double>& frame) {
    const auto [low, high] = subband_split(frame);
    double power = 0.0;
    for (double x : frame) power += x * x;
    power /= frame.empty() ? 1.0 : double(frame.size());

    const double dc = weight_compress(spd(low, high), power);
    dc_smoothed = params.smooth * dc_smoothed + (1.0 - params.smooth) * dc;
    update_threshold(*this, dc_smoothed);
    const Background out = vad_decide(*this, dc_smoothed);
    frames_seen++;
    return out;
}

Background combine_vad(Background left, Background right) {
    if (left == Background::Voice || right == Background::Voice) return Background::Voice;
    if (left == Background::Noise || right == Background::Noise) return Background::Noise;
    return Background::Quiet;
}

MelFilterbank build_filterbank(int sample_rate, int fft_size) {
    constexpr int kFilters = 40, kLinear = 13;
    const double base = 200.0 / 3.0;
    const double ratio = std::pow(4000.0 / (14.0 * base), 1.0 / 27.0);

    std::vector<double> pts(kFilters + 2);
    for (int k = 0; k <= kLinear; ++k) pts[k] = base * (k + 1);
    for (int k = kLinear + 1; k <= kFilters + 1; ++k)
        pts[k] = 14.0 * base * std::pow(ratio, k - kLinear);

    MelFilterbank bank;
    bank.sample_rate = sample_rate;
    bank.fft_size = fft_size;
    bank.filters.resize(kFilters);
    const int bins = fft_size / 2 + 1;
    const double hz_per_bin = double(sample_rate) / fft_size;
    for (int m = 1; m <= kFilters; ++m) {
        auto& taps = bank.filters[m - 1];
        double total = 0.0;
        for (int b = 0; b < bins; ++b) {
            const double f = b * hz_per_bin;
            double w = 0.0;
            if (f > pts[m - 1] && f < pts[m])
                w = (f - pts[m - 1]) / (pts[m] - pts[m - 1]);
            else if (f >= pts[m] && f < pts[m + 1])
                w = (pts[m + 1] - f) / (pts[m + 1] - pts[m]);
            if (w > 0.0) {
                taps.emplace_back(b, w);
                total += w;
            }
        }
        for (auto& [bin, w] : taps) w /= total;
    }
    return bank;
}

std::vector<double> mfcc(const Spectrum& spectrum, const MelFilterbank& bank) {
    if (spectrum.fft_size != bank.fft_size)
        throw std::invalid_argument("mfcc: filterbank size mismatch");
    const int m_count = int(bank.filters.size());
    std::vector<double> log_e(m_count);
    for (int m = 0; m < m_count; ++m) {
        double e = 0.0;
        for (const auto& [bin, w] : bank.filters[m])
            e += w * spectrum.mag[bin] * spectrum.mag[bin];
        log_e[m] = std::log(std::max(e, 1e-10));
    }
    constexpr int kCoeffs = 13;
    std::vector<double> out(kCoeffs, 0.0);
    for (int n = 0; n < kCoeffs; ++n)
        for (int m = 0; m < m_count; ++m)
            out[n] += log_e[m] * std::cos(M_PI * n * (m + 0.5) / m_count);
    return out;
}

std::vector<double> delta_mfcc(const std::vector<double>& current,
                               const std::vector<double>& previous) {
    if (current.size() != previous.size())
        throw std::invalid_argument("delta_mfcc: size mismatch");
    std::vector<double> out(current.size());
    for (size_t i = 0; i < current.size(); ++i) out[i] = current[i] - previous[i];
    return out;
}

std::vector<double> fuse_features(const std::vector<double>& left26,
                                  const std::vector<double>& right26) {
    std::vector<double> out;
    out.reserve(left26.size() + right26.size());
    out.insert(out.end(), left26.begin(), left26.end());
    out.insert(out.end(), right26.begin(), right26.end());
    return out;
}

namespace {

constexpr double kVarFloor = 1e-6;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

double log_component(const GmmModel::Component& c, const std::vector<double>& x) {
    double lp = std::log(std::max(c.weight, kVarFloor));
    for (size_t d = 0; d < x.size(); ++d) {
        const double v = c.var[d];
        const double diff = x[d] - c.mean[d];
        lp += -0.5 * (std::log(2.0 * M_PI * v) + diff * diff / v);
    }
    return lp;
}

}  // namespace

GmmModel gmm_train(const std::vector<std::vector<double>>& samples, int k, uint32_t seed,
                   std::vector<double>* ll_trace) {
    if (int(samples.size()) < k) throw std::invalid_argument("gmm_train: too few samples");
    const int dim = int(samples[0].size());
    const size_t n = samples.size();

    std::mt19937 rng(seed);
    std::vector<size_t> picks;
    while (int(picks.size()) < k) {
        const size_t idx = rng() % n;
        if (std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);
    }
    std::vector<std::vector<double>> centers;
    for (size_t idx : picks) centers.push_back(samples[idx]);

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (size_t s = 0; s < n; ++s) {
            int best = 0;
            double best_d = sq_dist(samples[s], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(samples[s], centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[s] != best) {
                assign[s] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        for (int c = 0; c < k; ++c) {
            std::vector<double> mean(dim, 0.0);
            long count = 0;
            for (size_t s = 0; s < n; ++s) {
                if (assign[s] != c) continue;
                for (int d = 0; d < dim; ++d) mean[d] += samples[s][d];
                count++;
            }
            if (count == 0) continue;
            for (int d = 0; d < dim; ++d) mean[d] /= double(count);
            centers[c] = std::move(mean);
        }
    }

    GmmModel model;
    model.dim = dim;
    model.components.resize(k);
    for (int c = 0; c < k; ++c) {
        auto& comp = model.components[c];
        comp.mean = centers[c];
        comp.var.assign(dim, 0.0);
        long count = 0;
        for (size_t s = 0; s < n; ++s) {
            if (assign[s] != c) continue;
            for (int d = 0; d < dim; ++d) {
                const double diff = samples[s][d] - comp.mean[d];
                comp.var[d] += diff * diff;
            }
            count++;
        }
        comp.weight = std::max(double(count) / double(n), kVarFloor);
        for (int d = 0; d < dim; ++d)
            comp.var[d] = std::max(count > 0 ? comp.var[d] / double(count) : 0.0, kVarFloor);
    }

    std::vector<std::vector<double>> resp(n, std::vector<double>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        double ll = 0.0;
        for (size_t s = 0; s < n; ++s) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                resp[s][c] = log_component(model.components[c], samples[s]);
                mx = std::max(mx, resp[s][c]);
            }
            double denom = 0.0;
            for (int c = 0; c < k; ++c) denom += std::exp(resp[s][c] - mx);
            ll += mx + std::log(denom);
            for (int c = 0; c < k; ++c) resp[s][c] = std::exp(resp[s][c] - mx) / denom;
        }
        ll /= double(n);
        if (ll_trace) ll_trace->push_back(ll);

        for (int c = 0; c < k; ++c) {
            auto& comp = model.components[c];
            double total = 0.0;
            std::vector<double> mean(dim, 0.0), var(dim, 0.0);
            for (size_t s = 0; s < n; ++s) {
                total += resp[s][c];
                for (int d = 0; d < dim; ++d) mean[d] += resp[s][c] * samples[s][d];
            }
            if (total <= 0.0) continue;
            for (int d = 0; d < dim; ++d) mean[d] /= total;
            for (size_t s = 0; s < n; ++s)
                for (int d = 0; d < dim; ++d) {
                    const double diff = samples[s][d] - mean[d];
                    var[d] += resp[s][c] * diff * diff;
                }
            comp.weight = std::max(total / double(n), kVarFloor);
            comp.mean = std::move(mean);
            for (int d = 0; d < dim; ++d) comp.var[d] = std::max(var[d] / total, kVarFloor);
        }
        double wsum = 0.0;
        for (auto& comp : model.components) wsum += comp.weight;
        for (auto& comp : model.components) comp.weight /= wsum;

        if (std::abs(ll - prev_ll) < 1e-6) break;
        prev_ll = ll;
    }
    return model;
}

double gmm_score(const GmmModel& model, const std::vector<double>& x) {
    if (int(x.size()) != model.dim) throw std::invalid_argument("gmm_score: dimension mismatch");
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> lps(model.components.size());
    for (size_t c = 0; c < model.components.size(); ++c) {
        lps[c] = log_component(model.components[c], x);
        mx = std::max(mx, lps[c]);
    }
    double sum = 0.0;
    for (double lp : lps) sum += std::exp(lp - mx);
    return mx + std::log(sum);
}

int classify(const std::vector<GmmModel>& models, const std::vector<double>& x) {
    if (models.empty()) throw std::invalid_argument("classify: no models");
    int best = 0;
    double best_score = gmm_score(models[0], x);
    for (size_t m = 1; m < models.size(); ++m) {
        const double s = gmm_score(models[m], x);
        if (s > best_score) {
            best_score = s;
            best = int(m);
        }
    }
    return best;
}

int VoteFilter::push(int label) {
    history.push_back(label);
    if (int(history.size()) > window) history.pop_front();

    std::vector<std::pair<int, int>> counts;
    for (int l : history) {
        auto it = std::find_if(counts.begin(), counts.end(),
                               [l](const auto& p) { return p.first == l; });
        if (it == counts.end())
            counts.emplace_back(l, 1);
        else
            it->second++;
    }
    int best_count = 0;
    for (const auto& [l, c] : counts) best_count = std::max(best_count, c);
    std::vector<int> tied;
    for (const auto& [l, c] : counts)
        if (c == best_count) tied.push_back(l);
    std::sort(tied.begin(), tied.end());

    if (std::find(tied.begin(), tied.end(), last) == tied.end()) last = tied.front();
    return last;
}

namespace {

nlohmann::json gmm_to_json(const GmmModel& model) {
    nlohmann::json j;
    j["version"] = 1;
    j["label"] = model.label;
    j["dim"] = model.dim;
    j["components"] = nlohmann::json::array();
    for (const auto& c : model.components)
        j["components"].push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
    return j;
}

GmmModel gmm_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != 1) throw std::runtime_error("gmm model: unsupported version");
    GmmModel model;
    model.label = j.at("label").get<std::string>();
    model.dim = j.at("dim").get<int>();
    for (const auto& cj : j.at("components")) {
        GmmModel::Component c;
        c.weight = cj.at("weight").get<double>();
        c.mean = cj.at("mean").get<std::vector<double>>();
        c.var = cj.at("var").get<std::vector<double>>();
        if (int(c.mean.size()) != model.dim || int(c.var.size()) != model.dim)
            throw std::runtime_error("gmm model: component dimension mismatch");
        model.components.push_back(std::move(c));
    }
    return model;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return nlohmann::json::parse(in);
}

}  // namespace

void save_gmm(const std::string& path, const GmmModel& model) {
    write_json_file(path, gmm_to_json(model));
}

GmmModel load_gmm(const std::string& path) { return gmm_from_json(read_json_file(path)); }

void save_bundle(const std::string& dir, const ClassifierBundle& bundle) {
    std::filesystem::create_directories(dir);
    save_gmm(dir + "/music.json", bundle.music);
    save_gmm(dir + "/noise.json", bundle.noise);
    nlohmann::json manifest;
    manifest["music"] = "music.json";
    manifest["noise"] = "noise.json";
    manifest["classes"] = nlohmann::json::array();
    for (const auto& m : bundle.classes) {
        const std::string name = "class_" + m.label + ".json";
        save_gmm(dir + "/" + name, m);
        manifest["classes"].push_back(name);
    }
    write_json_file(dir + "/manifest.json", manifest);
}

ClassifierBundle load_bundle(const std::string& dir) {
    const nlohmann::json manifest = read_json_file(dir + "/manifest.json");
    ClassifierBundle bundle;
    bundle.music = load_gmm(dir + "/" + manifest.at("music").get<std::string>());
    bundle.noise = load_gmm(dir + "/" + manifest.at("noise").get<std::string>());
    for (const auto& name : manifest.at("classes"))
        bundle.classes.push_back(load_gmm(dir + "/" + name.get<std::string>()));
    if (bundle.classes.empty()) throw std::runtime_error(dir + ": bundle has no noise classes");
    return bundle;
}

EnvironmentClassifier::EnvironmentClassifier(ClassifierBundle b, int vote_window)
    : bundle(std::move(b)) {
    music_votes.window = vote_window;
    class_votes.window = vote_window;
}

BackgroundDecision EnvironmentClassifier::decide(Background vad,
                                                 const std::vector<double>& features) {
    BackgroundDecision out;
    if (vad == Background::Voice) {
        out.kind = BackgroundDecision::Kind::Voice;
        return out;
    }
    if (vad == Background::Quiet) {
        out.kind = BackgroundDecision::Kind::Quiet;
        return out;
    }
    const double s_music = gmm_score(bundle.music, features);
    const double s_noise = gmm_score(bundle.noise, features);
    const int voted = music_votes.push(s_music > s_noise ? 0 : 1);
    if (voted == 0) {
        out.kind = BackgroundDecision::Kind::Music;
        return out;
    }
    const int cls = class_votes.push(classify(bundle.classes, features));
    out.kind = BackgroundDecision::Kind::Noise;
    out.noise_class = bundle.classes[cls].label;
    return out;
}

}  // namespace bise
