#include "bise/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bise/env.hpp"
#include "bise/eval.hpp"
#include "bise/pipeline.hpp"
#include "bise/training.hpp"

namespace bise {

namespace {

namespace fs = std::filesystem;

void atomic_write(const std::string& path,
                  const std::function<void(const std::string&)>& writer) {
    const std::string tmp = path + ".tmp";
    writer(tmp);
    fs::rename(tmp, path);
}

std::vector<std::string> list_wavs(const std::string& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) throw std::runtime_error(dir + ": not a directory");
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            out.push_back(entry.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error(dir + ": no wav files");
    return out;
}

AudioBuffer as_stereo(AudioBuffer in) {
    if (in.channels.size() == 1) in.channels.push_back(in.channels[0]);
    return in;
}

// Per-frame fused MFCC+delta features, mono inputs duplicated to both channels.
std::vector<std::vector<double>> stream_features(const AudioBuffer& input, int frame_len,
                                                 int hop) {
    const AudioBuffer st = as_stereo(input);
    const std::vector<double> window = hann_window(frame_len);
    const MelFilterbank bank = build_filterbank(st.sample_rate, frame_len);
    const auto frames_l = frame_stream(st.channels[0], frame_len, hop);
    const auto frames_r = frame_stream(st.channels[1], frame_len, hop);

    std::vector<std::vector<double>> features;
    std::vector<double> prev_l(13, 0.0), prev_r(13, 0.0);
    for (size_t k = 0; k < frames_l.size(); ++k) {
        const std::vector<double> ml = mfcc(analyze(frames_l[k], window), bank);
        const std::vector<double> mr = mfcc(analyze(frames_r[k], window), bank);
        features.push_back(fuse_features(fuse_features(ml, delta_mfcc(ml, prev_l)),
                                         fuse_features(mr, delta_mfcc(mr, prev_r))));
        prev_l = ml;
        prev_r = mr;
    }
    return features;
}

std::vector<std::vector<double>> dir_features(const std::string& dir, int frame_len, int hop) {
    std::vector<std::vector<double>> all;
    for (const std::string& path : list_wavs(dir)) {
        auto f = stream_features(read_wav(path), frame_len, hop);
        all.insert(all.end(), std::make_move_iterator(f.begin()),
                   std::make_move_iterator(f.end()));
    }
    return all;
}

struct TrainArgs {
    std::string clean_dir, noise_dir, out, trace, hrir = "synth";
    std::string criterion = "we", method = "gradient", hrtf = "tdoa";
    double beta = 1.0, p = 0.0, snr_db = 5.0;
    int iters = 200;
    unsigned seed = 0;
    std::vector<double> azimuths;
    std::string music_dir, gmm_out;
    std::vector<std::string> class_dirs;  // label=dir
};

int run_train(const TrainArgs& a) {
    if (a.p != std::floor(a.p)) {
        std::cerr << "error: --p must be an integer\n";
        return 1;
    }
    const Criterion crit = parse_criterion(a.criterion);
    const HrtfModel model = parse_hrtf_model(a.hrtf);
    if (a.method == "quasistatic" && (crit != Criterion::WE || model != HrtfModel::Tdoa)) {
        std::cerr << "error: --method quasistatic requires --criterion we --hrtf tdoa\n";
        return 1;
    }

    TrainingSetConfig cfg;
    cfg.p = int(a.p);
    cfg.model = model;
    cfg.snr_db = a.snr_db;
    if (!a.azimuths.empty()) cfg.azimuths = a.azimuths;
    if (a.hrir != "synth") cfg.hrir_dir = a.hrir;

    std::cerr << "accumulating training statistics...\n";
    const TrainAccumulator acc =
        build_training_set(list_wavs(a.clean_dir), list_wavs(a.noise_dir), cfg);

    GainTable g;
    HrtfGain h;
    std::vector<double> trace;
    if (a.method == "quasistatic") {
        QuasistaticResult r = solve_we_quasistatic(acc, a.beta, a.iters);
        g = std::move(r.g);
        h = std::move(r.h);
        trace = std::move(r.trace);
    } else {
        OptimizerConfig oc;
        oc.learning_rate = default_learning_rate(crit);
        oc.iterations = a.iters;
        oc.beta = a.beta;
        const GainTable g0 = init_unilateral(acc);
        OptimizeResult r = optimize(acc, crit, oc, g0, init_hrtf(acc, g0));
        g = std::move(r.g);
        h = std::move(r.h);
        trace = std::move(r.trace);
    }
    g.criterion = crit;
    g.p = int(a.p);

    atomic_write(a.out, [&](const std::string& tmp) { save_model(tmp, g, h); });
    std::cerr << "wrote " << a.out << "\n";
    if (!a.trace.empty()) {
        atomic_write(a.trace, [&](const std::string& tmp) {
            std::ofstream f(tmp, std::ios::trunc);
            if (!f) throw std::runtime_error("cannot write " + tmp);
            f << "iter,distortion\n";
            char buf[64];
            for (size_t i = 0; i < trace.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, trace[i]);
                f << buf;
            }
        });
    }

    if (!a.gmm_out.empty()) {
        if (a.music_dir.empty() || a.class_dirs.empty()) {
            std::cerr << "error: --gmm-out requires --music-dir and at least one --class\n";
            return 1;
        }
        ClassifierBundle bundle;
        bundle.music = gmm_train(dir_features(a.music_dir, cfg.frame_len, cfg.hop), 2, a.seed);
        bundle.music.label = "music";
        std::vector<std::vector<double>> pooled;
        for (const std::string& spec : a.class_dirs) {
            const size_t eq = spec.find('=');
            if (eq == std::string::npos || eq == 0)
                throw std::runtime_error("--class expects label=dir, got " + spec);
            auto feats = dir_features(spec.substr(eq + 1), cfg.frame_len, cfg.hop);
            pooled.insert(pooled.end(), feats.begin(), feats.end());
            GmmModel m = gmm_train(feats, 2, a.seed);
            m.label = spec.substr(0, eq);
            bundle.classes.push_back(std::move(m));
        }
        bundle.noise = gmm_train(pooled, 2, a.seed);
        bundle.noise.label = "noise";
        const std::string tmp = a.gmm_out + ".tmp";
        fs::remove_all(tmp);
        save_bundle(tmp, bundle);
        fs::remove_all(a.gmm_out);
        fs::rename(tmp, a.gmm_out);
        std::cerr << "wrote " << a.gmm_out << "\n";
    }
    return 0;
}

struct EnhanceArgs {
    std::string model, bundle, input, output, log;
};

int run_enhance(const EnhanceArgs& a) {
    auto [g, h] = load_model(a.model);
    PipelineConfig cfg;
    cfg.model = h.model;

    std::map<std::string, std::pair<GainTable, HrtfGain>> models;
    models.emplace(g.noise_class, std::make_pair(std::move(g), std::move(h)));
    std::optional<ClassifierBundle> bundle;
    if (!a.bundle.empty()) bundle = load_bundle(a.bundle);

    const AudioBuffer input = read_wav(a.input);
    if (!input.stereo()) throw std::runtime_error(a.input + ": stereo input required");
    cfg.sample_rate = input.sample_rate;

    Pipeline pipeline(cfg, std::move(models), std::move(bundle));
    ProcessResult result = pipeline.process_file(input);
    atomic_write(a.output, [&](const std::string& tmp) { write_wav(tmp, result.output); });
    if (!a.log.empty())
        atomic_write(a.log, [&](const std::string& tmp) { write_decision_log(tmp, result.log); });
    std::cerr << "wrote " << a.output << "\n";
    return 0;
}

struct ClassifyArgs {
    std::string bundle, input, out;
    int vote = 20;
};

int run_classify(const ClassifyArgs& a) {
    EnvironmentClassifier cls(load_bundle(a.bundle), a.vote);
    const AudioBuffer input = as_stereo(read_wav(a.input));
    const int frame_len = 256, hop = 128;
    const auto frames_l = frame_stream(input.channels[0], frame_len, hop);
    const auto frames_r = frame_stream(input.channels[1], frame_len, hop);
    const auto features = stream_features(input, frame_len, hop);

    VadState vl, vr;
    atomic_write(a.out, [&](const std::string& tmp) {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << "frame,background,class\n";
        for (size_t k = 0; k < frames_l.size(); ++k) {
            const Background vad = combine_vad(vl.observe(frames_l[k]), vr.observe(frames_r[k]));
            const BackgroundDecision d = cls.decide(vad, features[k]);
            const char* kind = d.kind == BackgroundDecision::Kind::Voice   ? "voice"
                               : d.kind == BackgroundDecision::Kind::Quiet ? "quiet"
                               : d.kind == BackgroundDecision::Kind::Music ? "music"
                                                                           : "noise";
            f << k << ',' << kind << ',' << d.noise_class << '\n';
        }
    });
    return 0;
}

struct VadArgs {
    std::string input, out;
    double kq = 0.01;
};

int run_vad(const VadArgs& a) {
    const AudioBuffer input = read_wav(a.input);
    const int frame_len = 256, hop = 128;
    VadParams params;
    params.k_q = a.kq;

    std::vector<std::vector<std::vector<double>>> frames;
    std::vector<VadState> states;
    for (const auto& ch : input.channels) {
        frames.push_back(frame_stream(ch, frame_len, hop));
        states.emplace_back(params);
    }
    atomic_write(a.out, [&](const std::string& tmp) {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << "frame,vad\n";
        for (size_t k = 0; k < frames[0].size(); ++k) {
            Background b = states[0].observe(frames[0][k]);
            for (size_t c = 1; c < states.size(); ++c)
                b = combine_vad(b, states[c].observe(frames[c][k]));
            f << k << ','
              << (b == Background::Voice ? "voice" : b == Background::Noise ? "noise" : "quiet")
              << '\n';
        }
    });
    return 0;
}

struct EvalArgs {
    std::string clean, noisy, enhanced, out;
    std::string metrics = "segsnr,we,le,wc";
};

int run_eval(const EvalArgs& a) {
    const AudioBuffer clean = read_wav(a.clean);
    const AudioBuffer noisy = read_wav(a.noisy);
    const AudioBuffer enhanced = read_wav(a.enhanced);
    if (clean.channels.size() != noisy.channels.size() ||
        clean.channels.size() != enhanced.channels.size() || clean.length() != noisy.length() ||
        clean.length() != enhanced.length())
        throw std::runtime_error("eval: inputs must have matching shape");

    std::vector<std::string> metrics;
    for (size_t pos = 0; pos < a.metrics.size();) {
        size_t comma = a.metrics.find(',', pos);
        if (comma == std::string::npos) comma = a.metrics.size();
        metrics.push_back(a.metrics.substr(pos, comma - pos));
        pos = comma + 1;
    }

    const int frame_len = 256, hop = 128;
    const std::vector<double> window = hann_window(frame_len);
    auto spectra = [&](const std::vector<double>& x) {
        std::vector<Spectrum> out;
        for (const auto& frame : frame_stream(x, frame_len, hop))
            out.push_back(analyze(frame, window));
        return out;
    };

    atomic_write(a.out, [&](const std::string& tmp) {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << "metric,channel,noise_class,azimuth,value\n";
        char buf[64];
        for (size_t c = 0; c < clean.channels.size(); ++c) {
            std::vector<Spectrum> sc, se;
            for (const std::string& m : metrics) {
                double value;
                if (m == "segsnr") {
                    value = segmental_snr_improvement(clean.channels[c], noisy.channels[c],
                                                      enhanced.channels[c]);
                } else {
                    if (sc.empty()) {
                        sc = spectra(clean.channels[c]);
                        se = spectra(enhanced.channels[c]);
                    }
                    value = distortion_metric(sc, se, parse_criterion(m));
                }
                std::snprintf(buf, sizeof buf, "%.9g", value);
                f << m << ',' << c << ",,," << buf << '\n';
            }
        }
    });
    return 0;
}

struct BenchArgs {
    std::string model, input, out;
    int reps = 3;
};

int run_bench(const BenchArgs& a) {
    auto [g, h] = load_model(a.model);
    const AudioBuffer input = read_wav(a.input);
    if (!input.stereo()) throw std::runtime_error(a.input + ": stereo input required");
    PipelineConfig cfg;
    cfg.model = h.model;
    cfg.sample_rate = input.sample_rate;
    const BenchResult result = bench_modes(cfg, g, h, input, a.reps);
    atomic_write(a.out, [&](const std::string& tmp) { write_bench_report(tmp, result); });
    return 0;
}

struct HrirArgs {
    std::string out_left, out_right;
    double azimuth = 0.0;
    int rate = 22050;
};

int run_gen_hrir(const HrirArgs& a) {
    const HrirPair hrir = synth_hrir(a.azimuth, a.rate);
    atomic_write(a.out_left, [&](const std::string& tmp) {
        write_hrir_channel(tmp, hrir.left, hrir.sample_rate, hrir.azimuth_deg);
    });
    atomic_write(a.out_right, [&](const std::string& tmp) {
        write_hrir_channel(tmp, hrir.right, hrir.sample_rate, hrir.azimuth_deg);
    });
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"bilateral speech enhancement toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a gain model from a corpus");
    train->add_option("--clean-dir", train_args.clean_dir)->required();
    train->add_option("--noise-dir", train_args.noise_dir)->required();
    train->add_option("--criterion", train_args.criterion)
        ->check(CLI::IsMember({"we", "le", "wc"}));
    train->add_option("--method", train_args.method)
        ->check(CLI::IsMember({"quasistatic", "gradient"}));
    train->add_option("--hrtf", train_args.hrtf)->check(CLI::IsMember({"tdoa", "ipd"}));
    train->add_option("--beta", train_args.beta);
    train->add_option("--p", train_args.p);
    train->add_option("--snr-db", train_args.snr_db);
    train->add_option("--iters", train_args.iters);
    train->add_option("--azimuths", train_args.azimuths)->delimiter(',');
    train->add_option("--hrir", train_args.hrir);
    train->add_option("--out", train_args.out)->required();
    train->add_option("--trace", train_args.trace);
    train->add_option("--seed", train_args.seed);
    train->add_option("--music-dir", train_args.music_dir);
    train->add_option("--class", train_args.class_dirs);
    train->add_option("--gmm-out", train_args.gmm_out);

    EnhanceArgs enhance_args;
    CLI::App* enhance = app.add_subcommand("enhance", "enhance a stereo recording");
    enhance->add_option("--model", enhance_args.model)->required();
    enhance->add_option("--gmm-bundle", enhance_args.bundle);
    enhance->add_option("--input", enhance_args.input)->required();
    enhance->add_option("--output", enhance_args.output)->required();
    enhance->add_option("--log", enhance_args.log);

    ClassifyArgs classify_args;
    CLI::App* classify = app.add_subcommand("classify", "classify background environment");
    classify->add_option("--gmm-bundle", classify_args.bundle)->required();
    classify->add_option("--input", classify_args.input)->required();
    classify->add_option("--vote", classify_args.vote);
    classify->add_option("--out", classify_args.out)->required();

    VadArgs vad_args;
    CLI::App* vad = app.add_subcommand("vad", "per-frame voice activity decisions");
    vad->add_option("--input", vad_args.input)->required();
    vad->add_option("--kq", vad_args.kq);
    vad->add_option("--out", vad_args.out)->required();

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "objective quality measures");
    eval->add_option("--clean", eval_args.clean)->required();
    eval->add_option("--noisy", eval_args.noisy)->required();
    eval->add_option("--enhanced", eval_args.enhanced)->required();
    eval->add_option("--metrics", eval_args.metrics);
    eval->add_option("--out", eval_args.out)->required();

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "time the suppression architectures");
    bench->add_option("--model", bench_args.model)->required();
    bench->add_option("--input", bench_args.input)->required();
    bench->add_option("--reps", bench_args.reps);
    bench->add_option("--out", bench_args.out)->required();

    HrirArgs hrir_args;
    CLI::App* gen_hrir = app.add_subcommand("gen-hrir", "synthesize a spherical-head hrir pair");
    gen_hrir->add_option("--azimuth", hrir_args.azimuth)->required();
    gen_hrir->add_option("--rate", hrir_args.rate);
    gen_hrir->add_option("--out-left", hrir_args.out_left)->required();
    gen_hrir->add_option("--out-right", hrir_args.out_right)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(train)) return run_train(train_args);
        if (app.got_subcommand(enhance)) return run_enhance(enhance_args);
        if (app.got_subcommand(classify)) return run_classify(classify_args);
        if (app.got_subcommand(vad)) return run_vad(vad_args);
        if (app.got_subcommand(eval)) return run_eval(eval_args);
        if (app.got_subcommand(bench)) return run_bench(bench_args);
        if (app.got_subcommand(gen_hrir)) return run_gen_hrir(hrir_args);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace bise
