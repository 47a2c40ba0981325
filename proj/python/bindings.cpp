#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bise/env.hpp"
#include "bise/eval.hpp"
#include "bise/pipeline.hpp"
#include "bise/training.hpp"

namespace py = pybind11;
using namespace bise;

namespace {

StorageMode parse_storage_mode(const std::string& name) {
    if (name == "double") return StorageMode::Double;
    if (name == "per_direction") return StorageMode::PerDirection;
    if (name == "proposed") return StorageMode::Proposed;
    throw std::invalid_argument("unknown storage mode: " + name);
}

std::pair<int, std::vector<std::vector<double>>> py_read_wav(const std::string& path) {
    const AudioBuffer buf = read_wav(path);
    return {buf.sample_rate, buf.channels};
}

void py_write_wav(const std::string& path, int sample_rate,
                  const std::vector<std::vector<double>>& channels) {
    AudioBuffer buf;
    buf.sample_rate = sample_rate;
    buf.channels = channels;
    write_wav(path, buf);
}

std::pair<std::vector<double>, std::vector<double>> py_synth_hrir(double azimuth_deg,
                                                                  int sample_rate) {
    const HrirPair hrir = synth_hrir(azimuth_deg, sample_rate);
    return {hrir.left, hrir.right};
}

std::vector<std::string> py_vad_labels(const std::vector<double>& samples, double k_q) {
    VadParams params;
    params.k_q = k_q;
    VadState state(params);
    std::vector<std::string> labels;
    for (const auto& frame : frame_stream(samples, 256, 128)) {
        const Background b = state.observe(frame);
        labels.push_back(b == Background::Voice ? "voice"
                         : b == Background::Noise ? "noise"
                                                  : "quiet");
    }
    return labels;
}

void py_enhance_file(const std::string& model_path, const std::string& input_path,
                     const std::string& output_path, const std::string& bundle_path,
                     const std::string& log_path) {
    auto [g, h] = load_model(model_path);
    PipelineConfig cfg;
    cfg.model = h.model;

    std::map<std::string, std::pair<GainTable, HrtfGain>> models;
    models.emplace(g.noise_class, std::make_pair(std::move(g), std::move(h)));
    std::optional<ClassifierBundle> bundle;
    if (!bundle_path.empty()) bundle = load_bundle(bundle_path);

    const AudioBuffer input = read_wav(input_path);
    if (!input.stereo()) throw std::runtime_error(input_path + ": stereo input required");
    cfg.sample_rate = input.sample_rate;

    Pipeline pipeline(cfg, std::move(models), std::move(bundle));
    const ProcessResult result = pipeline.process_file(input);
    write_wav(output_path, result.output);
    if (!log_path.empty()) write_decision_log(log_path, result.log);
}

double py_gcc_delay(const std::vector<double>& x, const std::vector<double>& y, int max_lag) {
    return gcc_delay(x, y, max_lag).tau;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "bilateral speech enhancement core";
    m.attr("__version__") = "0.1.0";

    m.def("gain_mmse", &gain_mmse, py::arg("zeta"), py::arg("xi"));
    m.def("gain_log_mmse", &gain_log_mmse, py::arg("zeta"), py::arg("xi"));
    m.def(
        "storage_bits",
        [](const std::string& mode, int i, int j, int l, int w) {
            return storage_bits(parse_storage_mode(mode), i, j, l, w);
        },
        py::arg("mode"), py::arg("i"), py::arg("j"), py::arg("l"), py::arg("w"));

    m.def("read_wav", &py_read_wav, py::arg("path"));
    m.def("write_wav", &py_write_wav, py::arg("path"), py::arg("sample_rate"),
          py::arg("channels"));
    m.def("synth_hrir", &py_synth_hrir, py::arg("azimuth_deg"), py::arg("sample_rate") = 22050);
    m.def("gcc_delay", &py_gcc_delay, py::arg("x"), py::arg("y"), py::arg("max_lag") = 24);

    m.def("segmental_snr", &segmental_snr, py::arg("clean"), py::arg("test"),
          py::arg("frame_len") = 256);
    m.def("segmental_snr_improvement", &segmental_snr_improvement, py::arg("clean"),
          py::arg("noisy"), py::arg("enhanced"), py::arg("frame_len") = 256);
    m.def("quiet_detection_score", &quiet_detection_score, py::arg("truth"), py::arg("decisions"));
    m.def("expected_quality", &expected_quality, py::arg("confusion"), py::arg("quality"),
          py::arg("priors"));
    m.def("suppression_advantage", &suppression_advantage, py::arg("matched"),
          py::arg("mismatched"));

    m.def("vad_labels", &py_vad_labels, py::arg("samples"), py::arg("k_q") = 0.01);
    m.def("enhance_file", &py_enhance_file, py::arg("model_path"), py::arg("input_path"),
          py::arg("output_path"), py::arg("bundle_path") = "", py::arg("log_path") = "");
}
