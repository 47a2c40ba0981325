#pragma once

#include <string>
#include <vector>

namespace bise {

// Time-domain audio, normalized to [-1, 1]. One or two channels of equal length.
struct AudioBuffer {
    int sample_rate = 0;
    std::vector<std::vector<double>> channels;

    size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
    bool stereo() const { return channels.size() == 2; }
};

AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& buffer);

// Hann window sampled at half-integer offsets,
// w[n] = 0.5 (1 - cos(2 pi (n + 0.5) / n_samples)); strictly positive and
// overlap-adds to a constant at hop n_samples / 2.
std::vector<double> hann_window(int n_samples);

// True when the window overlap-add sum is constant across interior samples at this hop.
bool check_cola(const std::vector<double>& window, int hop, double tol = 1e-6);

// Frame k covers [k*hop, k*hop + frame_len); the tail is zero padded.
std::vector<std::vector<double>> frame_stream(const std::vector<double>& x,
                                              int frame_len, int hop);

// Adds pre-windowed frames at hop offsets and divides by the window overlap sum.
std::vector<double> overlap_add(const std::vector<std::vector<double>>& frames,
                                int hop, const std::vector<double>& window);

// One head-related impulse response per ear.
struct HrirPair {
    int sample_rate = 0;
    double azimuth_deg = 0.0;
    std::vector<double> left, right;
};

// Spherical-head model: interaural delay tau = (a/c) (theta + sin theta), the far
// ear attenuated and low-passed harder as |azimuth| grows. Positive azimuth is to
// the right, so the right ear leads there.
HrirPair synth_hrir(double azimuth_deg, int sample_rate, double head_radius_m = 0.0875);

AudioBuffer convolve_hrir(const AudioBuffer& mono, const HrirPair& hrir);

// Text format: header "hrir v1 <sample_rate> <azimuth_deg>", one tap per line.
void write_hrir_channel(const std::string& path, const std::vector<double>& taps,
                        int sample_rate, double azimuth_deg);
std::vector<double> read_hrir_channel(const std::string& path, int& sample_rate,
                                      double& azimuth_deg);
HrirPair read_hrir(const std::string& left_path, const std::string& right_path);

}  // namespace bise
