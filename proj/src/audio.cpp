#include "bise/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bise {

namespace {

constexpr double kSpeedOfSound = 343.0;

uint32_t read_u32(std::istream& s) {
    unsigned char b[4];
    s.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}

uint16_t read_u16(std::istream& s) {
    unsigned char b[2];
    s.read(reinterpret_cast<char*>(b), 2);
    return b[0] | (b[1] << 8);
}

void write_u32(std::ostream& s, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    s.write(b, 4);
}

void write_u16(std::ostream& s, uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    s.write(b, 2);
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);

    char tag[4];
    f.read(tag, 4);
    if (!f || std::memcmp(tag, "RIFF", 4) != 0)
        throw std::runtime_error(path + ": not a RIFF file");
    read_u32(f);
    f.read(tag, 4);
    if (!f || std::memcmp(tag, "WAVE", 4) != 0)
        throw std::runtime_error(path + ": not a WAVE file");

    int channels = 0, rate = 0, bits = 0, format = 0;
    std::vector<int16_t> data;
    bool have_fmt = false, have_data = false;
    while (f) {
        f.read(tag, 4);
        if (!f) break;
        uint32_t size = read_u32(f);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(f);
            channels = read_u16(f);
            rate = read_u32(f);
            read_u32(f);
            read_u16(f);
            bits = read_u16(f);
            if (size > 16) f.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(size / 2);
            f.read(reinterpret_cast<char*>(data.data()), size / 2 * 2);
            if (!f) throw std::runtime_error(path + ": truncated data chunk");
            have_data = true;
        } else {
            f.seekg(size + (size & 1), std::ios::cur);
            continue;
        }
        if (size & 1) f.seekg(1, std::ios::cur);
    }
    if (!have_fmt || !have_data) throw std::runtime_error(path + ": missing fmt or data chunk");
    if (format != 1 || bits != 16)
        throw std::runtime_error(path + ": only 16-bit PCM is supported");
    if (channels < 1 || channels > 2)
        throw std::runtime_error(path + ": only mono or stereo is supported");
    if (data.empty()) throw std::runtime_error(path + ": zero-length audio");

    AudioBuffer buf;
    buf.sample_rate = rate;
    buf.channels.assign(channels, std::vector<double>(data.size() / channels));
    for (size_t i = 0; i < data.size() / channels; ++i)
        for (int c = 0; c < channels; ++c)
            buf.channels[c][i] = data[i * channels + c] / 32768.0;
    return buf;
}

void write_wav(const std::string& path, const AudioBuffer& buffer) {
    if (buffer.channels.empty() || buffer.length() == 0)
        throw std::runtime_error("write_wav: empty buffer");
    const int channels = int(buffer.channels.size());
    const size_t n = buffer.length();

    std::vector<int16_t> data(n * channels);
    for (size_t i = 0; i < n; ++i) {
        for (int c = 0; c < channels; ++c) {
            double x = buffer.channels[c][i];
            if (std::isnan(x)) throw std::runtime_error("write_wav: NaN sample");
            long v = std::lrint(x * 32768.0);
            v = std::clamp(v, -32768l, 32767l);
            data[i * channels + c] = int16_t(v);
        }
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot create " + path);
    const uint32_t data_bytes = uint32_t(data.size() * 2);
    f.write("RIFF", 4);
    write_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    write_u32(f, 16);
    write_u16(f, 1);
    write_u16(f, uint16_t(channels));
    write_u32(f, uint32_t(buffer.sample_rate));
    write_u32(f, uint32_t(buffer.sample_rate * channels * 2));
    write_u16(f, uint16_t(channels * 2));
    write_u16(f, 16);
    f.write("data", 4);
    write_u32(f, data_bytes);
    f.write(reinterpret_cast<const char*>(data.data()), data_bytes);
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<double> hann_window(int n_samples) {
    // Sampled at half-integer offsets: strictly positive, so normalized
    // overlap-add reconstructs the edges exactly; still sums to 1 at hop n/2.
    std::vector<double> w(n_samples);
    for (int n = 0; n < n_samples; ++n)
        w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (n + 0.5) / n_samples));
    return w;
}

bool check_cola(const std::vector<double>& window, int hop, double tol) {
    const int n = int(window.size());
    if (hop < 1 || hop > n) return false;
    const int frames = 16;
    std::vector<double> sum((frames - 1) * hop + n, 0.0);
    for (int k = 0; k < frames; ++k)
        for (int i = 0; i < n; ++i) sum[k * hop + i] += window[i];
    double mean = 0.0;
    int count = 0;
    for (int i = n; i < (frames - 1) * hop; ++i, ++count) mean += sum[i];
    if (count == 0 || mean <= 0.0) return false;
    mean /= count;
    for (int i = n; i < (frames - 1) * hop; ++i)
        if (std::abs(sum[i] - mean) > tol * mean) return false;
    return true;
}

std::vector<std::vector<double>> frame_stream(const std::vector<double>& x,
                                              int frame_len, int hop) {
    if (x.empty()) throw std::invalid_argument("frame_stream: empty buffer");
    if (frame_len < hop || hop < 1) throw std::invalid_argument("frame_stream: bad frame/hop");
    std::vector<std::vector<double>> frames;
    for (size_t start = 0; start < x.size(); start += hop) {
        std::vector<double> frame(frame_len, 0.0);
        const size_t take = std::min(size_t(frame_len), x.size() - start);
        std::copy(x.begin() + start, x.begin() + start + take, frame.begin());
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<double> overlap_add(const std::vector<std::vector<double>>& frames,
                                int hop, const std::vector<double>& window) {
    if (frames.empty()) return {};
    const int n = int(frames[0].size());
    if (int(window.size()) != n) throw std::invalid_argument("overlap_add: window size mismatch");
    std::vector<double> out((frames.size() - 1) * hop + n, 0.0);
    std::vector<double> denom(out.size(), 0.0);
    for (size_t k = 0; k < frames.size(); ++k) {
        if (int(frames[k].size()) != n) throw std::invalid_argument("overlap_add: ragged frames");
        for (int i = 0; i < n; ++i) {
            out[k * hop + i] += frames[k][i];
            denom[k * hop + i] += window[i];
        }
    }
    for (size_t i = 0; i < out.size(); ++i)
        if (denom[i] > 1e-8) out[i] /= denom[i];
    return out;
}

HrirPair synth_hrir(double azimuth_deg, int sample_rate, double head_radius_m) {
    if (azimuth_deg < -80.0 || azimuth_deg > 80.0)
        throw std::invalid_argument("synth_hrir: azimuth out of [-80, 80]");
    const double theta = std::abs(azimuth_deg) * std::numbers::pi / 180.0;
    const double itd_s = head_radius_m / kSpeedOfSound * (theta + std::sin(theta));
    const int itd = int(std::lround(itd_s * sample_rate));
    const int lead = 1;

    // Far ear: level drops up to 6 dB and a one-pole low-pass steepens with azimuth.
    const double frac = std::abs(azimuth_deg) / 80.0;
    const double far_gain = std::pow(10.0, -6.0 * frac / 20.0);
    const double pole = 0.6 * frac;

    const int len = std::max(64, lead + itd + 40);
    std::vector<double> near_ear(len, 0.0), far_ear(len, 0.0);
    near_ear[lead] = 1.0;
    double acc = far_gain * (1.0 - pole);
    if (pole == 0.0) acc = far_gain;
    for (int n = lead + itd; n < len; ++n) {
        far_ear[n] = acc;
        acc *= pole;
        if (acc == 0.0) break;
    }

    HrirPair h;
    h.sample_rate = sample_rate;
    h.azimuth_deg = azimuth_deg;
    if (azimuth_deg >= 0.0) {
        h.right = near_ear;
        h.left = far_ear;
    } else {
        h.left = near_ear;
        h.right = far_ear;
    }
    return h;
}

namespace {

std::vector<double> convolve(const std::vector<double>& x, const std::vector<double>& h) {
    std::vector<double> y(x.size() + h.size() - 1, 0.0);
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
    return y;
}

}  // namespace

AudioBuffer convolve_hrir(const AudioBuffer& mono, const HrirPair& hrir) {
    if (mono.channels.size() != 1) throw std::invalid_argument("convolve_hrir: input must be mono");
    if (mono.sample_rate != hrir.sample_rate)
        throw std::invalid_argument("convolve_hrir: sample rate mismatch");
    AudioBuffer out;
    out.sample_rate = mono.sample_rate;
    out.channels.push_back(convolve(mono.channels[0], hrir.left));
    out.channels.push_back(convolve(mono.channels[0], hrir.right));
    const size_t n = std::max(out.channels[0].size(), out.channels[1].size());
    out.channels[0].resize(n, 0.0);
    out.channels[1].resize(n, 0.0);
    return out;
}

void write_hrir_channel(const std::string& path, const std::vector<double>& taps,
                        int sample_rate, double azimuth_deg) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot create " + path);
    f << "hrir v1 " << sample_rate << " " << azimuth_deg << "\n";
    f.precision(17);
    for (double t : taps) f << t << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<double> read_hrir_channel(const std::string& path, int& sample_rate,
                                      double& azimuth_deg) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string word, version;
    f >> word >> version;
    if (word != "hrir" || version != "v1")
        throw std::runtime_error(path + ": bad hrir header");
    f >> sample_rate >> azimuth_deg;
    if (!f) throw std::runtime_error(path + ": bad hrir header");
    std::vector<double> taps;
    double v;
    while (f >> v) taps.push_back(v);
    if (taps.empty()) throw std::runtime_error(path + ": no taps");
    return taps;
}

HrirPair read_hrir(const std::string& left_path, const std::string& right_path) {
    HrirPair h;
    int rate_r = 0;
    double az_r = 0.0;
    h.left = read_hrir_channel(left_path, h.sample_rate, h.azimuth_deg);
    h.right = read_hrir_channel(right_path, rate_r, az_r);
    if (rate_r != h.sample_rate)
        throw std::runtime_error("hrir channel sample rates differ");
    return h;
}

}  // namespace bise
