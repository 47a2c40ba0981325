#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline std::vector<double> white_noise(int n, uint32_t seed, double amp = 1.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    std::vector<double> x(n);
    for (double& v : x) v = dist(gen);
    return x;
}

inline std::vector<double> sine(int n, double freq_hz, int rate, double amp = 1.0,
                                double phase = 0.0) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * M_PI * freq_hz * i / rate + phase);
    return x;
}

// Residual energy of (ref - test) relative to ref, in dB; -300 when exact.
inline double err_db(const std::vector<double>& ref, const std::vector<double>& test) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < ref.size(); ++i) {
        const double d = ref[i] - test[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    if (num <= 0.0) return -300.0;
    if (den <= 0.0) return 300.0;
    return 10.0 * std::log10(num / den);
}

// Scratch directory unique to this process and call site, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        static const unsigned token = std::random_device{}();
        path = std::filesystem::temp_directory_path() /
               ("bise_" + tag + "_" + std::to_string(token) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
