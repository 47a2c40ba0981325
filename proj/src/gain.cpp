#include "bise/gain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bise {

namespace {

// Scaled modified Bessel functions e^{-x} I_nu(x), nu in {0, 1}, x >= 0.
// Power series below 20, asymptotic expansion above; both to ~1e-12.
double bessel_ie(int nu, double x) {
    if (x == 0.0) return nu == 0 ? 1.0 : 0.0;
    if (x <= 20.0) {
        const double half = x / 2.0;
        double term = nu == 0 ? 1.0 : half;
        double sum = term;
        for (int k = 1; k < 200; ++k) {
            term *= half * half / (double(k) * (k + nu));
            sum += term;
            if (term < sum * 1e-17) break;
        }
        return sum * std::exp(-x);
    }
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 30; ++k) {
        const double num = mu - double(2 * k - 1) * (2 * k - 1);
        const double next = term * -num / (8.0 * k * x);
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

// Exponential integral E1(x), x > 0: series below 1, continued fraction above.
double expint_e1(double x) {
    if (x <= 0.0) throw std::invalid_argument("expint_e1: x must be positive");
    if (x >= 700.0) return 0.0;
    if (x < 1.0) {
        constexpr double gamma = 0.57721566490153286;
        double sum = -gamma - std::log(x);
        double term = 1.0;
        for (int k = 1; k < 60; ++k) {
            term *= -x / k;
            sum -= term / k;
            if (std::abs(term / k) < 1e-17) break;
        }
        return sum;
    }
    double b = x + 1.0, c = 1e308, d = 1.0 / b, h = d;
    for (int i = 1; i < 200; ++i) {
        const double a = -double(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const double del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x);
}

}  // namespace

std::string criterion_name(Criterion c) {
    switch (c) {
        case Criterion::WE: return "we";
        case Criterion::LE: return "le";
        case Criterion::WC: return "wc";
        case Criterion::Direct: return "direct";
    }
    return "direct";
}

Criterion parse_criterion(const std::string& name) {
    if (name == "we") return Criterion::WE;
    if (name == "le") return Criterion::LE;
    if (name == "wc") return Criterion::WC;
    if (name == "direct") return Criterion::Direct;
    throw std::invalid_argument("unknown criterion: " + name);
}

std::string hrtf_model_name(HrtfModel m) {
    return m == HrtfModel::Tdoa ? "tdoa" : "ipd";
}

HrtfModel parse_hrtf_model(const std::string& name) {
    if (name == "tdoa") return HrtfModel::Tdoa;
    if (name == "ipd") return HrtfModel::Ipd;
    throw std::invalid_argument("unknown hrtf model: " + name);
}

GainTable GainTable::constant(const SnrAxes& axes, double value) {
    GainTable t;
    t.axes = axes;
    t.values.assign(size_t(axes.I) * axes.J, value);
    return t;
}

HrtfGain HrtfGain::tdoa_constant(int L, double tau_max, double value) {
    HrtfGain h;
    h.model = HrtfModel::Tdoa;
    h.L = L;
    h.tau_max = tau_max;
    h.values.assign(L, value);
    return h;
}

HrtfGain HrtfGain::ipd_constant(int Q, int B, double value) {
    HrtfGain h;
    h.model = HrtfModel::Ipd;
    h.Q = Q;
    h.B = B;
    h.values.assign(size_t(Q) * B, value);
    return h;
}

double gain_mmse(double zeta, double xi) {
    if (zeta <= 0.0 || xi <= 0.0) throw std::invalid_argument("gain_mmse: inputs must be positive");
    const double v = zeta * xi / (1.0 + zeta);
    const double phi = (1.0 + v) * bessel_ie(0, v / 2.0) + v * bessel_ie(1, v / 2.0);
    const double g = std::sqrt(std::numbers::pi * v) / (2.0 * xi) * phi;
    return std::clamp(g, 0.0, kGainMax);
}

double gain_log_mmse(double zeta, double xi) {
    if (zeta <= 0.0 || xi <= 0.0)
        throw std::invalid_argument("gain_log_mmse: inputs must be positive");
    const double v = zeta * xi / (1.0 + zeta);
    const double g = zeta / (1.0 + zeta) * std::exp(0.5 * expint_e1(v));
    return std::clamp(g, 0.0, kGainMax);
}

double lookup(const GainTable& table, int i, int j) {
    if (i < 0 || i >= table.axes.I || j < 0 || j >= table.axes.J)
        throw std::out_of_range("lookup: cell index out of range");
    return table.at(i, j);
}

Spectrum apply_suppression(const Spectrum& spectrum, const GainTable& table, SnrState& state) {
    const int bins = spectrum.bins();
    if (int(state.prev_amp.size()) != bins) state.reset(bins);
    Spectrum out = spectrum;
    for (int k = 0; k < bins; ++k) {
        const double lambda = state.noise_at(k);
        const double r = spectrum.mag[k];
        const double xi = posterior_snr(r, lambda);
        const double zeta =
            decision_directed_prior(state.prev_amp[k], r, lambda, state.alpha, state.zeta_min);
        const auto [i, j] = quantize_snr(zeta, xi, table.axes);
        const double amp = table.at(i, j) * r;
        out.mag[k] = amp;
        state.prev_amp[k] = amp;
    }
    return out;
}

Spectrum reconstruct_nonref_tdoa(const Spectrum& enhanced_ref, const HrtfGain& hrtf, int l,
                                 const Spectrum& noisy_nonref) {
    if (hrtf.model != HrtfModel::Tdoa)
        throw std::invalid_argument("reconstruct_nonref_tdoa: wrong model form");
    if (l < 0 || l >= hrtf.L) throw std::out_of_range("reconstruct_nonref_tdoa: delay cell");
    if (noisy_nonref.bins() != enhanced_ref.bins())
        throw std::invalid_argument("reconstruct_nonref_tdoa: bin count mismatch");
    Spectrum out = noisy_nonref;
    for (int k = 0; k < out.bins(); ++k) out.mag[k] = hrtf.at(l) * enhanced_ref.mag[k];
    return out;
}

Spectrum reconstruct_nonref_ipd(const Spectrum& enhanced_ref, const HrtfGain& hrtf,
                                const std::vector<int>& q_per_band,
                                const Spectrum& noisy_nonref) {
    if (hrtf.model != HrtfModel::Ipd)
        throw std::invalid_argument("reconstruct_nonref_ipd: wrong model form");
    if (int(q_per_band.size()) != hrtf.B || hrtf.bands.bands() != hrtf.B)
        throw std::invalid_argument("reconstruct_nonref_ipd: band count mismatch");
    if (noisy_nonref.bins() != enhanced_ref.bins() || hrtf.bands.edges.back() != enhanced_ref.bins())
        throw std::invalid_argument("reconstruct_nonref_ipd: bin count mismatch");
    Spectrum out = noisy_nonref;
    for (int b = 0; b < hrtf.B; ++b) {
        const double g = hrtf.at(q_per_band[b], b);
        for (int k = hrtf.bands.edges[b]; k < hrtf.bands.edges[b + 1]; ++k)
            out.mag[k] = g * enhanced_ref.mag[k];
    }
    return out;
}

long storage_bits(StorageMode mode, long I, long J, long L, long W) {
    switch (mode) {
        case StorageMode::Double: return 2 * I * J * W;
        case StorageMode::PerDirection: return L * I * J * W;
        case StorageMode::Proposed: return (I * J + L) * W;
    }
    return 0;
}

void save_model(const std::string& path, const GainTable& table, const HrtfGain& hrtf) {
    if (long(table.values.size()) != long(table.axes.I) * table.axes.J)
        throw std::invalid_argument("save_model: table dimension mismatch");
    if (long(hrtf.values.size()) != hrtf.cells())
        throw std::invalid_argument("save_model: hrtf dimension mismatch");

    std::ostringstream out;
    out.precision(17);
    out << "gaintab v1\n";
    out << "criterion=" << criterion_name(table.criterion) << "\n";
    out << "p=" << table.p << "\n";
    out << "noise_class=" << table.noise_class << "\n";
    out << "I=" << table.axes.I << "\n";
    out << "J=" << table.axes.J << "\n";
    out << "prior_db_min=" << table.axes.prior_db_min << "\n";
    out << "prior_db_max=" << table.axes.prior_db_max << "\n";
    out << "posterior_db_min=" << table.axes.posterior_db_min << "\n";
    out << "posterior_db_max=" << table.axes.posterior_db_max << "\n";
    out << "hrtf_model=" << hrtf_model_name(hrtf.model) << "\n";
    if (hrtf.model == HrtfModel::Tdoa) {
        out << "L=" << hrtf.L << "\n";
        out << "tau_max=" << hrtf.tau_max << "\n";
    } else {
        out << "Q=" << hrtf.Q << "\n";
        out << "B=" << hrtf.B << "\n";
    }
    out << "\n";
    for (double v : table.values) out << v << "\n";
    out << "\n";
    for (double v : hrtf.values) out << v << "\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot create " + path);
    f << out.str();
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::pair<GainTable, HrtfGain> load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "gaintab v1")
        throw std::runtime_error(path + ": bad model header (expected 'gaintab v1')");

    std::map<std::string, std::string> kv;
    while (std::getline(f, line) && !line.empty()) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(path + ": bad key=value line");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error(path + ": missing key " + key);
        return it->second;
    };

    GainTable table;
    table.criterion = parse_criterion(need("criterion"));
    table.p = std::stoi(need("p"));
    table.noise_class = need("noise_class");
    table.axes.I = std::stoi(need("I"));
    table.axes.J = std::stoi(need("J"));
    table.axes.prior_db_min = std::stod(need("prior_db_min"));
    table.axes.prior_db_max = std::stod(need("prior_db_max"));
    table.axes.posterior_db_min = std::stod(need("posterior_db_min"));
    table.axes.posterior_db_max = std::stod(need("posterior_db_max"));

    HrtfGain hrtf;
    hrtf.model = parse_hrtf_model(need("hrtf_model"));
    long hcells = 0;
    if (hrtf.model == HrtfModel::Tdoa) {
        hrtf.L = std::stoi(need("L"));
        hrtf.tau_max = std::stod(need("tau_max"));
        hcells = hrtf.L;
    } else {
        hrtf.Q = std::stoi(need("Q"));
        hrtf.B = std::stoi(need("B"));
        hcells = long(hrtf.Q) * hrtf.B;
    }
    if (table.axes.I < 1 || table.axes.J < 1 || hcells < 1)
        throw std::runtime_error(path + ": dimension mismatch");

    auto read_block = [&](long count, std::vector<double>& dst, bool expect_blank_end) {
        dst.reserve(count);
        while (long(dst.size()) < count) {
            if (!std::getline(f, line)) throw std::runtime_error(path + ": truncated value block");
            if (line.empty()) throw std::runtime_error(path + ": dimension mismatch");
            const double v = std::stod(line);
            if (!std::isfinite(v)) throw std::runtime_error(path + ": non-finite value");
            dst.push_back(v);
        }
        if (expect_blank_end && std::getline(f, line) && !line.empty())
            throw std::runtime_error(path + ": dimension mismatch");
    };
    read_block(long(table.axes.I) * table.axes.J, table.values, true);
    read_block(hcells, hrtf.values, false);
    if (std::getline(f, line) && !line.empty())
        throw std::runtime_error(path + ": trailing values");
    return {std::move(table), std::move(hrtf)};
}

}  // namespace bise
