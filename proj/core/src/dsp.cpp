#include "fusenet/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fusenet/errors.hpp"

namespace fusenet::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace

std::vector<std::complex<double>> fft_real(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    if (is_pow2(n)) {
        std::vector<std::complex<double>> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = {x[i], 0.0};
        fft_inplace(a);
        return a;
    }
    // direct DFT fallback for awkward lengths
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * kPi * static_cast<double>(k * i) / static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

Spectrum periodogram_hann(const std::vector<double>& x, double sample_rate) {
    const std::size_t n = x.size();
    if (n < 2) throw ContractError("periodogram_hann: need at least 2 samples");
    if (sample_rate <= 0) throw ContractError("periodogram_hann: non-positive sample rate");
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(n);
    std::vector<double> xw(n);
    double win_power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                               static_cast<double>(n - 1)));
        xw[i] = (x[i] - m) * w;
        win_power += w * w;
    }
    const auto spec = fft_real(xw);
    const std::size_t half = n / 2 + 1;
    Spectrum out;
    out.freq.resize(half);
    out.power.resize(half);
    const double scl = 1.0 / (static_cast<double>(n) * win_power);
    for (std::size_t k = 0; k < half; ++k) {
        out.freq[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);
        double p = std::norm(spec[k]) * scl;
        const bool interior = k != 0 && !(n % 2 == 0 && k == n / 2);
        if (interior) p *= 2.0;
        out.power[k] = p;
    }
    return out;
}

double band_power(const Spectrum& s, double lo, double hi) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.freq.size(); ++k) {
        if (s.freq[k] >= lo && s.freq[k] < hi) acc += s.power[k];
    }
    return acc;
}

namespace {

std::vector<Biquad> butterworth(int order, double cutoff, double sample_rate, bool highpass) {
    if (order < 2 || order % 2 != 0) {
        throw ConfigError("butterworth: order must be even and >= 2, got " +
                          std::to_string(order));
    }
    if (!(cutoff > 0.0) || !(cutoff < sample_rate / 2.0)) {
        throw ConfigError("butterworth: cutoff " + std::to_string(cutoff) +
                          " Hz outside (0, Nyquist) at fs=" + std::to_string(sample_rate));
    }
    const double w0 = 2.0 * kPi * cutoff / sample_rate;
    const double cw = std::cos(w0), sw = std::sin(w0);
    std::vector<Biquad> sections;
    for (int k = 0; k < order / 2; ++k) {
        const double q = 1.0 / (2.0 * std::sin(kPi * (2.0 * k + 1.0) / (2.0 * order)));
        const double alpha = sw / (2.0 * q);
        const double a0 = 1.0 + alpha;
        Biquad s{};
        if (highpass) {
            s.b0 = (1.0 + cw) / 2.0 / a0;
            s.b1 = -(1.0 + cw) / a0;
            s.b2 = s.b0;
        } else {
            s.b0 = (1.0 - cw) / 2.0 / a0;
            s.b1 = (1.0 - cw) / a0;
            s.b2 = s.b0;
        }
        s.a1 = (-2.0 * cw) / a0;
        s.a2 = (1.0 - alpha) / a0;
        sections.push_back(s);
    }
    return sections;
}

} // namespace

std::vector<Biquad> butterworth_lowpass(int order, double cutoff, double sample_rate) {
    return butterworth(order, cutoff, sample_rate, false);
}

std::vector<Biquad> butterworth_highpass(int order, double cutoff, double sample_rate) {
    return butterworth(order, cutoff, sample_rate, true);
}

std::vector<Biquad> butterworth_bandpass(int order, double low, double high, double sample_rate) {
    if (!(low < high)) {
        throw ConfigError("butterworth_bandpass: low edge " + std::to_string(low) +
                          " must be below high edge " + std::to_string(high));
    }
    auto sections = butterworth_highpass(order, low, sample_rate);
    auto lp = butterworth_lowpass(order, high, sample_rate);
    sections.insert(sections.end(), lp.begin(), lp.end());
    return sections;
}

std::vector<double> filter(const std::vector<Biquad>& sections, const std::vector<double>& x) {
    std::vector<double> y = x;
    for (const auto& s : sections) {
        double z1 = 0.0, z2 = 0.0;
        for (auto& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

std::vector<double> filtfilt(const std::vector<Biquad>& sections, const std::vector<double>& x) {
    if (x.empty()) return {};
    const std::size_t n = x.size();
    const std::size_t pad = std::min(n - 1, 12 * sections.size() + 12);
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
    auto y = filter(sections, ext);
    std::reverse(y.begin(), y.end());
    y = filter(sections, y);
    std::reverse(y.begin(), y.end());
    return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(pad),
                               y.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

std::vector<double> resample(const std::vector<double>& x, double rate_in, double rate_out) {
    if (rate_in <= 0 || rate_out <= 0) throw ConfigError("resample: non-positive rate");
    if (rate_in == rate_out || x.size() < 2) return x;
    std::vector<double> src = x;
    if (rate_out < rate_in) {
        src = filtfilt(butterworth_lowpass(4, 0.45 * rate_out, rate_in), src);
    }
    const double duration = static_cast<double>(x.size()) / rate_in;
    const auto n_out = static_cast<std::size_t>(std::floor(duration * rate_out));
    std::vector<double> out(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        const double t = static_cast<double>(i) * rate_in / rate_out;
        const auto lo = static_cast<std::size_t>(std::floor(t));
        const std::size_t hi = std::min(lo + 1, src.size() - 1);
        const double frac = t - std::floor(t);
        out[i] = (1.0 - frac) * src[lo] + frac * src[hi];
    }
    return out;
}

} // namespace fusenet::dsp
