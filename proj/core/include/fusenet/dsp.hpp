#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace fusenet::dsp {

/// DFT of a real signal (radix-2 when the length is a power of two, direct
/// evaluation otherwise).
std::vector<std::complex<double>> fft_real(const std::vector<double>& x);

struct Spectrum {
    std::vector<double> freq;  // Hz, one-sided
    std::vector<double> power; // bin powers; they sum to ~signal variance
};

/// One-sided Hann-windowed periodogram. The signal mean is removed first and
/// the window power is compensated, so sum(power) tracks the signal variance.
Spectrum periodogram_hann(const std::vector<double>& x, double sample_rate);

/// Sum of periodogram bins with lo <= f < hi.
double band_power(const Spectrum& s, double lo, double hi);

struct Biquad {
    double b0, b1, b2, a1, a2;
};

/// Butterworth sections (order must be even).
std::vector<Biquad> butterworth_lowpass(int order, double cutoff, double sample_rate);
std::vector<Biquad> butterworth_highpass(int order, double cutoff, double sample_rate);
/// High-pass at `low` cascaded with low-pass at `high`, each of `order`.
std::vector<Biquad> butterworth_bandpass(int order, double low, double high, double sample_rate);

/// Single forward pass through a biquad cascade (zero initial state).
std::vector<double> filter(const std::vector<Biquad>& sections, const std::vector<double>& x);

/// Zero-phase forward-backward filtering with odd-reflection edge padding.
std::vector<double> filtfilt(const std::vector<Biquad>& sections, const std::vector<double>& x);

/// Resample to a new rate: anti-alias low-pass (when downsampling) followed by
/// linear interpolation. Identity when the rates match.
std::vector<double> resample(const std::vector<double>& x, double rate_in, double rate_out);

} // namespace fusenet::dsp
