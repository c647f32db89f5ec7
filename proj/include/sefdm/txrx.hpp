// txrx.hpp - transmitter, AWGN channel and correlator-bank receiver
//
// Energy convention: E|S_n|^2 = 1 and the channel adds circularly symmetric
// Gaussian noise of variance sigma2 = 10^(-snr_db/10) per complex time
// sample. The correlator uses the transmit kernels (R = F^H r), so the noise
// in R is coloured with covariance sigma2 * M.

#pragma once

#include "sefdm/core.hpp"

#include <unsupported/Eigen/FFT>

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace sefdm {

struct SampleVector {
    CVector samples;
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t noise_seed = 0;

    std::size_t sample_count() const { return static_cast<std::size_t>(samples.size()); }
};

struct CorrelatorOutput {
    CVector r;
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t noise_seed = 0;
};

struct NoiseModel {
    double snr_db = std::numeric_limits<double>::infinity();
    double sigma2 = 0.0;

    static NoiseModel from_snr_db(double snr_db) { return {snr_db, std::pow(10.0, -snr_db / 10.0)}; }
    static NoiseModel noiseless() { return {}; }
};

/// Es/N0 -> Eb/N0 in dB.
inline double ebn0_db(double esn0_db, int bits_per_symbol) {
    return esn0_db - 10.0 * std::log10(static_cast<double>(bits_per_symbol));
}

enum class TransformPath {
    Direct,  ///< dense F / F^H products
    Fast,    ///< zero-padded Q-point transforms, Q = N/alpha integer
    Auto,    ///< Fast when available, else Direct
};

/**
 * Zero-padded Q-point transforms implementing F and F^H when N/alpha = Q is
 * an integer, since exp(j2 pi alpha n k / N) = exp(j2 pi n k / Q).
 *
 * Holds FFT twiddle caches, so an instance must not be shared between threads.
 */
class FastCarrierTransform {
public:
    FastCarrierTransform(int n, int q) : n_(n), q_(q), in_(q), out_(q) {
        if (q < n) throw InvalidConfig("transform size smaller than carrier count");
        fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    }

    int n() const { return n_; }
    int q() const { return q_; }

    /// sqrt(N) * F * s
    void modulate_unscaled(const CVector& s, CVector& x) {
        load(s);
        fft_.inv(out_, in_);
        store(x);
    }

    /// sqrt(N) * F^H * x
    void correlate_unscaled(const CVector& x, CVector& r) {
        load(x);
        fft_.fwd(out_, in_);
        store(r);
    }

    /// N * M * s, one transform pair.
    void gram_unscaled(const CVector& s, CVector& out) {
        modulate_unscaled(s, work_);
        correlate_unscaled(work_, out);
    }

private:
    void load(const CVector& v) {
        std::fill(in_.begin(), in_.end(), cplx(0.0, 0.0));
        for (int i = 0; i < n_; ++i) in_[static_cast<std::size_t>(i)] = v(i);
    }
    void store(CVector& v) const {
        v.resize(n_);
        for (int i = 0; i < n_; ++i) v(i) = out_[static_cast<std::size_t>(i)];
    }

    int n_;
    int q_;
    Eigen::FFT<double> fft_;
    std::vector<cplx> in_;
    std::vector<cplx> out_;
    CVector work_;
};

namespace detail {

inline bool use_fast(const SefdmSystem& sys, TransformPath path) {
    if (path == TransformPath::Direct) return false;
    const bool available = sys.config().fast_transform_size().has_value();
    if (path == TransformPath::Fast && !available)
        throw InvalidConfig("fast transform path needs integer N/alpha");
    return available;
}

inline void check_length(std::string_view what, Eigen::Index got, int expected) {
    if (got != expected)
        throw DimensionMismatch(what, static_cast<std::size_t>(got), static_cast<std::size_t>(expected));
}

}  // namespace detail

inline SampleVector modulate(const CVector& s, const SefdmSystem& sys,
                             TransformPath path = TransformPath::Direct) {
    detail::check_length("modulate", s.size(), sys.n());
    SampleVector out;
    if (detail::use_fast(sys, path)) {
        FastCarrierTransform t(sys.n(), *sys.config().fast_transform_size());
        t.modulate_unscaled(s, out.samples);
        out.samples /= std::sqrt(static_cast<double>(sys.n()));
    } else {
        out.samples = sys.f() * s;
    }
    return out;
}

/// Adds CN(0, sigma2) noise to every sample using the caller's generator.
template <class Rng>
SampleVector add_awgn(SampleVector x, const NoiseModel& noise, Rng& rng) {
    if (noise.sigma2 < 0.0) throw InvalidConfig("negative noise variance");
    x.snr_db = noise.snr_db;
    if (noise.sigma2 == 0.0) return x;
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise.sigma2 / 2.0));
    for (Eigen::Index k = 0; k < x.samples.size(); ++k) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        x.samples(k) += cplx(re, im);
    }
    return x;
}

inline SampleVector add_awgn(SampleVector x, const NoiseModel& noise, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    x.noise_seed = rng_seed;
    return add_awgn(std::move(x), noise, rng);
}

inline CorrelatorOutput correlate(const SampleVector& x, const SefdmSystem& sys,
                                  TransformPath path = TransformPath::Direct) {
    detail::check_length("correlate", x.samples.size(), sys.n());
    CorrelatorOutput out;
    out.snr_db = x.snr_db;
    out.noise_seed = x.noise_seed;
    if (detail::use_fast(sys, path)) {
        FastCarrierTransform t(sys.n(), *sys.config().fast_transform_size());
        t.correlate_unscaled(x.samples, out.r);
        out.r /= std::sqrt(static_cast<double>(sys.n()));
    } else {
        out.r = sys.f().adjoint() * x.samples;
    }
    return out;
}

}  // namespace sefdm
