// core.hpp - SEFDM system description
//
// Configuration, constellations and the carrier/Gram matrices shared by the
// transmitter, the receiver front-end and every detector.
//
// Discrete model with symbol period T = 1:
//   X = F S,  f_{k,n} = exp(j 2 pi alpha n k / N) / sqrt(N),  k, n = 0..N-1
//   R = F^H r = M S + F^H n,  M = F^H F

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sefdm {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

// ============================================================================
// Errors
// ============================================================================

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::string_view what, std::size_t got, std::size_t expected)
        : Error(std::string(what) + ": length " + std::to_string(got) + ", expected " +
                std::to_string(expected)) {}
};

// ============================================================================
// Constellation
// ============================================================================

enum class Scheme { QAM4, BPSK };

inline std::string_view to_string(Scheme s) { return s == Scheme::QAM4 ? "qam4" : "bpsk"; }

inline Scheme parse_scheme(std::string_view name) {
    if (name == "qam4" || name == "QAM4" || name == "4qam" || name == "qpsk") return Scheme::QAM4;
    if (name == "bpsk" || name == "BPSK") return Scheme::BPSK;
    throw InvalidConfig("unknown constellation '" + std::string(name) + "'");
}

/**
 * Unit-energy, Gray-labelled constellation.
 *
 * Point i carries bit label i, so labels are the identity permutation and the
 * geometry is arranged to make neighbouring points differ in one bit:
 *   QAM4: label b1 b0 -> (b1 ? -A : A) + j (b0 ? -A : A),  A = 1/sqrt(2)
 *   BPSK: 0 -> +1, 1 -> -1
 *
 * Both schemes are separable per real dimension, which is what the soft
 * decision regions and the real-valued sphere decoder rely on.
 */
class Constellation {
public:
    explicit Constellation(Scheme scheme) : scheme_(scheme) {
        if (scheme == Scheme::QAM4) {
            const double a = std::numbers::sqrt2 / 2.0;
            points_ = {cplx(a, a), cplx(a, -a), cplx(-a, a), cplx(-a, -a)};
            bits_ = 2;
            coord_ = a;
        } else {
            points_ = {cplx(1.0, 0.0), cplx(-1.0, 0.0)};
            bits_ = 1;
            coord_ = 1.0;
        }
    }

    Scheme scheme() const { return scheme_; }
    std::size_t size() const { return points_.size(); }
    int bits_per_symbol() const { return bits_; }
    const std::vector<cplx>& points() const { return points_; }
    cplx point(std::size_t index) const { return points_.at(index); }
    unsigned bit_label(std::size_t index) const { return static_cast<unsigned>(index); }

    /// Magnitude of each non-zero real coordinate (A for QAM4, 1 for BPSK).
    double coordinate() const { return coord_; }

    double average_energy() const {
        double e = 0.0;
        for (const auto& p : points_) e += std::norm(p);
        return e / static_cast<double>(points_.size());
    }

    /// Nearest point; ties go to the smallest index (i.e. towards +A on each axis).
    std::size_t nearest(cplx z) const {
        if (scheme_ == Scheme::BPSK) return z.real() >= 0.0 ? 0 : 1;
        return (z.real() >= 0.0 ? 0u : 2u) + (z.imag() >= 0.0 ? 0u : 1u);
    }

    /**
     * True when z lies in the decision area A_l of its nearest point for
     * parameter d. The undecided zone is the band of half-width d*coordinate()
     * around each decision boundary; d = 0 decides everything.
     */
    bool decided(cplx z, double d) const {
        const double t = d * coord_;
        if (scheme_ == Scheme::BPSK) return std::abs(z.real()) >= t;
        return std::min(std::abs(z.real()), std::abs(z.imag())) >= t;
    }

    /// Values one real or imaginary coordinate of a symbol can take.
    std::vector<double> real_alphabet(bool imaginary) const {
        if (scheme_ == Scheme::BPSK && imaginary) return {0.0};
        return {coord_, -coord_};
    }

private:
    Scheme scheme_;
    std::vector<cplx> points_;
    int bits_ = 0;
    double coord_ = 0.0;
};

inline Constellation make_constellation(Scheme scheme) { return Constellation(scheme); }

// ============================================================================
// SefdmConfig
// ============================================================================

class SefdmConfig {
public:
    SefdmConfig(int n_carriers, double alpha, Scheme scheme = Scheme::QAM4)
        : n_(n_carriers), alpha_(alpha), constellation_(scheme) {
        if (n_carriers < 2) throw InvalidConfig("n_carriers must be >= 2, got " + std::to_string(n_carriers));
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw InvalidConfig("alpha must lie in (0, 1], got " + std::to_string(alpha));
    }

    int n_carriers() const { return n_; }
    double alpha() const { return alpha_; }
    const Constellation& constellation() const { return constellation_; }

    static constexpr double symbol_period = 1.0;
    /// Carrier spacing in units of 1/T.
    double carrier_spacing() const { return alpha_ / symbol_period; }

    /// Q = N/alpha when it is an integer (the zero-padded transform size), else empty.
    std::optional<int> fast_transform_size() const {
        const double q = static_cast<double>(n_) / alpha_;
        const double r = std::round(q);
        if (std::abs(q - r) > 1e-9 * q) return std::nullopt;
        return static_cast<int>(r);
    }

private:
    int n_;
    double alpha_;
    Constellation constellation_;
};

// ============================================================================
// CarrierMatrices
// ============================================================================

struct CarrierMatrices {
    CMatrix f_matrix;
    CMatrix gram;
    double condition_estimate = 1.0;
};

inline CMatrix carrier_f_matrix(int n, double alpha) {
    CMatrix f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < n; ++c) {
            const double phase = 2.0 * std::numbers::pi * alpha * static_cast<double>(c * k) / n;
            f(k, c) = std::polar(scale, phase);
        }
    }
    return f;
}

inline CarrierMatrices carrier_matrix(const SefdmConfig& config) {
    CarrierMatrices out;
    out.f_matrix = carrier_f_matrix(config.n_carriers(), config.alpha());
    out.gram = out.f_matrix.adjoint() * out.f_matrix;
    const Eigen::JacobiSVD<CMatrix> svd(out.gram);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    out.condition_estimate = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
    return out;
}

// ============================================================================
// SefdmSystem
// ============================================================================

/**
 * A configured SEFDM instance: config plus everything precomputed from it.
 * Immutable after construction and safe to share between threads.
 */
class SefdmSystem {
public:
    explicit SefdmSystem(SefdmConfig config)
        : config_(std::move(config)), matrices_(carrier_matrix(config_)) {
        const Eigen::PartialPivLU<CMatrix> lu(matrices_.f_matrix);
        f_rcond_ = lu.rcond();
        if (f_rcond_ >= 1e-12) {
            // W = F^-1 F^-H = M^-1
            const CMatrix f_inv_h = lu.adjoint().solve(CMatrix::Identity(n(), n()));
            zf_filter_ = lu.solve(f_inv_h);
        }
    }

    const SefdmConfig& config() const { return config_; }
    const Constellation& constellation() const { return config_.constellation(); }
    const CarrierMatrices& matrices() const { return matrices_; }
    const CMatrix& f() const { return matrices_.f_matrix; }
    const CMatrix& gram() const { return matrices_.gram; }
    int n() const { return config_.n_carriers(); }
    double alpha() const { return config_.alpha(); }

    /// Reciprocal condition estimate of F from its LU factorization.
    double f_rcond() const { return f_rcond_; }
    /// M^-1, absent when F is numerically singular.
    const std::optional<CMatrix>& zf_filter() const { return zf_filter_; }

private:
    SefdmConfig config_;
    CarrierMatrices matrices_;
    double f_rcond_ = 0.0;
    std::optional<CMatrix> zf_filter_;
};

}  // namespace sefdm
