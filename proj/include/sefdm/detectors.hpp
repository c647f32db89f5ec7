// detectors.hpp - SEFDM symbol detectors
//
//   zf_detect       initial linear estimate followed by a hard decision
//   iterate_detect  relaxed fixed-point iteration with soft decisions
//   ml_detect       exhaustive search over all L^N candidates
//   sphere_detect   regularized real-valued Schnorr-Euchner sphere decoder
//
// All detectors are pure functions of (R, system, options).

#pragma once

#include "sefdm/core.hpp"
#include "sefdm/op_count.hpp"
#include "sefdm/txrx.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sefdm {

class IllConditioned : public Error {
public:
    IllConditioned(int n, double alpha, double rcond)
        : Error("carrier matrix is numerically singular (N=" + std::to_string(n) +
                ", alpha=" + std::to_string(alpha) + ", rcond=" + std::to_string(rcond) + ")") {}
};

class SearchSpaceTooLarge : public Error {
public:
    using Error::Error;
};

class FactorizationFailed : public Error {
public:
    using Error::Error;
};

// ============================================================================
// Results
// ============================================================================

struct DetectorResult {
    CVector symbols;                 ///< detected constellation points
    std::vector<int> indices;        ///< constellation index (= bit label) per symbol
    CVector raw;                     ///< final pre-decision vector
    int iterations_used = 0;
    std::vector<int> per_iteration_undecided;
    std::optional<OpCount> op_counts;        ///< total for the call, if counted
    std::vector<OpCount> per_iteration_ops;  ///< iterative detector only
    std::optional<double> metric;            ///< ||R - M S||^2 of the decision
    std::uint64_t visited_nodes = 0;         ///< sphere decoder only
};

/// ||R - M S||^2
inline double residual_metric(const CorrelatorOutput& r, const SefdmSystem& sys, const CVector& s) {
    return (r.r - sys.gram() * s).squaredNorm();
}

namespace detail {

inline void hard_decide(const Constellation& c, const CVector& raw, DetectorResult& out) {
    out.symbols.resize(raw.size());
    out.indices.resize(static_cast<std::size_t>(raw.size()));
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        const auto idx = c.nearest(raw(i));
        out.indices[static_cast<std::size_t>(i)] = static_cast<int>(idx);
        out.symbols(i) = c.point(idx);
    }
}

}  // namespace detail

// ============================================================================
// Initial estimate
// ============================================================================

/**
 * Zero-forcing estimate S0 = M^-1 R, identical to F^-1 applied to the received
 * samples. Applied as the precomputed filter held by the system.
 */
inline CVector initial_estimate(const CorrelatorOutput& r, const SefdmSystem& sys,
                                OpCount* ops = nullptr) {
    detail::check_length("initial_estimate", r.r.size(), sys.n());
    if (!sys.zf_filter()) throw IllConditioned(sys.n(), sys.alpha(), sys.f_rcond());
    if (ops) *ops += ops::matvec(sys.n());
    return *sys.zf_filter() * r.r;
}

inline DetectorResult zf_detect(const CorrelatorOutput& r, const SefdmSystem& sys) {
    DetectorResult out;
    OpCount count;
    out.raw = initial_estimate(r, sys, &count);
    detail::hard_decide(sys.constellation(), out.raw, out);
    count += ops::comparisons(static_cast<double>(sys.n() * sys.constellation().size()));
    out.op_counts = count;
    out.metric = residual_metric(r, sys, out.symbols);
    return out;
}

// ============================================================================
// Soft mapping
// ============================================================================

struct MappingRegion {
    const Constellation& constellation;
    double d = 0.0;
};

/**
 * Entries inside a decision area A_l are replaced by C_l, the rest pass
 * through unchanged. `undecided` receives the number of pass-through entries.
 */
inline CVector soft_map(const CVector& s, const MappingRegion& region, int* undecided = nullptr) {
    if (region.d < 0.0) throw InvalidConfig("mapping parameter d must be >= 0");
    CVector out = s;
    int left = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (region.constellation.decided(s(i), region.d))
            out(i) = region.constellation.point(region.constellation.nearest(s(i)));
        else
            ++left;
    }
    if (undecided) *undecided = left;
    return out;
}

// ============================================================================
// Iterative detector
// ============================================================================

enum class Schedule { LinearDecreasing, Constant };

enum class IterationStart {
    ZeroForcing,  ///< start from initial_estimate
    Matched,      ///< start from R itself
};

struct IterativeConfig {
    double lambda = 1.0;
    int max_iterations = 10;
    double d_start = 1.0;
    double d_end = 0.0;
    Schedule schedule = Schedule::LinearDecreasing;
    bool mapping_enabled = true;
    bool freeze_decided = false;
    IterationStart start = IterationStart::ZeroForcing;
    TransformPath path = TransformPath::Auto;

    void validate() const {
        if (!(lambda > 0.0)) throw InvalidConfig("lambda must be > 0");
        if (max_iterations < 1) throw InvalidConfig("max_iterations must be >= 1");
        if (!(d_end >= 0.0 && d_end <= d_start)) throw InvalidConfig("need 0 <= d_end <= d_start");
    }

    /// Hard decision after every iteration.
    static IterativeConfig hard(int iterations) {
        IterativeConfig c;
        c.max_iterations = iterations;
        c.d_start = c.d_end = 0.0;
        c.schedule = Schedule::Constant;
        return c;
    }

    /// Plain relaxed iteration, single hard decision at the end.
    static IterativeConfig unmapped(int iterations) {
        IterativeConfig c;
        c.max_iterations = iterations;
        c.mapping_enabled = false;
        return c;
    }
};

inline double d_schedule(int iteration, const IterativeConfig& cfg) {
    if (iteration < 1 || iteration > cfg.max_iterations)
        throw InvalidConfig("iteration " + std::to_string(iteration) + " outside 1.." +
                            std::to_string(cfg.max_iterations));
    if (cfg.schedule == Schedule::Constant) return cfg.d_start;
    if (cfg.max_iterations == 1) return cfg.d_end;
    const double t = static_cast<double>(iteration - 1) / static_cast<double>(cfg.max_iterations - 1);
    return cfg.d_start + (cfg.d_end - cfg.d_start) * t;
}

/**
 * S_n = Q_d( lambda R + (I - lambda M) S_{n-1} ),  n = 1..max_iterations
 *
 * R = M S + noise is the interference-distorted observation; its fixed point
 * without mapping is the zero-forcing solution. Q_d is soft_map with d taken
 * from the schedule, and the last iterate is hard-mapped.
 *
 * With integer N/alpha the product M S runs as one zero-padded Q-point
 * IFFT/FFT pair, the two 1/sqrt(N) factors folded into lambda.
 */
inline DetectorResult iterate_detect(const CorrelatorOutput& r, const SefdmSystem& sys,
                                     const IterativeConfig& cfg) {
    cfg.validate();
    detail::check_length("iterate_detect", r.r.size(), sys.n());
    const int n = sys.n();
    const auto& cons = sys.constellation();
    const double nl = static_cast<double>(n) * static_cast<double>(cons.size());

    DetectorResult out;
    OpCount total;

    CVector s = cfg.start == IterationStart::ZeroForcing ? initial_estimate(r, sys, &total) : r.r;
    const CVector lambda_r = cfg.lambda * r.r;
    total += ops::real_scale(n);

    const bool fast = detail::use_fast(sys, cfg.path);
    std::optional<FastCarrierTransform> transform;
    CMatrix lambda_m;
    if (fast) {
        transform.emplace(n, *sys.config().fast_transform_size());
    } else {
        lambda_m = cfg.lambda * sys.gram();
        total += ops::real_scale(static_cast<double>(n) * n);
    }
    const double fast_scale = cfg.lambda / static_cast<double>(n);

    std::vector<bool> frozen(static_cast<std::size_t>(n), false);
    CVector g(n);
    CVector y(n);
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        OpCount step;
        if (fast) {
            transform->gram_unscaled(s, g);
            y = s - fast_scale * g + lambda_r;
            step += ops::transform_pair(transform->q());
            step += ops::real_scale(n) + ops::complex_add(2.0 * n);
        } else {
            y.noalias() = lambda_m * s;
            y = s - y + lambda_r;
            step += ops::matvec(n) + ops::complex_add(2.0 * n);
        }

        const double d = d_schedule(it, cfg);
        int undecided = 0;
        if (cfg.mapping_enabled) {
            for (int i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(i);
                if (cfg.freeze_decided && frozen[k]) {
                    y(i) = s(i);
                    continue;
                }
                if (cons.decided(y(i), d)) {
                    y(i) = cons.point(cons.nearest(y(i)));
                    frozen[k] = true;
                } else {
                    ++undecided;
                }
            }
            step += ops::comparisons(nl);
        } else {
            for (int i = 0; i < n; ++i) undecided += cons.decided(y(i), d) ? 0 : 1;
        }
        s.swap(y);
        out.per_iteration_undecided.push_back(undecided);
        out.per_iteration_ops.push_back(step);
        total += step;
    }

    out.iterations_used = cfg.max_iterations;
    out.raw = s;
    detail::hard_decide(cons, s, out);
    total += ops::comparisons(nl);
    out.op_counts = total;
    out.metric = residual_metric(r, sys, out.symbols);
    return out;
}

// ============================================================================
// Maximum likelihood (exhaustive)
// ============================================================================

struct MlConfig {
    std::uint64_t max_candidates = std::uint64_t{1} << 24;
};

/**
 * argmin over all L^N candidates of ||R - M S||^2. Candidates are visited in
 * increasing base-L index with symbol 0 most significant; only a strictly
 * smaller metric replaces the incumbent, so ties resolve to the smallest index.
 */
inline DetectorResult ml_detect(const CorrelatorOutput& r, const SefdmSystem& sys,
                                const MlConfig& cfg = {}) {
    detail::check_length("ml_detect", r.r.size(), sys.n());
    const int n = sys.n();
    const auto& cons = sys.constellation();
    const auto l = static_cast<int>(cons.size());

    std::uint64_t count = 1;
    for (int i = 0; i < n; ++i) {
        if (count > cfg.max_candidates / static_cast<std::uint64_t>(l))
            throw SearchSpaceTooLarge("L^N = " + std::to_string(l) + "^" + std::to_string(n) +
                                      " exceeds the exhaustive-search cap of " +
                                      std::to_string(cfg.max_candidates));
        count *= static_cast<std::uint64_t>(l);
    }

    // Columns of M pre-multiplied by every constellation point.
    std::vector<CVector> scaled(static_cast<std::size_t>(n * l));
    for (int c = 0; c < n; ++c)
        for (int p = 0; p < l; ++p) scaled[static_cast<std::size_t>(c * l + p)] = sys.gram().col(c) * cons.point(p);

    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    std::vector<int> best_digits = digits;
    double best = std::numeric_limits<double>::infinity();
    CVector ms(n);
    for (std::uint64_t cand = 0; cand < count; ++cand) {
        ms = scaled[static_cast<std::size_t>(digits[0])];
        for (int c = 1; c < n; ++c) ms += scaled[static_cast<std::size_t>(c * l + digits[static_cast<std::size_t>(c)])];
        const double metric = (r.r - ms).squaredNorm();
        if (metric < best) {
            best = metric;
            best_digits = digits;
        }
        for (int pos = n - 1; pos >= 0; --pos) {
            auto& dgt = digits[static_cast<std::size_t>(pos)];
            if (++dgt < l) break;
            dgt = 0;
        }
    }

    DetectorResult out;
    out.indices = best_digits;
    out.symbols.resize(n);
    for (int i = 0; i < n; ++i) out.symbols(i) = cons.point(static_cast<std::size_t>(best_digits[static_cast<std::size_t>(i)]));
    out.raw = out.symbols;
    out.metric = residual_metric(r, sys, out.symbols);

    const double nn = n;
    OpCount per_candidate = ops::complex_add(nn * (nn - 1.0))  // sum of scaled columns
                            + ops::complex_add(nn)             // residual
                            + OpCount{2.0 * nn - 1.0, 2.0 * nn}  // squared norm
                            + ops::comparisons(1);
    out.op_counts = ops::complex_mul(nn * nn * l) + static_cast<double>(count) * per_candidate;
    return out;
}

// ============================================================================
// Sphere decoder
// ============================================================================

enum class RadiusPolicy {
    ZeroForcingPoint,  ///< radius = metric of the hard-decided initial estimate
    Unbounded,
};

struct SphereConfig {
    double epsilon = 0.0;
    RadiusPolicy initial_radius = RadiusPolicy::ZeroForcingPoint;
};

/**
 * Minimizes ||R - M S||^2 + epsilon ||S||^2 over the constellation lattice.
 *
 * With G = M^H M + epsilon I and z = G^-1 M^H R the objective equals
 * (S - z)^H G (S - z) + const. Written over the 2N real coordinates
 * x = [Re S; Im S] the Gram becomes [[Re G, -Im G], [Im G, Re G]] = U^T U,
 * and the search is a depth-first Schnorr-Euchner enumeration of
 * ||U (x - z)||^2 from the last coordinate to the first, shrinking the
 * radius at every improved leaf. For QAM4 and BPSK ||S||^2 is constant, so
 * epsilon leaves the minimizer unchanged and only conditions the factor.
 *
 * Factorization happens once per instance; search() is const and re-entrant.
 */
class SphereDecoder {
public:
    SphereDecoder(const SefdmSystem& sys, SphereConfig cfg) : sys_(sys), cfg_(cfg) {
        if (cfg.epsilon < 0.0) throw InvalidConfig("epsilon must be >= 0");
        const int n = sys.n();
        const int dim = 2 * n;
        CMatrix g = sys.gram().adjoint() * sys.gram();
        g.diagonal().array() += cfg.epsilon;
        RMatrix gr(dim, dim);
        gr.topLeftCorner(n, n) = g.real();
        gr.topRightCorner(n, n) = -g.imag();
        gr.bottomLeftCorner(n, n) = g.imag();
        gr.bottomRightCorner(n, n) = g.real();
        llt_.compute(gr);
        if (llt_.info() != Eigen::Success)
            throw FactorizationFailed("M^H M + epsilon I is not positive definite (N=" + std::to_string(n) +
                                      ", alpha=" + std::to_string(sys.alpha()) +
                                      ", epsilon=" + std::to_string(cfg.epsilon) + ")");
        u_ = llt_.matrixU();
        for (int k = 0; k < dim; ++k) {
            if (!(u_(k, k) > 0.0)) throw FactorizationFailed("zero pivot in sphere decoder factor");
        }
        const auto& cons = sys.constellation();
        re_alphabet_ = cons.real_alphabet(false);
        im_alphabet_ = cons.real_alphabet(true);
    }

    const SphereConfig& config() const { return cfg_; }

    DetectorResult search(const CorrelatorOutput& r) const {
        detail::check_length("sphere_detect", r.r.size(), sys_.n());
        const int n = sys_.n();
        const int dim = 2 * n;
        const double nd = n;
        const double dd = dim;
        const auto& cons = sys_.constellation();

        State st;
        st.count += ops::matvec(nd);  // M^H R
        const CVector b = sys_.gram().adjoint() * r.r;
        RVector br(dim);
        br.head(n) = b.real();
        br.tail(n) = b.imag();
        st.z = llt_.solve(br);
        st.count += OpCount{2.0 * dd * dd, 2.0 * dd * dd};  // two triangular solves
        st.x.setZero(dim);
        st.best_x.setZero(dim);

        if (cfg_.initial_radius == RadiusPolicy::ZeroForcingPoint && sys_.zf_filter()) {
            const CVector s0 = initial_estimate(r, sys_, &st.count);
            st.count += ops::comparisons(nd * static_cast<double>(cons.size()));
            for (int i = 0; i < n; ++i) {
                const cplx p = cons.point(cons.nearest(s0(i)));
                st.best_x(i) = p.real();
                st.best_x(n + i) = p.imag();
            }
            st.best = (u_.triangularView<Eigen::Upper>() * (st.best_x - st.z)).squaredNorm();
            st.count += OpCount{dd + dd * (dd - 1.0) / 2.0 + dd - 1.0, dd * (dd + 1.0) / 2.0 + dd};
        }

        enumerate(dim - 1, 0.0, st);

        DetectorResult out;
        out.symbols.resize(n);
        out.indices.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const cplx s(st.best_x(i), st.best_x(n + i));
            const auto idx = cons.nearest(s);
            out.indices[static_cast<std::size_t>(i)] = static_cast<int>(idx);
            out.symbols(i) = cons.point(idx);
        }
        out.raw = out.symbols;
        out.visited_nodes = st.visited;
        out.op_counts = st.count;
        out.metric = residual_metric(r, sys_, out.symbols);
        return out;
    }

private:
    struct State {
        RVector z;
        RVector x;
        RVector best_x;
        double best = std::numeric_limits<double>::infinity();
        std::uint64_t visited = 0;
        OpCount count;
    };

    void enumerate(int k, double partial, State& st) const {
        const int dim = static_cast<int>(u_.rows());
        const int n = dim / 2;
        double acc = 0.0;
        for (int j = k + 1; j < dim; ++j) acc += u_(k, j) * (st.x(j) - st.z(j));
        const double ukk = u_(k, k);
        const double center = st.z(k) - acc / ukk;
        st.count += OpCount{2.0 * (dim - 1 - k) + 1.0, (dim - 1.0 - k) + 1.0};

        const auto& alphabet = k < n ? re_alphabet_ : im_alphabet_;
        std::array<double, 2> order{};
        std::size_t m = alphabet.size();
        if (m == 1) {
            order[0] = alphabet[0];
        } else {
            // Schnorr-Euchner order: nearest level first.
            const bool first = std::abs(alphabet[0] - center) <= std::abs(alphabet[1] - center);
            order[0] = first ? alphabet[0] : alphabet[1];
            order[1] = first ? alphabet[1] : alphabet[0];
        }

        for (std::size_t c = 0; c < m; ++c) {
            ++st.visited;
            const double diff = order[c] - center;
            const double next = partial + ukk * ukk * diff * diff;
            st.count += OpCount{3.0, 2.0};
            if (next >= st.best) break;
            st.x(k) = order[c];
            if (k == 0) {
                st.best = next;
                st.best_x = st.x;
            } else {
                enumerate(k - 1, next, st);
            }
        }
    }

    const SefdmSystem& sys_;
    SphereConfig cfg_;
    Eigen::LLT<RMatrix> llt_;
    RMatrix u_;
    std::vector<double> re_alphabet_;
    std::vector<double> im_alphabet_;
};

inline DetectorResult sphere_detect(const CorrelatorOutput& r, const SefdmSystem& sys,
                                    const SphereConfig& cfg = {}) {
    return SphereDecoder(sys, cfg).search(r);
}

}  // namespace sefdm
