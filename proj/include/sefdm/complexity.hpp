// complexity.hpp - predicted and measured operation counts
//
// Predicted counts for one data block of N symbols, Q = N/alpha:
//   ML:                  RA = 2 L^N Q (3 log2 Q + 2 alpha)   RM = 2 L^N Q (log2 Q + alpha)
//   SD:                  as ML with L^N replaced by L^(gamma N)
//   iterative, per step: RA = N (L + 4 + (6/alpha) log2 Q)   RM = N ((2/alpha) log2 Q + 2)

#pragma once

#include "sefdm/detectors.hpp"
#include "sefdm/op_count.hpp"
#include "sefdm/txrx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace sefdm {

enum class Method { ML, SD, IterativePerIteration };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::ML: return "ml";
        case Method::SD: return "sd";
        case Method::IterativePerIteration: return "iterative";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "ml") return Method::ML;
    if (s == "sd") return Method::SD;
    if (s == "iterative") return Method::IterativePerIteration;
    throw InvalidConfig("unknown method '" + std::string(s) + "'");
}

class CountingDisabled : public Error {
public:
    CountingDisabled() : Error("detector ran without operation counting") {}
};

/// `sd_gamma` is the exponent of L^(gamma N); required for Method::SD.
inline OpCount predicted_ops(Method method, int n, double alpha, int l, std::optional<double> sd_gamma = {}) {
    if (n < 2 || !(alpha > 0.0 && alpha <= 1.0) || l < 2)
        throw InvalidConfig("predicted_ops needs N >= 2, 0 < alpha <= 1, L >= 2");
    const double nd = n;
    double q = nd / alpha;
    if (std::abs(q - std::round(q)) < 1e-9 * q) q = std::round(q);
    const double lg = std::log2(q);
    switch (method) {
        case Method::IterativePerIteration:
            // N (L + 4 + (6/alpha) log2 Q), N ((2/alpha) log2 Q + 2), with N/alpha written as Q
            return {nd * (l + 4.0) + 6.0 * q * lg, 2.0 * q * lg + 2.0 * nd};
        case Method::ML:
        case Method::SD: {
            double blocks = std::pow(static_cast<double>(l), nd);
            if (method == Method::SD) {
                if (!sd_gamma) throw InvalidConfig("SD prediction needs a gamma estimate");
                blocks = std::pow(static_cast<double>(l), *sd_gamma * nd);
            }
            return {2.0 * blocks * q * (3.0 * lg + 2.0 * alpha), 2.0 * blocks * q * (lg + alpha)};
        }
    }
    return {};
}

inline OpCount measure_ops(const DetectorResult& run) {
    if (!run.op_counts) throw CountingDisabled();
    return *run.op_counts;
}

/// Measured ops of one iteration; all iterations of a run cost the same.
inline OpCount measure_iteration_ops(const DetectorResult& run) {
    if (!run.op_counts || run.per_iteration_ops.empty()) throw CountingDisabled();
    return run.per_iteration_ops.front();
}

/**
 * Exponent gamma solving L^(gamma N) * c = ops, with c the per-candidate
 * ML cost 2 Q (3 log2 Q + 2 alpha) real additions.
 */
inline double sd_gamma_estimate(double measured_ra, int n, double alpha, int l) {
    const double q = n / alpha;
    const double per_candidate = 2.0 * q * (3.0 * std::log2(q) + 2.0 * alpha);
    return std::log(measured_ra / per_candidate) / (n * std::log(static_cast<double>(l)));
}

/// Published wall-clock SD / single-iteration time ratios, for side-by-side display only.
inline std::optional<double> published_time_ratio(int n, double alpha) {
    struct Row { int n; double alpha; double ratio; };
    static constexpr Row table[] = {
        {4, 0.8, 170},  {4, 0.85, 160},  {4, 0.9, 155},
        {8, 0.8, 710},  {8, 0.85, 645},  {8, 0.9, 640},
        {16, 0.8, 4800}, {16, 0.85, 4250}, {16, 0.9, 4160},
    };
    for (const auto& row : table)
        if (row.n == n && std::abs(row.alpha - alpha) < 1e-9) return row.ratio;
    return std::nullopt;
}

struct ComplexityReport {
    Method method = Method::SD;
    OpCount predicted;
    std::optional<OpCount> measured;
    std::optional<double> ratio_vs_iteration;
    std::optional<double> sd_gamma_estimate;
    double median_visited_nodes = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace detail

/**
 * Runs the sphere decoder on `trials` random blocks and compares its median
 * counted cost against one iteration of the iterative detector. The ratio
 * is the counted-operation analogue of an SD-over-one-iteration time ratio.
 */
inline ComplexityReport sd_complexity_report(const SefdmSystem& sys, double snr_db, int trials,
                                             std::uint64_t seed, double epsilon) {
    const auto noise = NoiseModel::from_snr_db(snr_db);
    const auto& cons = sys.constellation();
    const SphereDecoder sd(sys, SphereConfig{epsilon});
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, cons.size() - 1);

    std::vector<double> ra, rm, nodes;
    CVector s(sys.n());
    for (int t = 0; t < trials; ++t) {
        for (int i = 0; i < sys.n(); ++i) s(i) = cons.point(pick(rng));
        const auto r = correlate(add_awgn(modulate(s, sys), noise, rng), sys);
        const auto res = sd.search(r);
        const auto m = measure_ops(res);
        ra.push_back(m.real_additions);
        rm.push_back(m.real_multiplications);
        nodes.push_back(static_cast<double>(res.visited_nodes));
    }

    IterativeConfig one;
    one.max_iterations = 1;
    for (int i = 0; i < sys.n(); ++i) s(i) = cons.point(0);
    const auto iter_ops = measure_iteration_ops(iterate_detect(correlate(modulate(s, sys), sys), sys, one));

    ComplexityReport rep;
    rep.method = Method::SD;
    const int l = static_cast<int>(cons.size());
    const OpCount med{detail::median(ra), detail::median(rm)};
    rep.measured = med;
    rep.ratio_vs_iteration = med.real_additions / iter_ops.real_additions;
    rep.sd_gamma_estimate = sd_gamma_estimate(med.real_additions, sys.n(), sys.alpha(), l);
    rep.predicted = predicted_ops(Method::SD, sys.n(), sys.alpha(), l, rep.sd_gamma_estimate);
    rep.median_visited_nodes = detail::median(nodes);
    return rep;
}

}  // namespace sefdm
