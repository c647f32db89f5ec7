// op_count.hpp - real-addition / real-multiplication accounting

#pragma once

#include <cmath>

namespace sefdm {

/**
 * Counts of real additions (RA) and real multiplications (RM).
 *
 * Accounting rules used throughout the detectors:
 *   complex multiply                = 4 RM + 2 RA
 *   complex add / subtract          = 2 RA
 *   real scalar * complex           = 2 RM
 *   Q-point IFFT + Q-point FFT pair = 2 Q log2 Q RM + 6 Q log2 Q RA
 *   one constellation comparison    = 1 RA
 * Values are real because Q log2 Q need not be an integer.
 */
struct OpCount {
    double real_additions = 0.0;
    double real_multiplications = 0.0;

    OpCount& operator+=(const OpCount& o) {
        real_additions += o.real_additions;
        real_multiplications += o.real_multiplications;
        return *this;
    }
    friend OpCount operator+(OpCount a, const OpCount& b) { return a += b; }
    friend OpCount operator*(double k, const OpCount& a) {
        return {k * a.real_additions, k * a.real_multiplications};
    }
    friend bool operator==(const OpCount&, const OpCount&) = default;
};

namespace ops {

inline OpCount complex_mul(double count) { return {2.0 * count, 4.0 * count}; }
inline OpCount complex_add(double count) { return {2.0 * count, 0.0}; }
inline OpCount real_scale(double count) { return {0.0, 2.0 * count}; }
inline OpCount comparisons(double count) { return {count, 0.0}; }

inline OpCount transform_pair(double q) {
    const double qlog = q * std::log2(q);
    return {6.0 * qlog, 2.0 * qlog};
}

/// Dense n x n complex matrix times vector.
inline OpCount matvec(double n) { return complex_mul(n * n) + complex_add(n * (n - 1.0)); }

}  // namespace ops

}  // namespace sefdm
