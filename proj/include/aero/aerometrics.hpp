#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aero/errors.hpp"
#include "aero/util.hpp"

namespace aero {

/// Freestream conditions entering the coefficient formulas.
struct FlowConditions {
    double rho;    // air density, kg/m^3
    double u_inf;  // freestream speed, m/s
    double a_ref;  // reference frontal area, m^2
    double p_inf = 0.0;  // freestream pressure, Pa

    void validate() const {
        if (!(rho > 0.0) || !(u_inf > 0.0) || !(a_ref > 0.0)) {
            throw InvalidFlow("flow conditions require rho > 0, u_inf > 0, a_ref > 0");
        }
    }

    double dynamic_pressure() const { return 0.5 * rho * u_inf * u_inf; }
};

/// Aerodynamic coefficient record as stored in the dataset manifest.
struct AeroCoefficients {
    double cd = 0.0;
    double cl = 0.0;
    double cl_f = 0.0;
    double cl_r = 0.0;
    double cm = 0.0;
};

/// C_d = F_d / (1/2 rho u_inf^2 A_ref)
inline double drag_coefficient(double f_d, const FlowConditions& flow) {
    flow.validate();
    return f_d / (flow.dynamic_pressure() * flow.a_ref);
}

/// C_p = (p - p_inf) / (1/2 rho u_inf^2)
inline double pressure_coefficient(double p, const FlowConditions& flow) {
    flow.validate();
    return (p - flow.p_inf) / flow.dynamic_pressure();
}

/// One drag count is a C_d increment of 0.0001.
inline double cd_to_drag_counts(double cd) { return cd * 1e4; }
inline double drag_counts_to_cd(double counts) { return counts * 1e-4; }

/// (1/n) sum (actual - predicted)^2, accumulated in double.
inline double mse(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ShapeMismatch("mse: length mismatch");
    if (actual.empty()) throw EmptyInput("mse: empty input");
    std::vector<double> sq(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) {
        double d = actual[i] - predicted[i];
        sq[i] = d * d;
    }
    return pairwise_sum(sq) / static_cast<double>(actual.size());
}

/// R^2 = 1 - SS_res / SS_tot, with SS_tot about the mean of the actual values.
inline double r_squared(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ShapeMismatch("r_squared: length mismatch");
    if (actual.size() < 2) throw EmptyInput("r_squared: need at least 2 samples");
    double mean = pairwise_sum(actual) / static_cast<double>(actual.size());
    std::vector<double> res(actual.size()), tot(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) {
        double r = actual[i] - predicted[i];
        double t = actual[i] - mean;
        res[i] = r * r;
        tot[i] = t * t;
    }
    double ss_tot = pairwise_sum(tot);
    if (ss_tot == 0.0) throw ZeroVariance("r_squared: actual values are all equal");
    return 1.0 - pairwise_sum(res) / ss_tot;
}

/// 100 * mean(|predicted - actual| / |actual|), in percent.
inline double mean_relative_error(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ShapeMismatch("mean_relative_error: length mismatch");
    if (actual.empty()) throw EmptyInput("mean_relative_error: empty input");
    std::vector<double> rel(actual.size());
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (std::abs(actual[i]) < 1e-12) {
            throw NearZeroActual("mean_relative_error: |actual| below 1e-12 at index " +
                                 std::to_string(i));
        }
        rel[i] = std::abs(predicted[i] - actual[i]) / std::abs(actual[i]);
    }
    return 100.0 * pairwise_sum(rel) / static_cast<double>(actual.size());
}

/// Evaluation bundle for one dataset split, in de-normalized target units.
struct Metrics {
    double mse = 0.0;
    double r2 = 0.0;
    double mean_rel_err_pct = 0.0;
};

inline Metrics compute_metrics(std::span<const double> actual, std::span<const double> predicted) {
    Metrics m;
    m.mse = mse(actual, predicted);
    m.r2 = r_squared(actual, predicted);
    m.mean_rel_err_pct = mean_relative_error(actual, predicted);
    return m;
}

} // namespace aero
