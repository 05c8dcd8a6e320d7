#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's model code; they share only the input types.

#include "odassim/model_core.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

inline double siler(double a, const odassim::MortalityParams &p) {
    return p.gamma1 * std::exp(-p.lambda1 * a) + p.gamma2 + p.lambda2 * std::exp(p.lambda2 * (a - p.m_shift));
}

inline double gamma_density(double a, double alpha, double beta) {
    if (a <= 0.0) {
        return 0.0;
    }
    return boost::math::pdf(boost::math::gamma_distribution<double>(alpha, 1.0 / beta), a);
}

inline double influx(double a, const odassim::InfluxParams &q) {
    return 0.5 * (q.r1 * gamma_density(a, q.alpha1, q.beta1) + q.r2 * gamma_density(a, q.alpha2, q.beta2));
}

inline double initial(double a, const odassim::InitialCondition &ic) {
    return ic.prevalence * ic.n0_total * gamma_density(a, ic.alpha0, ic.beta0);
}

/// ∫_lo^hi g by adaptive Gauss–Kronrod; hi may be +inf.
inline double integrate(const std::function<double(double)> &g, double lo, double hi, double tol = 1e-13) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lo, hi, 12, tol);
}

/// Snapshot of the upwind solution at one time on ages 0, h, 2h, ...
struct UpwindSnapshot {
    double time;
    std::vector<double> density;
};

/// First-order upwind scheme for (∂t + ∂a) n = -μ(a) n + r(a)(N(a, t) - n),
/// n(0, t) = 0, run with Δt = Δa = h so the transport is exact; the source
/// uses Heun's method along each characteristic. Ages span [0, a_max].
inline std::vector<UpwindSnapshot> upwind(const odassim::ModelParams &p, const odassim::InitialCondition &ic,
                                          const odassim::PopulationSurface &pop, double calendar_origin,
                                          double a_max, double h, const std::vector<double> &snapshot_times) {
    const auto nodes = static_cast<std::size_t>(std::lround(a_max / h)) + 1;
    std::vector<double> n(nodes), mu(nodes), r(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
        const double a = h * static_cast<double>(j);
        n[j] = j == 0 ? 0.0 : initial(a, ic);
        mu[j] = siler(a, p.mortality) + p.mortality.mu_d;
        r[j] = influx(a, p.influx);
    }
    auto source = [&](std::size_t j, double t, double value) {
        const double a = h * static_cast<double>(j);
        return -mu[j] * value + r[j] * (pop.eval(a, calendar_origin + t) - value);
    };
    std::vector<UpwindSnapshot> out;
    const double t_end = snapshot_times.empty() ? 0.0 : *std::max_element(snapshot_times.begin(), snapshot_times.end());
    const auto steps = static_cast<long>(std::lround(t_end / h));
    std::vector<double> next(nodes);
    for (long k = 0; k <= steps; ++k) {
        const double t = h * static_cast<double>(k);
        for (double ts : snapshot_times) {
            if (std::abs(ts - t) < 0.5 * h) {
                out.push_back({ts, n});
            }
        }
        if (k == steps) {
            break;
        }
        next[0] = 0.0;
        for (std::size_t j = 0; j + 1 < nodes; ++j) {
            const double s0 = source(j, t, n[j]);
            const double predictor = n[j] + h * s0;
            next[j + 1] = n[j] + 0.5 * h * (s0 + source(j + 1, t + h, predictor));
        }
        n.swap(next);
    }
    return out;
}

/// Sample covariance by explicit loops, columns are members.
inline Eigen::MatrixXd naive_cross_covariance(const Eigen::MatrixXd &x, const Eigen::MatrixXd &z) {
    const auto m = x.cols();
    Eigen::MatrixXd out(x.rows(), z.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index k = 0; k < z.rows(); ++k) {
            double mx = 0.0, mz = 0.0;
            for (Eigen::Index c = 0; c < m; ++c) {
                mx += x(i, c);
                mz += z(k, c);
            }
            mx /= static_cast<double>(m);
            mz /= static_cast<double>(m);
            double s = 0.0;
            for (Eigen::Index c = 0; c < m; ++c) {
                s += (x(i, c) - mx) * (z(k, c) - mz);
            }
            out(i, k) = s / static_cast<double>(m - 1);
        }
    }
    return out;
}

/// Gini index as the population-weighted mean absolute rate difference over
/// twice the weighted mean rate, by explicit double sum.
inline double gini(const std::vector<double> &deaths, const std::vector<double> &population) {
    double total_pop = 0.0, total_deaths = 0.0;
    for (std::size_t i = 0; i < deaths.size(); ++i) {
        total_pop += population[i];
        total_deaths += deaths[i];
    }
    const double mean_rate = total_deaths / total_pop;
    double s = 0.0;
    for (std::size_t i = 0; i < deaths.size(); ++i) {
        for (std::size_t k = 0; k < deaths.size(); ++k) {
            s += population[i] * population[k] *
                 std::abs(deaths[i] / population[i] - deaths[k] / population[k]);
        }
    }
    return s / (2.0 * total_pop * total_pop * mean_rate);
}

/// Exact scalar Kalman posterior for x ~ N(m, p), z = x + v, v ~ N(0, r).
struct ScalarPosterior {
    double mean;
    double variance;
};

inline ScalarPosterior kalman(double m, double p, double z, double r) {
    const double k = p / (p + r);
    return {m + k * (z - m), (1.0 - k) * p};
}

} // namespace oracle
