#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace odassim {

/// Ensemble matrices hold one member per column.
Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd &members);
/// Sample covariance with the 1/(M-1) normalization.
Eigen::MatrixXd ensemble_covariance(const Eigen::MatrixXd &members);
/// Sample cross-covariance of two ensembles with matching member order.
Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd &x, const Eigen::MatrixXd &z);

struct UpdateDiagnostics {
    bool pseudo_inverse = false; ///< P_zz was singular; a thresholded pseudo-inverse was used
    Eigen::MatrixXd gain;
};

/// Perturbed-observation analysis in place:
/// X_i += K (z + eta_i - Z_i), K = P_xz (P_zz + R)^{-1},
/// where P_xz, P_zz come from the forecast ensembles X and Z = h(X) and
/// column i of `perturbations` is eta_i ~ N(0, R).
UpdateDiagnostics perturbed_observation_update(Eigen::MatrixXd &x, const Eigen::MatrixXd &z_members,
                                               const Eigen::VectorXd &observation, const Eigen::MatrixXd &r,
                                               const Eigen::MatrixXd &perturbations);

/// (P + R)^{-1} b by Cholesky, falling back to an eigenvalue pseudo-inverse that
/// drops eigenvalues below 1e-12·trace.
Eigen::MatrixXd symmetric_solve(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b, bool *used_pseudo_inverse);

/// SplitMix64 stream keyed by (seed, member, step, purpose): every member's
/// draws depend only on that key, never on scheduling.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t member, std::uint64_t step, std::uint64_t purpose);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

  private:
    std::uint64_t state_;
};

/// Draws from N(0, C) through a factor L with L Lᵀ = C. Diagonal covariances
/// use the square roots directly; otherwise the eigen-decomposition, keeping
/// only the numerically nonzero modes (so rank-one C costs one normal draw).
class GaussianNoise {
  public:
    explicit GaussianNoise(const Eigen::MatrixXd &covariance);

    Eigen::Index dimension() const noexcept { return dimension_; }
    bool is_zero() const noexcept { return zero_; }
    /// Adds one draw to `target` (length = dimension).
    void add_sample(CounterRng &rng, Eigen::Ref<Eigen::VectorXd> target) const;
    Eigen::VectorXd sample(CounterRng &rng) const;

  private:
    Eigen::Index dimension_;
    bool diagonal_;
    bool zero_;
    Eigen::VectorXd sd_;     // diagonal case
    Eigen::MatrixXd factor_; // general case, dimension × rank
};

/// Worker count: OD_ASSIM_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) across up to worker_count() threads. The first
/// exception thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace odassim
