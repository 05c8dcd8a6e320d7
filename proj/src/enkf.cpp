#include "odassim/enkf.h"

#include "odassim/errors.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace odassim {

Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd &members) {
    if (members.cols() == 0) {
        throw std::invalid_argument("empty ensemble");
    }
    return members.rowwise().mean();
}

Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd &x, const Eigen::MatrixXd &z) {
    if (x.cols() != z.cols() || x.cols() < 2) {
        throw std::invalid_argument("cross covariance needs two ensembles of equal size >= 2");
    }
    const Eigen::MatrixXd dx = x.colwise() - ensemble_mean(x);
    const Eigen::MatrixXd dz = z.colwise() - ensemble_mean(z);
    return dx * dz.transpose() / static_cast<double>(x.cols() - 1);
}

Eigen::MatrixXd ensemble_covariance(const Eigen::MatrixXd &members) { return cross_covariance(members, members); }

Eigen::MatrixXd symmetric_solve(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b, bool *used_pseudo_inverse) {
    const double threshold = 1e-12 * std::max(a.trace(), 0.0);
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd d = llt.matrixLLT().diagonal();
        if (d.minCoeff() * d.minCoeff() > threshold) {
            if (used_pseudo_inverse) {
                *used_pseudo_inverse = false;
            }
            return llt.solve(b);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    Eigen::VectorXd inverse = eig.eigenvalues();
    for (Eigen::Index k = 0; k < inverse.size(); ++k) {
        inverse(k) = inverse(k) > threshold && inverse(k) > 0.0 ? 1.0 / inverse(k) : 0.0;
    }
    if (used_pseudo_inverse) {
        *used_pseudo_inverse = true;
    }
    return eig.eigenvectors() * inverse.asDiagonal() * (eig.eigenvectors().transpose() * b);
}

UpdateDiagnostics perturbed_observation_update(Eigen::MatrixXd &x, const Eigen::MatrixXd &z_members,
                                               const Eigen::VectorXd &observation, const Eigen::MatrixXd &r,
                                               const Eigen::MatrixXd &perturbations) {
    const auto p = z_members.rows();
    if (observation.size() != p || r.rows() != p || r.cols() != p || perturbations.rows() != p ||
        perturbations.cols() != x.cols() || z_members.cols() != x.cols()) {
        throw std::invalid_argument("observation dimensions do not match");
    }
    UpdateDiagnostics diag;
    const Eigen::MatrixXd pxz = cross_covariance(x, z_members);
    const Eigen::MatrixXd pzz = ensemble_covariance(z_members) + r;
    // K = P_xz P_zz^{-1}  <=>  K^T = P_zz^{-1} P_xz^T (P_zz symmetric)
    diag.gain = symmetric_solve(pzz, pxz.transpose(), &diag.pseudo_inverse).transpose();
    const Eigen::MatrixXd innovation = (perturbations.colwise() + observation) - z_members;
    x.noalias() += diag.gain * innovation;
    return diag;
}

namespace {

std::uint64_t splitmix(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t member, std::uint64_t step, std::uint64_t purpose)
    : state_{seed} {
    for (std::uint64_t word : {member, step, purpose}) {
        state_ = splitmix(state_) ^ word;
    }
    splitmix(state_);
}

CounterRng::result_type CounterRng::operator()() { return splitmix(state_); }

GaussianNoise::GaussianNoise(const Eigen::MatrixXd &covariance)
    : dimension_{covariance.rows()}, diagonal_{false}, zero_{false} {
    if (covariance.rows() != covariance.cols()) {
        throw std::invalid_argument("covariance must be square");
    }
    if (!covariance.isApprox(covariance.transpose(), 1e-12) && covariance.norm() > 0.0) {
        throw std::domain_error("covariance must be symmetric");
    }
    const Eigen::MatrixXd off = covariance - Eigen::MatrixXd(covariance.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0.0 || dimension_ == 0) {
        if (dimension_ > 0 && covariance.diagonal().minCoeff() < 0.0) {
            throw std::domain_error("covariance has negative variances");
        }
        diagonal_ = true;
        sd_ = covariance.diagonal().cwiseSqrt();
        zero_ = dimension_ == 0 || sd_.maxCoeff() == 0.0;
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
    const auto &values = eig.eigenvalues();
    const double scale = std::max(values.cwiseAbs().maxCoeff(), 0.0);
    const double tolerance = 1e-12 * scale * static_cast<double>(dimension_);
    if (values.minCoeff() < -tolerance) {
        throw std::domain_error("covariance is not positive semidefinite");
    }
    std::vector<Eigen::Index> kept;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (values(k) > tolerance) {
            kept.push_back(k);
        }
    }
    factor_.resize(dimension_, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        factor_.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(kept[c]) * std::sqrt(values(kept[c]));
    }
    zero_ = kept.empty();
}

void GaussianNoise::add_sample(CounterRng &rng, Eigen::Ref<Eigen::VectorXd> target) const {
    if (zero_) {
        return;
    }
    std::normal_distribution<double> normal;
    if (diagonal_) {
        for (Eigen::Index k = 0; k < dimension_; ++k) {
            const double xi = normal(rng);
            target(k) += sd_(k) * xi;
        }
        return;
    }
    Eigen::VectorXd xi(factor_.cols());
    for (Eigen::Index k = 0; k < xi.size(); ++k) {
        xi(k) = normal(rng);
    }
    target.noalias() += factor_ * xi;
}

Eigen::VectorXd GaussianNoise::sample(CounterRng &rng) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension_);
    add_sample(rng, out);
    return out;
}

std::size_t worker_count() {
    if (const char *env = std::getenv("OD_ASSIM_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n >= 1) {
                return static_cast<std::size_t>(n);
            }
        } catch (const std::exception &) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) {
        threads.emplace_back(run);
    }
    run();
    for (auto &t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace odassim
