#include "odassim/model_core.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace odassim {

GammaProfile::GammaProfile(const InitialCondition &ic)
    : scale_{ic.prevalence * ic.n0_total}, density_{ic.alpha0, ic.beta0} {
    ic.validate();
}

double GammaProfile::value(double a) const { return scale_ == 0.0 ? 0.0 : scale_ * density_.pdf(a); }

double GammaProfile::derivative(double a) const {
    return scale_ == 0.0 ? 0.0 : scale_ * density_.pdf_derivative(a);
}

GridProfile::GridProfile(const AgeGrid &grid, std::span<const double> values)
    : grid_{grid}, values_(values.begin(), values.end()), slopes_(values.size(), 0.0) {
    grid_.validate();
    if (values_.size() != grid_.n_a) {
        throw std::invalid_argument("grid profile needs one value per grid node");
    }
    const auto n = values_.size();
    const double h = grid_.delta_a;
    std::vector<double> secant(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        secant[j] = (values_[j + 1] - values_[j]) / h;
    }
    if (n == 2) {
        slopes_[0] = slopes_[1] = secant[0];
        return;
    }
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double left = secant[j - 1];
        const double right = secant[j];
        slopes_[j] = (left * right <= 0.0) ? 0.0 : 2.0 / (1.0 / left + 1.0 / right);
    }
    auto end_slope = [](double near, double far) {
        double d = 0.5 * (3.0 * near - far);
        if (d * near <= 0.0) {
            return 0.0;
        }
        if (near * far <= 0.0 && std::abs(d) > 3.0 * std::abs(near)) {
            return 3.0 * near;
        }
        return d;
    };
    slopes_[0] = end_slope(secant[0], secant[1]);
    slopes_[n - 1] = end_slope(secant[n - 2], secant[n - 3]);
}

double GridProfile::value(double a) const {
    const double x = (a - grid_.a0) / grid_.delta_a;
    if (x <= 0.0) {
        return values_.front();
    }
    if (x >= static_cast<double>(values_.size() - 1)) {
        return values_.back();
    }
    const auto i = std::min(static_cast<std::size_t>(x), values_.size() - 2);
    const double s = x - static_cast<double>(i);
    const double h = grid_.delta_a;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * values_[i] + (s3 - 2 * s2 + s) * h * slopes_[i] +
           (-2 * s3 + 3 * s2) * values_[i + 1] + (s3 - s2) * h * slopes_[i + 1];
}

double GridProfile::derivative(double a) const {
    const double x = (a - grid_.a0) / grid_.delta_a;
    if (x <= 0.0 || x >= static_cast<double>(values_.size() - 1)) {
        return 0.0;
    }
    const auto i = std::min(static_cast<std::size_t>(x), values_.size() - 2);
    const double s = x - static_cast<double>(i);
    const double h = grid_.delta_a;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * values_[i] + (3 * s2 - 4 * s + 1) * h * slopes_[i] +
            (-6 * s2 + 6 * s) * values_[i + 1] + (3 * s2 - 2 * s) * h * slopes_[i + 1]) /
           h;
}

} // namespace odassim
