#include "odassim/special_functions.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace odassim {

namespace {

constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 100000;

double series_p(double s, double x, double log_gamma_s) {
    double ap = s;
    double term = 1.0 / s;
    double sum = term;
    for (int n = 0; n < kMaxIterations; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEpsilon) {
            break;
        }
    }
    return sum * std::exp(-x + s * std::log(x) - log_gamma_s);
}

// Modified Lentz evaluation of the continued fraction for Q(s, x).
double continued_fraction_q(double s, double x, double log_gamma_s) {
    double b = x + 1.0 - s;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIterations; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        c = b + an / c;
        if (std::abs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEpsilon) {
            break;
        }
    }
    return std::exp(-x + s * std::log(x) - log_gamma_s) * h;
}

} // namespace

double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

IncompleteGamma regularized_incomplete_gamma(double s, double x, double log_gamma_s) {
    if (!(s > 0.0) || !(x >= 0.0)) {
        throw std::domain_error("incomplete gamma requires s > 0 and x >= 0");
    }
    if (x == 0.0) {
        return {0.0, 1.0};
    }
    if (std::isinf(x)) {
        return {1.0, 0.0};
    }
    if (x < s + 1.0) {
        const double p = series_p(s, x, log_gamma_s);
        return {p, 1.0 - p};
    }
    const double q = continued_fraction_q(s, x, log_gamma_s);
    return {1.0 - q, q};
}

IncompleteGamma regularized_incomplete_gamma(double s, double x) {
    if (!(s > 0.0)) {
        throw std::domain_error("incomplete gamma requires s > 0");
    }
    return regularized_incomplete_gamma(s, x, log_gamma(s));
}

double upper_incomplete_gamma(double s, double x) {
    const double lg = log_gamma(s > 0.0 ? s : 1.0);
    return regularized_incomplete_gamma(s, x, lg).q * std::exp(lg);
}

double gamma_pdf(double a, double alpha, double beta) { return GammaDensity(alpha, beta).pdf(a); }

double gamma_mode(double alpha, double beta) {
    if (!(alpha > 1.0) || !(beta > 0.0)) {
        throw std::domain_error("gamma mode requires alpha > 1 and beta > 0");
    }
    return (alpha - 1.0) / beta;
}

double influx_integral(double s_lo, double s_hi, double offset, double alpha, double beta) {
    if (!(s_lo <= s_hi) || !(offset + s_lo >= 0.0)) {
        throw std::domain_error("influx integral requires s_lo <= s_hi and offset + s_lo >= 0");
    }
    return GammaDensity(alpha, beta).integral(offset + s_lo, offset + s_hi);
}

GammaDensity::GammaDensity(double alpha, double beta) : alpha_{alpha}, beta_{beta} {
    if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
        throw std::domain_error("gamma density requires finite alpha > 0 and beta > 0");
    }
    log_gamma_alpha_ = log_gamma(alpha);
    log_norm_ = alpha * std::log(beta) - log_gamma_alpha_;
}

double GammaDensity::pdf(double a) const {
    if (a < 0.0) {
        throw std::domain_error("gamma density evaluated at negative age");
    }
    if (a == 0.0) {
        if (alpha_ < 1.0) {
            return std::numeric_limits<double>::infinity();
        }
        return alpha_ == 1.0 ? beta_ : 0.0;
    }
    return std::exp(log_norm_ + (alpha_ - 1.0) * std::log(a) - beta_ * a);
}

double GammaDensity::pdf_derivative(double a) const {
    if (a < 0.0) {
        throw std::domain_error("gamma density derivative evaluated at negative age");
    }
    if (a == 0.0) {
        if (alpha_ == 1.0) {
            return -beta_ * beta_;
        }
        if (alpha_ < 2.0) {
            throw std::domain_error("gamma density derivative is singular at a = 0 for alpha < 2");
        }
        // f(a) ~ C a^{α-1}: the derivative at the origin is C for α = 2 and 0 beyond.
        return alpha_ == 2.0 ? std::exp(log_norm_) : 0.0;
    }
    return pdf(a) * ((alpha_ - 1.0) / a - beta_);
}

double GammaDensity::cdf(double a) const {
    if (a <= 0.0) {
        return 0.0;
    }
    return regularized_incomplete_gamma(alpha_, beta_ * a, log_gamma_alpha_).p;
}

double GammaDensity::integral(double lo, double hi) const {
    if (!(lo <= hi) || lo < 0.0) {
        throw std::domain_error("gamma integral requires 0 <= lo <= hi");
    }
    if (lo == hi) {
        return 0.0;
    }
    const auto g_lo = regularized_incomplete_gamma(alpha_, beta_ * lo, log_gamma_alpha_);
    const auto g_hi = regularized_incomplete_gamma(alpha_, beta_ * hi, log_gamma_alpha_);
    if (beta_ * lo >= alpha_) {
        return g_lo.q - g_hi.q;
    }
    return g_hi.p - g_lo.p;
}

} // namespace odassim
