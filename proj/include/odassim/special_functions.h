#pragma once

namespace odassim {

/// log Γ(x) for x > 0. Reentrant (does not touch the global signgam).
double log_gamma(double x);

/// Regularized lower and upper incomplete gamma functions.
struct IncompleteGamma {
    double p; ///< P(s, x) = γ(s, x) / Γ(s)
    double q; ///< Q(s, x) = Γ(s, x) / Γ(s)
};

/// Evaluates P(s, x) and Q(s, x) together; `log_gamma_s` must equal log Γ(s).
/// Series expansion below x = s + 1, Lentz continued fraction above.
IncompleteGamma regularized_incomplete_gamma(double s, double x, double log_gamma_s);
IncompleteGamma regularized_incomplete_gamma(double s, double x);

/// Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt, unregularized. Requires s > 0, x >= 0.
double upper_incomplete_gamma(double s, double x);

/// Gamma density with shape `alpha` and rate `beta`, f(a) = β^α/Γ(α) a^{α-1} e^{-βa}.
double gamma_pdf(double a, double alpha, double beta);

/// Mode (α - 1)/β of the gamma density; requires alpha > 1.
double gamma_mode(double alpha, double beta);

/// ∫_{s_lo}^{s_hi} f(z + offset; α, β) dz via the incomplete gamma identity
/// [Γ(α, β(offset+s_lo)) - Γ(α, β(offset+s_hi))] / Γ(α).
/// `s_hi` may be +infinity.
double influx_integral(double s_lo, double s_hi, double offset, double alpha, double beta);

/// Gamma density with its normalization cached, for hot loops that evaluate
/// one (α, β) pair many times.
class GammaDensity {
  public:
    GammaDensity(double alpha, double beta);

    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }

    double pdf(double a) const;
    /// d/da of pdf: f(a)·((α-1)/a - β).
    double pdf_derivative(double a) const;
    /// P(α, βa), the cumulative distribution function.
    double cdf(double a) const;
    /// ∫_lo^hi f(a) da, choosing the P or Q difference with the least cancellation.
    double integral(double lo, double hi) const;

  private:
    double alpha_;
    double beta_;
    double log_gamma_alpha_;
    double log_norm_; // α log β - log Γ(α)
};

} // namespace odassim
