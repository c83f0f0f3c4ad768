#ifndef CKR_DDUQ_HPP
#define CKR_DDUQ_HPP

#include <cstdint>

#include "ckr/flow.hpp"
#include "ckr/rng.hpp"
#include "ckr/tensor.hpp"

namespace ckr {

// Multivariate Gaussian proposal p_tau fitted to POD snapshot coefficients
// (sample mean and covariance plus a small diagonal jitter).
class GaussianProposal {
  public:
    GaussianProposal(Vec mean, Matrix covariance, double jitter = 1e-10);

    // Fit from rows of coefficient snapshots; asserts every snapshot lies
    // within 6 standard deviations of the fitted marginal.
    static GaussianProposal fit(const Matrix& snapshots, double jitter = 1e-10);

    std::size_t dim() const { return mean_.size(); }
    Vec sample(Rng& rng) const;
    double logpdf(const double* tau) const;
    double logpdf(const Vec& tau) const { return logpdf(tau.data()); }
    const Vec& mean() const { return mean_; }
    const Matrix& covariance() const { return cov_; }

  private:
    Vec mean_;
    Matrix cov_;
    Matrix chol_;     // lower factor of cov + jitter I
    double log_norm_;
};

struct WeightsResult {
    Vec weights;
    std::size_t clamp_count = 0;
};

// w_s = exp(log pi_hat(tau_s | xi_s) - log p_tau(tau_s)), clamped to
// [0, 1e12] with the clamp count reported.
WeightsResult compute_weights(ConditionalDensity& density, const Matrix& tau, const Matrix& xi,
                              const GaussianProposal& proposal);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// Self-normalized importance-sampling estimators.
Moments weighted_moments(const Vec& y, const Vec& w);
double effective_sample_size(const Vec& w);
// weighted empirical probability of y <= a
double exceedance_probability(const Vec& y, const Vec& w, double a);

struct ErrorMetrics {
    double mean_error = 0.0;      // epsilon_i
    double variance_error = 0.0;  // eta_i
};

ErrorMetrics error_metrics(const Moments& estimate, const Moments& reference);

}  // namespace ckr

#endif
