#ifndef CKR_STATS_HPP
#define CKR_STATS_HPP

#include <cstdint>
#include <vector>

#include "ckr/rng.hpp"
#include "ckr/tensor.hpp"

namespace ckr {

// Gaussian mixture with component weights beta_m, means mu_m and SPD
// covariances; sampling is categorical-then-Gaussian, the log density an
// exact log-sum-exp over components.
class MixtureLaw {
  public:
    MixtureLaw(Vec weights, Matrix means, std::vector<Matrix> covariances);

    std::size_t dim() const { return dim_; }
    std::size_t n_components() const { return weights_.size(); }

    double logpdf(const double* x) const;
    Vec logpdf_rows(const Matrix& x) const;
    Matrix sample(std::size_t n, std::uint64_t seed) const;

    // marginal law of a contiguous coordinate range [lo, hi)
    MixtureLaw marginal(std::size_t lo, std::size_t hi) const;

    const Vec& weights() const { return weights_; }
    const Matrix& means() const { return means_; }
    const std::vector<Matrix>& covariances() const { return covs_; }

  private:
    std::size_t dim_;
    Vec weights_;
    Matrix means_;                 // [m x d]
    std::vector<Matrix> covs_;     // originals, for marginals
    std::vector<Matrix> chols_;    // lower Cholesky factors
    Vec log_norm_;                 // log weight - log((2pi)^{d/2} |L|)
};

// delta = KL(ref || est) / H(ref), both estimated by Monte Carlo on the same
// validation log-density columns (samples drawn from the reference law).
double relative_kl_error(const Vec& ref_logpdf, const Vec& est_logpdf);

// 1-d Gaussian-kernel density estimate with Silverman's bandwidth, optional
// self-normalized importance weights (effective sample size replaces n).
class KdeModel {
  public:
    KdeModel(Vec samples, Vec weights = {});  // empty weights = unweighted
    double bandwidth() const { return bandwidth_; }
    double pdf(double x) const;
    Vec pdf(const Vec& query) const;

  private:
    Vec samples_;
    Vec weights_;  // normalized to sum 1
    double bandwidth_;
};

}  // namespace ckr

#endif
