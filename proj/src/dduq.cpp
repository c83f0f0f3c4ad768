#include "ckr/dduq.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ckr/util.hpp"

namespace ckr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kWeightClamp = 1e12;
}

GaussianProposal::GaussianProposal(Vec mean, Matrix covariance, double jitter)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
    const std::size_t d = mean_.size();
    if (cov_.rows != d || cov_.cols != d) throw ConfigError("proposal: covariance size mismatch");
    Eigen::MatrixXd c(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov_(i, j);
    c += jitter * Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
        throw NumericError("proposal: covariance is not positive definite even with jitter");
    const Eigen::MatrixXd l = llt.matrixL();
    chol_.resize(d, d);
    double logdet_l = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j)
            chol_(i, j) = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        logdet_l += std::log(chol_(i, i));
    }
    log_norm_ = -0.5 * static_cast<double>(d) * kLog2Pi - logdet_l;
}

GaussianProposal GaussianProposal::fit(const Matrix& snapshots, double jitter) {
    const std::size_t n = snapshots.rows, d = snapshots.cols;
    if (n < 2) throw ConfigError("proposal: need at least 2 snapshots");
    Vec mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += snapshots(i, j);
    for (auto& v : mean) v /= static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b <= a; ++b)
                cov(a, b) += (snapshots(i, a) - mean[a]) * (snapshots(i, b) - mean[b]);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            cov(a, b) /= static_cast<double>(n - 1);
            cov(b, a) = cov(a, b);
        }
    GaussianProposal proposal(std::move(mean), std::move(cov), jitter);
    // support check: every snapshot within 6 marginal standard deviations
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(proposal.cov_(j, j) + jitter);
            if (std::abs(snapshots(i, j) - proposal.mean_[j]) > 6.0 * sd)
                throw NumericError("proposal: snapshot " + std::to_string(i) +
                                   " lies outside 6 standard deviations in coordinate " +
                                   std::to_string(j));
        }
    return proposal;
}

Vec GaussianProposal::sample(Rng& rng) const {
    const std::size_t d = mean_.size();
    Vec z(d), out = mean_;
    for (auto& v : z) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) out[i] += chol_(i, j) * z[j];
    return out;
}

double GaussianProposal::logpdf(const double* tau) const {
    const std::size_t d = mean_.size();
    Vec work(d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = tau[i] - mean_[i];
        for (std::size_t j = 0; j < i; ++j) s -= chol_(i, j) * work[j];
        work[i] = s / chol_(i, i);
    }
    double quad = 0.0;
    for (double v : work) quad += v * v;
    return log_norm_ - 0.5 * quad;
}

WeightsResult compute_weights(ConditionalDensity& density, const Matrix& tau, const Matrix& xi,
                              const GaussianProposal& proposal) {
    if (tau.rows != xi.rows) throw ConfigError("compute_weights: row mismatch");
    const Vec target_ld = density.log_density(tau, xi);
    WeightsResult result;
    result.weights.resize(tau.rows);
    for (std::size_t s = 0; s < tau.rows; ++s) {
        const double lp = proposal.logpdf(tau.row(s));
        const double ld = target_ld[s];
        if (!std::isfinite(ld) || !std::isfinite(lp))
            throw NumericError("compute_weights: non-finite log-density at sample " +
                               std::to_string(s));
        double w = std::exp(ld - lp);
        if (w > kWeightClamp) {
            w = kWeightClamp;
            ++result.clamp_count;
        }
        result.weights[s] = w;
    }
    return result;
}

Moments weighted_moments(const Vec& y, const Vec& w) {
    if (y.size() != w.size() || y.empty()) throw ConfigError("weighted_moments: bad inputs");
    double wsum = 0.0, wy = 0.0;
    for (std::size_t s = 0; s < y.size(); ++s) {
        if (w[s] < 0 || !std::isfinite(w[s]))
            throw NumericError("weighted_moments: invalid weight at sample " + std::to_string(s));
        wsum += w[s];
        wy += w[s] * y[s];
    }
    if (wsum <= 0) throw NumericError("weighted_moments: all weights are zero");
    Moments m;
    m.mean = wy / wsum;
    double wv = 0.0;
    for (std::size_t s = 0; s < y.size(); ++s) wv += w[s] * (y[s] - m.mean) * (y[s] - m.mean);
    m.variance = wv / wsum;
    return m;
}

double effective_sample_size(const Vec& w) {
    double s = 0.0, s2 = 0.0;
    for (double v : w) {
        s += v;
        s2 += v * v;
    }
    if (s <= 0) throw NumericError("effective_sample_size: all weights are zero");
    return s * s / s2;
}

double exceedance_probability(const Vec& y, const Vec& w, double a) {
    if (y.size() != w.size() || y.empty()) throw ConfigError("exceedance_probability: bad inputs");
    double wsum = 0.0, hit = 0.0;
    for (std::size_t s = 0; s < y.size(); ++s) {
        wsum += w[s];
        if (y[s] <= a) hit += w[s];
    }
    if (wsum <= 0) throw NumericError("exceedance_probability: all weights are zero");
    return hit / wsum;
}

ErrorMetrics error_metrics(const Moments& estimate, const Moments& reference) {
    if (reference.mean == 0.0 || reference.variance == 0.0)
        throw NumericError("error_metrics: reference moment is zero");
    ErrorMetrics e;
    e.mean_error = std::abs((estimate.mean - reference.mean) / reference.mean);
    e.variance_error = std::abs((estimate.variance - reference.variance) / reference.variance);
    return e;
}

}  // namespace ckr
