#include "ckr/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "ckr/util.hpp"

namespace ckr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

MixtureLaw::MixtureLaw(Vec weights, Matrix means, std::vector<Matrix> covariances)
    : dim_(means.cols), weights_(std::move(weights)), means_(std::move(means)),
      covs_(std::move(covariances)) {
    const std::size_t m = weights_.size();
    if (m == 0 || means_.rows != m || covs_.size() != m)
        throw ConfigError("mixture: component count mismatch");
    double wsum = 0.0;
    for (double w : weights_) {
        if (w <= 0) throw ConfigError("mixture: component weights must be positive");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw ConfigError("mixture: component weights must sum to 1");

    for (std::size_t k = 0; k < m; ++k) {
        const Matrix& cov = covs_[k];
        if (cov.rows != dim_ || cov.cols != dim_)
            throw ConfigError("mixture: covariance size mismatch");
        Eigen::MatrixXd c(dim_, dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov(i, j);
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        if (llt.info() != Eigen::Success)
            throw ConfigError("mixture: covariance of component " + std::to_string(k) +
                              " is not positive definite");
        const Eigen::MatrixXd l = llt.matrixL();
        Matrix lm(dim_, dim_);
        double logdet_l = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j <= i; ++j)
                lm(i, j) = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            logdet_l += std::log(lm(i, i));
        }
        chols_.push_back(std::move(lm));
        log_norm_.push_back(std::log(weights_[k]) - 0.5 * static_cast<double>(dim_) * kLog2Pi -
                            logdet_l);
    }
}

double MixtureLaw::logpdf(const double* x) const {
    double best = -std::numeric_limits<double>::infinity();
    Vec terms(weights_.size());
    Vec work(dim_);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        // solve L z = x - mu by forward substitution
        const Matrix& l = chols_[k];
        for (std::size_t i = 0; i < dim_; ++i) {
            double s = x[i] - means_(k, i);
            for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * work[j];
            work[i] = s / l(i, i);
        }
        double quad = 0.0;
        for (double v : work) quad += v * v;
        terms[k] = log_norm_[k] - 0.5 * quad;
        best = std::max(best, terms[k]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
}

Vec MixtureLaw::logpdf_rows(const Matrix& x) const {
    if (x.cols != dim_) throw ConfigError("mixture: query width mismatch");
    Vec out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = logpdf(x.row(i));
    return out;
}

Matrix MixtureLaw::sample(std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    Matrix out(n, dim_);
    Vec z(dim_);
    for (std::size_t s = 0; s < n; ++s) {
        const double u = rng.uniform01();
        std::size_t k = 0;
        double acc = weights_[0];
        while (k + 1 < weights_.size() && u > acc) acc += weights_[++k];
        for (auto& v : z) v = rng.normal();
        const Matrix& l = chols_[k];
        for (std::size_t i = 0; i < dim_; ++i) {
            double v = means_(k, i);
            for (std::size_t j = 0; j <= i; ++j) v += l(i, j) * z[j];
            out(s, i) = v;
        }
    }
    return out;
}

MixtureLaw MixtureLaw::marginal(std::size_t lo, std::size_t hi) const {
    if (lo >= hi || hi > dim_) throw ConfigError("mixture: bad marginal range");
    const std::size_t d = hi - lo;
    Matrix means(weights_.size(), d);
    std::vector<Matrix> covs;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        for (std::size_t j = 0; j < d; ++j) means(k, j) = means_(k, lo + j);
        Matrix c(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) c(i, j) = covs_[k](lo + i, lo + j);
        covs.push_back(std::move(c));
    }
    return MixtureLaw(weights_, std::move(means), std::move(covs));
}

double relative_kl_error(const Vec& ref_logpdf, const Vec& est_logpdf) {
    if (ref_logpdf.size() != est_logpdf.size() || ref_logpdf.empty())
        throw ConfigError("relative_kl_error: mismatched or empty inputs");
    double kl = 0.0, entropy = 0.0;
    for (std::size_t i = 0; i < ref_logpdf.size(); ++i) {
        kl += ref_logpdf[i] - est_logpdf[i];
        entropy -= ref_logpdf[i];
    }
    kl /= static_cast<double>(ref_logpdf.size());
    entropy /= static_cast<double>(ref_logpdf.size());
    if (entropy <= 0.0)
        throw NumericError("relative_kl_error: nonpositive entropy estimate " +
                           std::to_string(entropy));
    return kl / entropy;
}

KdeModel::KdeModel(Vec samples, Vec weights) : samples_(std::move(samples)) {
    const std::size_t n = samples_.size();
    if (n < 2) throw ConfigError("kde: need at least 2 samples");
    if (weights.empty()) weights.assign(n, 1.0);
    if (weights.size() != n) throw ConfigError("kde: weight length mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0 || !std::isfinite(w)) throw ConfigError("kde: weights must be finite and nonnegative");
        wsum += w;
    }
    if (wsum <= 0) throw ConfigError("kde: all weights are zero");
    weights_ = std::move(weights);
    for (auto& w : weights_) w /= wsum;

    // weighted moments and quartiles
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += weights_[i] * samples_[i];
    double var = 0.0, w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        var += weights_[i] * (samples_[i] - mean) * (samples_[i] - mean);
        w2 += weights_[i] * weights_[i];
    }
    const double n_eff = 1.0 / w2;  // ESS of the normalized weights

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [this](std::size_t a, std::size_t b) { return samples_[a] < samples_[b]; });
    auto weighted_quantile = [&](double q) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += weights_[order[k]];
            if (acc >= q) return samples_[order[k]];
        }
        return samples_[order[n - 1]];
    };
    const double iqr = weighted_quantile(0.75) - weighted_quantile(0.25);
    const double sd = std::sqrt(var);
    double spread = sd;
    if (iqr > 0) spread = std::min(spread, iqr / 1.34);
    bandwidth_ = 0.9 * spread * std::pow(n_eff, -0.2);
    if (!(bandwidth_ > 0))
        throw NumericError("kde: zero bandwidth (all samples identical)");
}

double KdeModel::pdf(double x) const {
    const double inv_h = 1.0 / bandwidth_;
    const double norm = inv_h / std::sqrt(2.0 * M_PI);
    double s = 0.0;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const double z = (x - samples_[i]) * inv_h;
        s += weights_[i] * std::exp(-0.5 * z * z);
    }
    return s * norm;
}

Vec KdeModel::pdf(const Vec& query) const {
    Vec out(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) out[i] = pdf(query[i]);
    return out;
}

}  // namespace ckr
