#include "ckr/randfield.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ckr/util.hpp"

namespace ckr {

KLBasis kl_expand(const FieldConfig& cfg, const Mesh2D& mesh) {
    if (cfg.sigma < 0) throw ConfigError("kl_expand: sigma must be nonnegative");
    if (cfg.corr_len <= 0) throw ConfigError("kl_expand: correlation length must be positive");
    if (cfg.n_modes < 1) throw ConfigError("kl_expand: need at least one mode");
    const std::size_t n = mesh.n_nodes();
    if (cfg.n_modes > n) throw ConfigError("kl_expand: more modes than mesh nodes");

    KLBasis basis;
    basis.weights.resize(n);
    for (std::size_t id = 0; id < n; ++id) {
        const std::size_t ix = id % (mesh.nx + 1);
        const std::size_t iy = id / (mesh.nx + 1);
        const double wx = (ix == 0 || ix == mesh.nx) ? 0.5 * mesh.h : mesh.h;
        const double wy = (iy == 0 || iy == mesh.ny) ? 0.5 * mesh.h : mesh.h;
        basis.weights[id] = wx * wy;
    }

    // weighted covariance kernel B = W^{1/2} C W^{1/2}
    Eigen::MatrixXd b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = mesh.node_x(i), yi = mesh.node_y(i);
        const double swi = std::sqrt(basis.weights[i]);
        for (std::size_t j = 0; j <= i; ++j) {
            const double cov =
                cfg.sigma * cfg.sigma *
                std::exp(-(std::abs(xi - mesh.node_x(j)) + std::abs(yi - mesh.node_y(j))) /
                         cfg.corr_len);
            const double v = swi * std::sqrt(basis.weights[j]) * cov;
            b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            b(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    if (solver.info() != Eigen::Success)
        throw NumericError("kl_expand: eigendecomposition failed (matrix size " +
                           std::to_string(n) + ", max |entry| " + std::to_string(b.cwiseAbs().maxCoeff()) + ")");

    // eigenvalues ascending from Eigen; keep the top n_modes descending
    basis.eigenvalues.resize(cfg.n_modes);
    basis.eigenfunctions.resize(n, cfg.n_modes);
    for (std::size_t m = 0; m < cfg.n_modes; ++m) {
        const auto col = static_cast<Eigen::Index>(n - 1 - m);
        double lambda = solver.eigenvalues()(col);
        if (lambda < -1e-12)
            throw NumericError("kl_expand: significantly negative eigenvalue " +
                               std::to_string(lambda));
        basis.eigenvalues[m] = std::max(lambda, 0.0);
        // a_m(x_i) = v_i / sqrt(w_i); fix the sign by the largest entry
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0) v = -v;
        for (std::size_t i = 0; i < n; ++i)
            basis.eigenfunctions(i, m) = v(static_cast<Eigen::Index>(i)) / std::sqrt(basis.weights[i]);
    }
    return basis;
}

Vec evaluate_field(const KLBasis& basis, const FieldConfig& cfg, const Vec& xi) {
    if (xi.size() != basis.eigenvalues.size())
        throw ConfigError("evaluate_field: xi has " + std::to_string(xi.size()) +
                          " coordinates, basis has " + std::to_string(basis.eigenvalues.size()) +
                          " modes");
    const std::size_t n = basis.eigenfunctions.rows;
    Vec field(n, cfg.mean);
    for (std::size_t m = 0; m < xi.size(); ++m) {
        const double amp = std::sqrt(basis.eigenvalues[m]) * xi[m];
        if (amp == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) field[i] += amp * basis.eigenfunctions(i, m);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(field[i] > 1e-6))
            throw NumericError("evaluate_field: nodal value " + std::to_string(field[i]) +
                               " at node " + std::to_string(i) +
                               " violates the ellipticity floor 1e-6");
    }
    return field;
}

double InputLaw::sample_one(Rng& rng) const {
    for (;;) {
        const double x = stddev * rng.normal();
        if (x >= lo && x <= hi) return x;
    }
}

Vec InputLaw::sample(std::size_t dim, Rng& rng) const {
    Vec out(dim);
    for (auto& v : out) v = sample_one(rng);
    return out;
}

}  // namespace ckr
