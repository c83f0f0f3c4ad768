#include "doctest.h"

#include <cmath>

#include "ckr/randfield.hpp"

using namespace ckr;

TEST_CASE("sigma = 0 gives zero eigenvalues and a constant field") {
    Mesh2D mesh(Rect{0, 0, 1, 1}, 1.0 / 8);
    FieldConfig cfg;
    cfg.mean = 2.0;
    cfg.sigma = 0.0;
    cfg.n_modes = 5;
    const KLBasis basis = kl_expand(cfg, mesh);
    for (double l : basis.eigenvalues) CHECK(l == 0.0);
    Vec xi(5, 0.7);
    const Vec field = evaluate_field(basis, cfg, xi);
    for (double v : field) CHECK(v == 2.0);
}

TEST_CASE("eigenvalue sum equals the trace of the discrete covariance") {
    Mesh2D mesh(Rect{0, 0, 1, 1}, 1.0 / 8);
    FieldConfig cfg;
    cfg.sigma = 0.5;
    cfg.corr_len = 1.0;
    cfg.n_modes = mesh.n_nodes();  // all eigenpairs
    const KLBasis basis = kl_expand(cfg, mesh);
    double sum = 0.0;
    for (double l : basis.eigenvalues) sum += l;
    double trace = 0.0;  // sum_i w_i C(x_i, x_i) = sigma^2 * sum w_i = sigma^2 * area
    for (double w : basis.weights) trace += cfg.sigma * cfg.sigma * w;
    CHECK(std::abs(sum - trace) < 1e-10);
    // non-increasing, nonnegative
    for (std::size_t m = 1; m < basis.eigenvalues.size(); ++m) {
        CHECK(basis.eigenvalues[m] <= basis.eigenvalues[m - 1] + 1e-15);
        CHECK(basis.eigenvalues[m] >= 0.0);
    }
}

TEST_CASE("eigenfunctions are orthonormal under the weighted inner product") {
    Mesh2D mesh(Rect{0, 0, 2, 1}, 1.0 / 8);
    FieldConfig cfg;
    cfg.sigma = 0.5;
    cfg.corr_len = 1.0;
    cfg.n_modes = 14;
    const KLBasis basis = kl_expand(cfg, mesh);
    double worst = 0.0;
    for (std::size_t m = 0; m < cfg.n_modes; ++m) {
        for (std::size_t k = 0; k <= m; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
                dot += basis.weights[i] * basis.eigenfunctions(i, m) * basis.eigenfunctions(i, k);
            worst = std::max(worst, std::abs(dot - (m == k ? 1.0 : 0.0)));
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("field evaluation is affine in xi (exact superposition)") {
    Mesh2D mesh(Rect{0, 0, 1, 1}, 1.0 / 8);
    FieldConfig cfg;
    cfg.mean = 2.0;
    cfg.sigma = 0.5;
    cfg.n_modes = 6;
    const KLBasis basis = kl_expand(cfg, mesh);
    Rng rng(4);
    Vec x1(6), x2(6), x12(6);
    for (std::size_t m = 0; m < 6; ++m) {
        x1[m] = rng.uniform(-0.5, 0.5);
        x2[m] = rng.uniform(-0.5, 0.5);
        x12[m] = x1[m] + x2[m];
    }
    const Vec f0 = evaluate_field(basis, cfg, Vec(6, 0.0));
    const Vec f1 = evaluate_field(basis, cfg, x1);
    const Vec f2 = evaluate_field(basis, cfg, x2);
    const Vec f12 = evaluate_field(basis, cfg, x12);
    for (std::size_t i = 0; i < f0.size(); ++i) {
        const double lhs = f12[i] - f0[i];
        const double rhs = (f1[i] - f0[i]) + (f2[i] - f0[i]);
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
}

TEST_CASE("empirical nodal variance matches sum lambda_m a_m^2 Var(xi)") {
    Mesh2D mesh(Rect{0, 0, 1, 1}, 1.0 / 4);
    FieldConfig cfg;
    cfg.mean = 2.0;
    cfg.sigma = 0.4;
    cfg.corr_len = 1.0;
    cfg.n_modes = 8;
    const KLBasis basis = kl_expand(cfg, mesh);
    InputLaw law;
    // variance of the truncated normal(0, 0.5) on [-1, 1]
    const double var_xi = 0.4398128305171199 * 0.4398128305171199;

    const std::size_t n_draws = 100000;
    Rng rng(7);
    Vec mean(mesh.n_nodes(), 0.0), second(mesh.n_nodes(), 0.0);
    for (std::size_t s = 0; s < n_draws; ++s) {
        const Vec xi = law.sample(cfg.n_modes, rng);
        const Vec f = evaluate_field(basis, cfg, xi);
        for (std::size_t i = 0; i < f.size(); ++i) {
            mean[i] += f[i];
            second[i] += f[i] * f[i];
        }
    }
    // check a few nodes against the analytic variance
    for (std::size_t i = 0; i < mesh.n_nodes(); i += 7) {
        const double m = mean[i] / n_draws;
        const double v = second[i] / n_draws - m * m;
        double analytic = 0.0;
        for (std::size_t k = 0; k < cfg.n_modes; ++k)
            analytic += basis.eigenvalues[k] * basis.eigenfunctions(i, k) *
                        basis.eigenfunctions(i, k) * var_xi;
        CHECK(std::abs(v - analytic) / analytic < 0.05);
    }
}

TEST_CASE("truncated normal sampler: range, spread, symmetry") {
    InputLaw law;
    Rng rng(11);
    const std::size_t n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = law.sample_one(rng);
        CHECK(x >= -1.0);
        CHECK(x <= 1.0);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    // analytic std of the truncated normal: 0.43981283051712
    CHECK(std::abs(sd - 0.4398128305171199) / 0.4398128305171199 < 0.01);
    // mean within 3 standard errors of 0
    CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("deterministic per seed") {
    InputLaw law;
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(law.sample_one(a) == law.sample_one(b));
}

TEST_CASE("ellipticity violation raises an error") {
    Mesh2D mesh(Rect{0, 0, 1, 1}, 0.25);
    FieldConfig cfg;
    cfg.mean = 0.1;   // small mean so a large draw can push the field negative
    cfg.sigma = 2.0;
    cfg.n_modes = 4;
    const KLBasis basis = kl_expand(cfg, mesh);
    Vec xi(4, 0.0);
    xi[0] = -5.0;
    CHECK_THROWS_AS(evaluate_field(basis, cfg, xi), NumericError);
}
