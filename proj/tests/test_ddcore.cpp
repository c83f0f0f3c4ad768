#include "doctest.h"

#include <cmath>

#include "ckr/ddcore.hpp"

using namespace ckr;

namespace {

// Two-component diffusion setup: D = (0,2)x(0,1) split at x = 1, f = 100,
// a_0 = 2, sigma = 0.5, Lc = 1. Data 2->1 is a Dirichlet trace (theta 0.1),
// data 1->2 a Neumann flux (theta 0, direct replacement).
Decomposition two_component(double h = 1.0 / 16, std::size_t modes = 14) {
    Decomposition dec;
    dec.mesh_h = h;
    dec.source = 100.0;
    SubdomainSpec d1, d2;
    d1.rect = {0, 0, 1, 1};
    d2.rect = {1, 0, 2, 1};
    d1.field = d2.field = FieldConfig{2.0, 0.5, 1.0, modes};
    dec.subdomains = {d1, d2};
    dec.interfaces = {
        InterfaceSpec{1, 0, CouplingKind::Dirichlet, 0.1, 2},
        InterfaceSpec{0, 1, CouplingKind::Neumann, 0.0, 6},
    };
    dec.validate();
    return dec;
}

struct Problem {
    Decomposition dec;
    std::vector<Mesh2D> meshes;
    std::vector<KLBasis> kl;
};

Problem make_problem(double h = 1.0 / 16, std::size_t modes = 14) {
    Problem p{two_component(h, modes), {}, {}};
    for (const auto& s : p.dec.subdomains) {
        p.meshes.emplace_back(s.rect, p.dec.mesh_h);
        p.kl.push_back(kl_expand(s.field, p.meshes.back()));
    }
    return p;
}

std::map<InterfaceKey, Vec> nodal_zero_state(const Problem& p) {
    std::map<InterfaceKey, Vec> tau;
    for (const auto& spec : p.dec.interfaces)
        tau[{spec.from, spec.to}] =
            Vec(p.dec.interface_dofs(spec.from, spec.to, p.dec.mesh_h), 0.0);
    return tau;
}

double rel_l2(const Vec& a, const Vec& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("dn_update edge cases") {
    Vec tau{2.0}, h{4.0};
    CHECK(dn_update(tau, h, 1.0)[0] == 4.0);
    CHECK(dn_update(tau, h, 0.5)[0] == 3.0);  // convex combination by hand
    CHECK(dn_update(tau, h, 0.0)[0] == 4.0);  // direct replacement
    CHECK_THROWS_AS(dn_update(tau, h, -0.1), ConfigError);
}

TEST_CASE("dn_update contracts toward h at the exact rate 1-theta") {
    Rng rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        const double theta = rng.uniform(0.05, 1.0);
        Vec tau{rng.uniform(-5, 5)}, h{rng.uniform(-5, 5)};
        const Vec next = dn_update(tau, h, theta);
        const double lhs = std::abs(next[0] - h[0]);
        const double rhs = (1 - theta) * std::abs(tau[0] - h[0]);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("pod: identical snapshots give one mode and zero trailing singulars") {
    Matrix snaps(10, 6);
    Rng rng(2);
    Vec base(6);
    for (auto& v : base) v = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 6; ++j) snaps(i, j) = base[j] * (1.0 + 0.5 * i);
    const PODBasis basis = build_pod(snaps, 1);
    CHECK(basis.n_modes() == 1);
    for (std::size_t k = 1; k < basis.singular.size(); ++k)
        CHECK(basis.singular[k] < 1e-10 * basis.singular[0]);
    // requesting more modes than the rank fails and lists singular values
    CHECK_THROWS_AS(build_pod(snaps, 3), NumericError);
}

TEST_CASE("pod modes are orthonormal and round-trip retained directions") {
    Matrix snaps(40, 17);
    Rng rng(3);
    for (auto& v : snaps.data) v = rng.uniform(-1, 1);
    const PODBasis basis = build_pod(snaps, 5);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            double dot = 0;
            for (std::size_t i = 0; i < 17; ++i) dot += basis.modes(i, a) * basis.modes(i, b);
            CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-10);
        }
    // project-then-reconstruct is the identity on a retained mode
    Vec mode(17);
    for (std::size_t i = 0; i < 17; ++i) mode[i] = basis.mean[i] + basis.modes(i, 2);
    const Vec rec = basis.reconstruct(basis.project(mode));
    for (std::size_t i = 0; i < 17; ++i) CHECK(rec[i] == doctest::Approx(mode[i]).epsilon(1e-10));
}

TEST_CASE("pod projection beats random subspaces of equal size on held-out data") {
    Rng rng(4);
    // correlated snapshot family
    auto draw = [&rng](Matrix& m) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            const double a = rng.uniform(-1, 1), b = rng.uniform(-0.3, 0.3), c = rng.uniform(-0.05, 0.05);
            for (std::size_t j = 0; j < m.cols; ++j) {
                const double x = static_cast<double>(j) / (m.cols - 1);
                m(i, j) = a * std::sin(M_PI * x) + b * std::sin(2 * M_PI * x) + c * x;
            }
        }
    };
    Matrix train(60, 17), held(1, 17);
    draw(train);
    draw(held);
    const PODBasis basis = build_pod(train, 2);
    Vec h(held.row(0), held.row(0) + 17);
    const Vec rec = basis.reconstruct(basis.project(h));
    double pod_resid = 0;
    for (std::size_t j = 0; j < 17; ++j) pod_resid += (rec[j] - h[j]) * (rec[j] - h[j]);

    // brute-force comparison: project (centered) onto random orthonormal pairs
    for (int rep = 0; rep < 10; ++rep) {
        Vec q1(17), q2(17);
        for (auto& v : q1) v = rng.normal();
        double n1 = 0;
        for (double v : q1) n1 += v * v;
        for (auto& v : q1) v /= std::sqrt(n1);
        double d12 = 0;
        for (auto& v : q2) v = rng.normal();
        for (std::size_t j = 0; j < 17; ++j) d12 += q2[j] * q1[j];
        for (std::size_t j = 0; j < 17; ++j) q2[j] -= d12 * q1[j];
        double n2 = 0;
        for (double v : q2) n2 += v * v;
        for (auto& v : q2) v /= std::sqrt(n2);
        double c1 = 0, c2 = 0;
        for (std::size_t j = 0; j < 17; ++j) {
            c1 += q1[j] * (h[j] - basis.mean[j]);
            c2 += q2[j] * (h[j] - basis.mean[j]);
        }
        double resid = 0;
        for (std::size_t j = 0; j < 17; ++j) {
            const double r = (h[j] - basis.mean[j]) - c1 * q1[j] - c2 * q2[j];
            resid += r * r;
        }
        CHECK(pod_resid <= resid + 1e-12);
    }
}

TEST_CASE("a fixed point of the oracle stops immediately") {
    struct FixedSession : CouplingSession {
        std::map<int, Vec> couple(int i, const Vec&) override {
            // h_{0,1} = 1.5, h_{1,0} = -0.5 regardless of inputs
            if (i == 0) return {{1, Vec{1.5}}};
            return {{0, Vec{-0.5}}};
        }
    };
    Decomposition dec;
    dec.mesh_h = 0.5;
    SubdomainSpec a, b;
    a.rect = {0, 0, 1, 1};
    b.rect = {1, 0, 2, 1};
    a.field = b.field = FieldConfig{1, 0, 1, 1};
    dec.subdomains = {a, b};
    dec.interfaces = {InterfaceSpec{0, 1, CouplingKind::Dirichlet, 0.7, 1},
                      InterfaceSpec{1, 0, CouplingKind::Dirichlet, 0.7, 1}};
    dec.validate();
    FixedSession session;
    std::map<InterfaceKey, Vec> tau0{{{0, 1}, Vec{1.5}}, {{1, 0}, Vec{-0.5}}};
    const auto result = dd_iterate(dec, session, tau0, 1e-10, 50);
    CHECK(result.converged);
    CHECK(result.steps == 1);
    CHECK(result.indicator[0] <= 1e-10);
}

TEST_CASE("exact nodal coupling converges and matches the monolithic solve") {
    Problem p = make_problem();
    Rng rng(7);
    InputLaw law;
    for (int rep = 0; rep < 3; ++rep) {
        std::vector<Vec> xi{law.sample(14, rng), law.sample(14, rng)};
        PdeCouplingSession session(p.dec, p.meshes, p.kl, xi, nullptr);
        const auto result = dd_iterate(p.dec, session, nodal_zero_state(p), 1e-6, 500);
        CHECK(result.converged);

        // indicator decays with a near-constant log slope
        const auto& eps = result.indicator;
        REQUIRE(eps.size() >= 10);

        auto [gmesh, gu] = solve_global(p.dec, p.meshes, p.kl, xi);
        for (int i = 0; i < 2; ++i) {
            const Vec tau_i = concat_inputs(p.dec, i, result.tau);
            const Vec u = session.solve_subdomain(i, tau_i);
            const Vec ref = restrict_to_subdomain(p.dec, gmesh, gu, p.meshes[i], i);
            CHECK(rel_l2(u, ref) < 1e-5);
        }
    }
}

TEST_CASE("indicator history is nonnegative and length matches steps") {
    Problem p = make_problem(1.0 / 8, 6);
    Rng rng(9);
    InputLaw law;
    std::vector<Vec> xi{law.sample(6, rng), law.sample(6, rng)};
    PdeCouplingSession session(p.dec, p.meshes, p.kl, xi, nullptr);
    const auto result = dd_iterate(p.dec, session, nodal_zero_state(p), 1e-6, 500);
    CHECK(result.converged);
    CHECK(result.indicator.size() == result.steps);
    for (double e : result.indicator) CHECK(e >= 0.0);
}

TEST_CASE("decomposition validation rejects broken setups") {
    // missing reverse interface
    Decomposition dec;
    dec.mesh_h = 0.25;
    SubdomainSpec a, b;
    a.rect = {0, 0, 1, 1};
    b.rect = {1, 0, 2, 1};
    a.field = b.field = FieldConfig{1, 0.1, 1, 2};
    dec.subdomains = {a, b};
    dec.interfaces = {InterfaceSpec{0, 1, CouplingKind::Dirichlet, 0.5, 1}};
    CHECK_THROWS_AS(dec.validate(), ConfigError);

    // negative theta
    dec.interfaces = {InterfaceSpec{0, 1, CouplingKind::Dirichlet, -0.5, 1},
                      InterfaceSpec{1, 0, CouplingKind::Neumann, 0.1, 1}};
    CHECK_THROWS_AS(dec.validate(), ConfigError);

    // subdomains that do not share a full edge
    dec.interfaces = {InterfaceSpec{0, 1, CouplingKind::Dirichlet, 0.5, 1},
                      InterfaceSpec{1, 0, CouplingKind::Neumann, 0.1, 1}};
    dec.subdomains[1].rect = {1, 0.5, 2, 1.5};
    CHECK_THROWS_AS(dec.validate(), ConfigError);
}

TEST_CASE("pod-space exact coupling also converges with a log-linear indicator") {
    Problem p = make_problem();
    Rng rng(21);
    InputLaw law;

    // snapshots from nodal iterations
    std::map<InterfaceKey, Matrix> snaps;
    for (const auto& spec : p.dec.interfaces)
        snaps[{spec.from, spec.to}] =
            Matrix(12, p.dec.interface_dofs(spec.from, spec.to, p.dec.mesh_h));
    for (int s = 0; s < 12; ++s) {
        std::vector<Vec> xi{law.sample(14, rng), law.sample(14, rng)};
        PdeCouplingSession session(p.dec, p.meshes, p.kl, xi, nullptr);
        const auto result = dd_iterate(p.dec, session, nodal_zero_state(p), 1e-6, 500);
        REQUIRE(result.converged);
        for (const auto& [key, vec] : result.tau)
            for (std::size_t j = 0; j < vec.size(); ++j) snaps[key](s, j) = vec[j];
    }
    std::map<InterfaceKey, PODBasis> pod;
    for (const auto& spec : p.dec.interfaces) {
        const InterfaceKey key{spec.from, spec.to};
        pod[key] = build_pod(snaps[key], spec.pod_modes);
    }

    std::vector<Vec> xi{law.sample(14, rng), law.sample(14, rng)};
    PdeCouplingSession session(p.dec, p.meshes, p.kl, xi, &pod);
    std::map<InterfaceKey, Vec> tau0;
    for (const auto& spec : p.dec.interfaces)
        tau0[{spec.from, spec.to}] = Vec(spec.pod_modes, 0.0);
    const auto result = dd_iterate(p.dec, session, tau0, 1e-6, 500);
    CHECK(result.converged);

    // least-squares slope of log eps vs k is negative with R^2 > 0.9
    const auto& eps = result.indicator;
    REQUIRE(eps.size() >= 5);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const double n = static_cast<double>(eps.size());
    for (std::size_t k = 0; k < eps.size(); ++k) {
        const double x = static_cast<double>(k), y = std::log(eps[k]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double r = (n * sxy - sx * sy) /
                     std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    CHECK(slope < 0.0);
    CHECK(r * r > 0.9);
}
