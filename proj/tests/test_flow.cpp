#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "ckr/flow.hpp"
#include "test_util.hpp"

using namespace ckr;

namespace {

// Move every trainable parameter off the identity so the map is in generic
// position, keeping magnitudes moderate.
void jiggle(FlowModel& model, std::uint64_t seed, double amp = 0.35) {
    Rng rng(seed);
    for (auto* p : model.parameters())
        for (auto& v : p->values) v += rng.uniform(-amp, amp);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -2, double hi = 2) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("rigged scalar coupling reproduces the closed-form values") {
    FlowConfig cfg;
    cfg.dim = 2;
    cfg.stages = 2;
    cfg.couplings_per_stage = 1;
    cfg.hidden_width = 8;
    cfg.gamma = 0.5;
    Rng rng(1);
    FlowModel model(cfg, rng);
    // force s_c == 1 and t_c == 0 via the head biases; everything else stays
    // at the identity
    for (auto* p : model.parameters()) {
        if (p->name.find(".bs") != std::string::npos) p->values[0] = 1.0;
    }
    Matrix alpha(1, 2);
    alpha(0, 0) = 0.3;
    alpha(0, 1) = 2.0;
    Matrix z;
    Vec logdet;
    model.forward_logdet(alpha, Matrix(), &z, &logdet);
    const double scale = 1.0 + 0.5 * std::tanh(1.0);
    CHECK(z(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(z(0, 1) == doctest::Approx(2.0 * scale).epsilon(1e-12));      // 2.761594155955765
    CHECK(logdet[0] == doctest::Approx(std::log(scale)).epsilon(1e-12));  // 0.32266092516422705

    // inverse of the forward example returns alpha2 = 2 within 1e-12
    Matrix back = model.inverse(z, Matrix());
    CHECK(back(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("identity initialization: z equals standardized alpha, logdet is the standardization constant") {
    FlowConfig cfg;
    cfg.dim = 3;
    cfg.stages = 3;
    Rng rng(2);
    FlowModel model(cfg, rng);
    Rng drng(3);
    Matrix alpha = random_matrix(6, 3, drng);
    Matrix z;
    Vec logdet;
    model.forward_logdet(alpha, Matrix(), &z, &logdet);
    for (std::size_t i = 0; i < alpha.rows; ++i) {
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(z(i, j) == doctest::Approx(alpha(i, j)).epsilon(1e-12));
        CHECK(logdet[i] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("identity model log density at the origin is -(d/2) log(2 pi)") {
    FlowConfig cfg;
    cfg.dim = 2;
    Rng rng(4);
    FlowModel model(cfg, rng);
    Matrix alpha(1, 2);  // zeros
    const Vec ld = model.log_density(alpha, Matrix());
    CHECK(ld[0] == doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("round trip: inverse(forward(alpha, c), c) = alpha for random draws") {
    FlowConfig cfg;
    cfg.dim = 5;
    cfg.cond_dim = 3;
    cfg.stages = 3;
    cfg.couplings_per_stage = 4;
    Rng rng(5);
    FlowModel model(cfg, rng);
    jiggle(model, 6);
    Rng drng(7);
    Matrix alpha = random_matrix(1000, 5, drng, -3, 3);
    Matrix c = random_matrix(1000, 3, drng, -2, 2);
    Matrix z;
    model.forward_logdet(alpha, c, &z, nullptr);
    Matrix back = model.inverse(z, c);
    double worst = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        worst = std::max(worst, std::abs(back.data[i] - alpha.data[i]));
    CHECK(worst < 1e-10);
}

TEST_CASE("numeric Jacobian is block lower-triangular and matches logdet") {
    FlowConfig cfg;
    cfg.dim = 4;
    cfg.cond_dim = 2;
    cfg.stages = 2;  // blocks [2, 2]
    Rng rng(8);
    FlowModel model(cfg, rng);
    jiggle(model, 9);

    Rng drng(10);
    const double h = 1e-6;
    for (int rep = 0; rep < 20; ++rep) {
        Matrix alpha = random_matrix(1, 4, drng);
        Matrix c = random_matrix(1, 2, drng);
        Eigen::Matrix4d jac;
        for (int j = 0; j < 4; ++j) {
            Matrix ap = alpha, am = alpha;
            ap(0, j) += h;
            am(0, j) -= h;
            Matrix zp, zm;
            model.forward_logdet(ap, c, &zp, nullptr);
            model.forward_logdet(am, c, &zm, nullptr);
            for (int i = 0; i < 4; ++i) jac(i, j) = (zp(0, i) - zm(0, i)) / (2.0 * h);
        }
        // z block 0 (rows 0,1) must not depend on alpha block 1 (cols 2,3)
        for (int i = 0; i < 2; ++i)
            for (int j = 2; j < 4; ++j) CHECK(std::abs(jac(i, j)) < 1e-8);
        Vec logdet;
        model.forward_logdet(alpha, c, nullptr, &logdet);
        CHECK(std::abs(logdet[0] - std::log(std::abs(jac.determinant()))) < 1e-5);
    }
}

TEST_CASE("coupling scale stays inside (1-gamma, 1+gamma)") {
    const double gamma = 0.6;
    Rng rng(11);
    bool interior_ok = true, positive_ok = true;
    for (int i = 0; i < 10000; ++i) {
        // strict interior until tanh saturates to +-1 in doubles (|s| ~ 19)
        const double s = rng.uniform(-18, 18);
        const double scale = 1.0 + gamma * std::tanh(s);
        interior_ok = interior_ok && scale > 1.0 - gamma && scale < 1.0 + gamma;
    }
    for (int i = 0; i < 1000; ++i) {
        const double s = rng.uniform(-1e6, 1e6);
        const double scale = 1.0 + gamma * std::tanh(s);
        positive_ok = positive_ok && scale >= 1.0 - gamma && scale > 0.0;
    }
    CHECK(interior_ok);
    CHECK(positive_ok);
}

TEST_CASE("density integrates to one on a dim-2 model with random parameters") {
    FlowConfig cfg;
    cfg.dim = 2;
    Rng rng(12);
    FlowModel model(cfg, rng);
    jiggle(model, 13);
    const int n = 401;
    const double lo = -8.0, hi = 8.0;
    const double dx = (hi - lo) / (n - 1);
    Matrix grid(static_cast<std::size_t>(n) * n, 2);
    std::size_t r = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j, ++r) {
            grid(r, 0) = lo + i * dx;
            grid(r, 1) = lo + j * dx;
        }
    const Vec ld = model.log_density(grid, Matrix());
    double integral = 0.0;
    r = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j, ++r) {
            double w = 1.0;
            if (i == 0 || i == n - 1) w *= 0.5;
            if (j == 0 || j == n - 1) w *= 0.5;
            integral += w * std::exp(ld[r]);
        }
    integral *= dx * dx;
    CHECK(integral > 0.98);
    CHECK(integral < 1.02);
}

TEST_CASE("unconditional mode ignores conditioner input entirely") {
    FlowConfig cfg;
    cfg.dim = 3;
    cfg.cond_dim = 0;
    Rng rng(14);
    FlowModel model(cfg, rng);
    jiggle(model, 15);
    Rng drng(16);
    Matrix alpha = random_matrix(20, 3, drng);
    Matrix c1 = random_matrix(20, 4, drng);
    Matrix c2 = random_matrix(20, 4, drng);
    const Vec a = model.log_density(alpha, c1);
    const Vec b = model.log_density(alpha, c2);
    CHECK(a == b);
}

TEST_CASE("flow loss gradients match finite differences") {
    FlowConfig cfg;
    cfg.dim = 3;
    cfg.cond_dim = 2;
    cfg.stages = 2;
    cfg.couplings_per_stage = 2;
    cfg.hidden_width = 8;
    Rng rng(17);
    FlowModel model(cfg, rng);
    jiggle(model, 18, 0.25);
    Rng drng(19);
    Matrix alpha = random_matrix(4, 3, drng, -1.5, 1.5);
    Matrix c = random_matrix(4, 2, drng, -1.5, 1.5);
    const double err = testing::max_grad_rel_error(
        model.graph(), model.loss_node(), {{"alpha", &alpha}, {"c", &c}});
    CHECK(err < 1e-5);
}

TEST_CASE("sampling from an identity model returns de-standardized prior draws") {
    FlowConfig cfg;
    cfg.dim = 2;
    Rng rng(20);
    FlowModel model(cfg, rng);
    // fake standardization: shift (3, -1), scale (2, 0.5)
    Matrix data(4, 2);
    data(0, 0) = 1;  data(0, 1) = -2;
    data(1, 0) = 5;  data(1, 1) = 0;
    data(2, 0) = 3;  data(2, 1) = -1.5;
    data(3, 0) = 3;  data(3, 1) = -0.5;
    model.freeze_standardization(data, Matrix());
    const std::size_t n = 20000;
    Matrix samples = model.sample_conditional(Matrix(), n, 77);
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        m0 += samples(i, 0);
        m1 += samples(i, 1);
    }
    m0 /= n;
    m1 /= n;
    // empirical mean approaches the standardization shift (3, -1)
    CHECK(std::abs(m0 - 3.0) < 0.05);
    CHECK(std::abs(m1 + 1.0) < 0.05);

    // log density is finite at every returned sample
    const Vec ld = model.log_density(samples, Matrix());
    for (double v : ld) CHECK(std::isfinite(v));
}

TEST_CASE("sampling is deterministic per seed") {
    FlowConfig cfg;
    cfg.dim = 3;
    cfg.cond_dim = 2;
    Rng rng(21);
    FlowModel model(cfg, rng);
    jiggle(model, 22);
    Rng drng(23);
    Matrix c = random_matrix(50, 2, drng);
    Matrix s1 = model.sample_conditional(c, 50, 99);
    Matrix s2 = model.sample_conditional(c, 50, 99);
    CHECK(s1.data == s2.data);
}

TEST_CASE("checkpoint round trip preserves the density bitwise") {
    FlowConfig cfg;
    cfg.dim = 4;
    cfg.cond_dim = 3;
    cfg.stages = 3;
    Rng rng(24);
    FlowModel model(cfg, rng);
    jiggle(model, 25);
    Rng drng(26);
    Matrix alpha = random_matrix(10, 4, drng);
    Matrix c = random_matrix(10, 3, drng);
    model.freeze_standardization(alpha, c);
    const Vec before = model.log_density(alpha, c);

    const auto entries = model.to_checkpoint();
    save_checkpoint("/tmp/ckr_test_flow.ckpt", entries);
    auto loaded_entries = load_checkpoint("/tmp/ckr_test_flow.ckpt");
    FlowModel loaded = FlowModel::from_checkpoint(loaded_entries);
    const Vec after = loaded.log_density(alpha, c);
    CHECK(before == after);
}

TEST_CASE("invalid gamma is rejected") {
    FlowConfig cfg;
    cfg.dim = 2;
    cfg.gamma = 1.5;
    Rng rng(27);
    CHECK_THROWS_AS(FlowModel(cfg, rng), ConfigError);
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(FlowModel(cfg, rng), ConfigError);
}
