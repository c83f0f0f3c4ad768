#include "doctest.h"

#include <string>

#include "ckr/config.hpp"

using namespace ckr;

namespace {

std::string base_config() {
    return R"([problem]
mesh_h = 0.125
source = 100

[subdomain 1]
rect = 0 0 1 1
field_mean = 2
field_sigma = 0.5
field_corr_len = 1
kl_modes = 4

[subdomain 2]
rect = 1 0 2 1
field_mean = 2
field_sigma = 0.5
field_corr_len = 1
kl_modes = 4

[interface 2 1]
kind = dirichlet
theta = 0.1
pod_modes = 2

[interface 1 2]
kind = neumann
theta = 0
pod_modes = 3

[sampling]
n_off = 100
n_on = 100
n_ref = 100
seed = 3

[output 1]
subdomain = 1
segment = x 0.5 0 1
)";
}

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text, "test.cfg");
        return "";
    } catch (const ConfigError& e) {
        return e.what();
    }
}

}  // namespace

TEST_CASE("a complete config parses with the expected values") {
    const PipelineConfig cfg = parse_config_text(base_config(), "test.cfg");
    CHECK(cfg.dec.subdomains.size() == 2);
    CHECK(cfg.dec.mesh_h == 0.125);
    CHECK(cfg.dec.interfaces.size() == 2);
    CHECK(cfg.dec.interface(1, 0).kind == CouplingKind::Dirichlet);
    CHECK(cfg.dec.interface(1, 0).theta == 0.1);
    CHECK(cfg.dec.interface(0, 1).kind == CouplingKind::Neumann);
    CHECK(cfg.n_off == 100);
    CHECK(cfg.seed == 3);
    CHECK(cfg.outputs.size() == 1);
    CHECK(cfg.outputs[0].segment.axis == 'x');
    // defaults
    CHECK(cfg.flow.gamma == 0.6);
    CHECK(cfg.surrogate.width == 64);
    CHECK(cfg.flow_stages(0) == 2);
}

TEST_CASE("violations are rejected with line-numbered messages") {
    // negative theta on its line (line 21)
    std::string bad = base_config();
    bad.replace(bad.find("theta = 0.1"), 11, "theta = -.2");
    auto msg = error_of(bad);
    CHECK(msg.find("test.cfg:") != std::string::npos);
    CHECK(msg.find("theta") != std::string::npos);

    // unknown key
    bad = base_config();
    bad.replace(bad.find("source = 100"), 12, "sauce = 100");
    msg = error_of(bad);
    CHECK(msg.find("test.cfg:3") != std::string::npos);
    CHECK(msg.find("sauce") != std::string::npos);

    // zero count
    bad = base_config();
    bad.replace(bad.find("kl_modes = 4"), 12, "kl_modes = 0");
    msg = error_of(bad);
    CHECK(msg.find("test.cfg:10") != std::string::npos);

    // malformed number
    bad = base_config();
    bad.replace(bad.find("mesh_h = 0.125"), 14, "mesh_h = eight");
    msg = error_of(bad);
    CHECK(msg.find("test.cfg:2") != std::string::npos);
    CHECK(msg.find("eight") != std::string::npos);
}

TEST_CASE("duplicate definitions are rejected") {
    std::string bad = base_config() + "\n[subdomain 1]\nrect = 0 0 1 1\n";
    const auto msg = error_of(bad);
    CHECK(msg.find("defined twice") != std::string::npos);
}

TEST_CASE("missing reverse interface is rejected") {
    std::string bad = base_config();
    const auto pos = bad.find("[interface 1 2]");
    bad.erase(pos, bad.find("[sampling]") - pos);
    const auto msg = error_of(bad);
    CHECK(msg.find("reverse") != std::string::npos);
}

TEST_CASE("unknown output subdomain is rejected") {
    std::string bad = base_config();
    bad.replace(bad.find("subdomain = 1\nsegment"), 13, "subdomain = 9");
    const auto msg = error_of(bad);
    CHECK(msg.find("unknown subdomain") != std::string::npos);
}

TEST_CASE("subdomains that do not tile are rejected through validate") {
    std::string bad = base_config();
    bad.replace(bad.find("rect = 1 0 2 1"), 14, "rect = 1 0 3 2");
    const auto msg = error_of(bad);
    CHECK(msg.find("full edge") != std::string::npos);
}

TEST_CASE("stages list must match the subdomain count") {
    std::string bad = base_config() + "\n[flow]\nstages = 2 3 4\n";
    const auto msg = error_of(bad);
    CHECK(msg.find("stages") != std::string::npos);
}

TEST_CASE("config hash changes with the text") {
    const PipelineConfig a = parse_config_text(base_config(), "a.cfg");
    const PipelineConfig b = parse_config_text(base_config() + "# trailing comment\n", "b.cfg");
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a) == config_hash(a));
}
