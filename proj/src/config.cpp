#include "ckr/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "ckr/util.hpp"

namespace ckr {

namespace {

struct Line {
    int number;
    std::string key;
    std::vector<std::string> values;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& origin, int line, const std::string& tok) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (...) {
        fail(origin, line, "expected a number, got '" + tok + "'");
    }
}

std::size_t to_count(const std::string& origin, int line, const std::string& tok) {
    const double v = to_double(origin, line, tok);
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
        fail(origin, line, "expected a nonnegative integer, got '" + tok + "'");
    return static_cast<std::size_t>(v);
}

std::size_t to_positive(const std::string& origin, int line, const std::string& tok) {
    const std::size_t v = to_count(origin, line, tok);
    if (v == 0) fail(origin, line, "count must be positive");
    return v;
}

}  // namespace

std::size_t PipelineConfig::flow_stages(int i) const {
    if (flow.stages.empty()) return 2;
    if (flow.stages.size() == 1) return flow.stages[0];
    return flow.stages[static_cast<std::size_t>(i)];
}

PipelineConfig parse_config_text(const std::string& text, const std::string& origin) {
    PipelineConfig cfg;
    cfg.raw_text = text;

    // section name (+args) -> lines
    struct Section {
        std::vector<std::string> args;
        int line = 0;
        std::vector<Line> entries;
    };
    std::vector<std::pair<std::string, Section>> sections;
    Section* current = nullptr;

    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first.front() == '[') {
            std::string header = line;
            const auto open = header.find('[');
            const auto close = header.find(']');
            if (close == std::string::npos) fail(origin, line_no, "unterminated section header");
            std::istringstream hs(header.substr(open + 1, close - open - 1));
            std::string name;
            hs >> name;
            Section sec;
            sec.line = line_no;
            std::string arg;
            while (hs >> arg) sec.args.push_back(arg);
            sections.emplace_back(name, std::move(sec));
            current = &sections.back().second;
            continue;
        }
        if (current == nullptr) fail(origin, line_no, "key outside of any section");
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
        std::istringstream ks(line.substr(0, eq));
        std::string key;
        ks >> key;
        std::string extra;
        if (ks >> extra) fail(origin, line_no, "malformed key before '='");
        Line entry;
        entry.number = line_no;
        entry.key = key;
        std::istringstream vs(line.substr(eq + 1));
        std::string tok;
        while (vs >> tok) entry.values.push_back(tok);
        if (entry.values.empty()) fail(origin, line_no, "missing value for '" + key + "'");
        current->entries.push_back(std::move(entry));
    }

    std::map<int, int> subdomain_lines;  // index -> line, for duplicate checks
    std::map<std::pair<int, int>, int> interface_lines;
    std::map<int, int> output_lines;

    auto one = [&](const Line& e) -> const std::string& {
        if (e.values.size() != 1)
            fail(origin, e.number, "'" + e.key + "' takes exactly one value");
        return e.values[0];
    };

    for (auto& [name, sec] : sections) {
        if (name == "problem") {
            for (const auto& e : sec.entries) {
                if (e.key == "mesh_h") cfg.dec.mesh_h = to_double(origin, e.number, one(e));
                else if (e.key == "source") cfg.dec.source = to_double(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [problem]");
            }
            if (cfg.dec.mesh_h <= 0) fail(origin, sec.line, "mesh_h must be positive");
        } else if (name == "subdomain") {
            if (sec.args.size() != 1) fail(origin, sec.line, "[subdomain] needs an index");
            const int idx = static_cast<int>(to_positive(origin, sec.line, sec.args[0]));
            if (subdomain_lines.count(idx))
                fail(origin, sec.line, "subdomain " + std::to_string(idx) + " defined twice (first at line " +
                                           std::to_string(subdomain_lines[idx]) + ")");
            subdomain_lines[idx] = sec.line;
            if (static_cast<int>(cfg.dec.subdomains.size()) < idx) cfg.dec.subdomains.resize(idx);
            SubdomainSpec& spec = cfg.dec.subdomains[idx - 1];
            for (const auto& e : sec.entries) {
                if (e.key == "rect") {
                    if (e.values.size() != 4) fail(origin, e.number, "rect needs 4 numbers");
                    spec.rect = {to_double(origin, e.number, e.values[0]),
                                 to_double(origin, e.number, e.values[1]),
                                 to_double(origin, e.number, e.values[2]),
                                 to_double(origin, e.number, e.values[3])};
                    if (spec.rect.width() <= 0 || spec.rect.height() <= 0)
                        fail(origin, e.number, "rect must have positive width and height");
                } else if (e.key == "field_mean") spec.field.mean = to_double(origin, e.number, one(e));
                else if (e.key == "field_sigma") {
                    spec.field.sigma = to_double(origin, e.number, one(e));
                    if (spec.field.sigma < 0) fail(origin, e.number, "field_sigma must be nonnegative");
                } else if (e.key == "field_corr_len") {
                    spec.field.corr_len = to_double(origin, e.number, one(e));
                    if (spec.field.corr_len <= 0) fail(origin, e.number, "field_corr_len must be positive");
                } else if (e.key == "kl_modes") spec.field.n_modes = to_positive(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [subdomain]");
            }
        } else if (name == "interface") {
            if (sec.args.size() != 2) fail(origin, sec.line, "[interface] needs 'from to' indices");
            InterfaceSpec spec;
            spec.from = static_cast<int>(to_positive(origin, sec.line, sec.args[0])) - 1;
            spec.to = static_cast<int>(to_positive(origin, sec.line, sec.args[1])) - 1;
            const std::pair<int, int> key{spec.from, spec.to};
            if (interface_lines.count(key))
                fail(origin, sec.line, "interface defined twice (first at line " +
                                           std::to_string(interface_lines[key]) + ")");
            interface_lines[key] = sec.line;
            for (const auto& e : sec.entries) {
                if (e.key == "kind") {
                    const std::string& v = one(e);
                    if (v == "dirichlet") spec.kind = CouplingKind::Dirichlet;
                    else if (v == "neumann") spec.kind = CouplingKind::Neumann;
                    else fail(origin, e.number, "kind must be 'dirichlet' or 'neumann'");
                } else if (e.key == "theta") {
                    spec.theta = to_double(origin, e.number, one(e));
                    if (spec.theta < 0) fail(origin, e.number, "theta must be nonnegative");
                } else if (e.key == "pod_modes") spec.pod_modes = to_positive(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [interface]");
            }
            cfg.dec.interfaces.push_back(spec);
        } else if (name == "dd") {
            for (const auto& e : sec.entries) {
                if (e.key == "tol") {
                    cfg.dd_tol = to_double(origin, e.number, one(e));
                    if (cfg.dd_tol <= 0) fail(origin, e.number, "tol must be positive");
                } else if (e.key == "max_steps") cfg.dd_max_steps = to_positive(origin, e.number, one(e));
                else if (e.key == "pod_snapshots") cfg.pod_snapshots = to_positive(origin, e.number, one(e));
                else if (e.key == "snapshot_mode") {
                    const std::string& v = one(e);
                    if (v == "iterates") cfg.snapshots_from_iterates = true;
                    else if (v == "converged") cfg.snapshots_from_iterates = false;
                    else fail(origin, e.number, "snapshot_mode must be 'iterates' or 'converged'");
                } else fail(origin, e.number, "unknown key '" + e.key + "' in [dd]");
            }
        } else if (name == "sampling") {
            for (const auto& e : sec.entries) {
                if (e.key == "n_off") cfg.n_off = to_positive(origin, e.number, one(e));
                else if (e.key == "n_on") cfg.n_on = to_positive(origin, e.number, one(e));
                else if (e.key == "n_ref") cfg.n_ref = to_positive(origin, e.number, one(e));
                else if (e.key == "seed") cfg.seed = to_count(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [sampling]");
            }
        } else if (name == "flow") {
            for (const auto& e : sec.entries) {
                if (e.key == "stages") {
                    cfg.flow.stages.clear();
                    for (const auto& tok : e.values) {
                        const std::size_t r = to_positive(origin, e.number, tok);
                        if (r < 2) fail(origin, e.number, "flow stages must be at least 2");
                        cfg.flow.stages.push_back(r);
                    }
                } else if (e.key == "couplings") cfg.flow.couplings = to_positive(origin, e.number, one(e));
                else if (e.key == "width") cfg.flow.width = to_positive(origin, e.number, one(e));
                else if (e.key == "gamma") {
                    cfg.flow.gamma = to_double(origin, e.number, one(e));
                    if (cfg.flow.gamma <= 0 || cfg.flow.gamma >= 1)
                        fail(origin, e.number, "gamma must lie strictly inside (0,1)");
                } else if (e.key == "batch") cfg.flow.batch = to_positive(origin, e.number, one(e));
                else if (e.key == "epochs") cfg.flow.epochs = to_count(origin, e.number, one(e));
                else if (e.key == "lr") cfg.flow.lr = to_double(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [flow]");
            }
        } else if (name == "surrogate") {
            for (const auto& e : sec.entries) {
                if (e.key == "width") cfg.surrogate.width = to_positive(origin, e.number, one(e));
                else if (e.key == "blocks") cfg.surrogate.blocks = to_positive(origin, e.number, one(e));
                else if (e.key == "batch") cfg.surrogate.batch = to_positive(origin, e.number, one(e));
                else if (e.key == "max_epochs") cfg.surrogate.max_epochs = to_positive(origin, e.number, one(e));
                else if (e.key == "patience") cfg.surrogate.patience = to_positive(origin, e.number, one(e));
                else if (e.key == "lr") cfg.surrogate.lr = to_double(origin, e.number, one(e));
                else if (e.key == "mse_ceiling") cfg.surrogate.mse_ceiling = to_double(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [surrogate]");
            }
        } else if (name == "bench") {
            for (const auto& e : sec.entries) {
                if (e.key == "dim") cfg.bench.dim = to_positive(origin, e.number, one(e));
                else if (e.key == "cond_dims") {
                    cfg.bench.cond_dims.clear();
                    for (const auto& tok : e.values)
                        cfg.bench.cond_dims.push_back(to_positive(origin, e.number, tok));
                } else if (e.key == "n_train") cfg.bench.n_train = to_positive(origin, e.number, one(e));
                else if (e.key == "n_valid") cfg.bench.n_valid = to_positive(origin, e.number, one(e));
                else if (e.key == "epochs") cfg.bench.epochs = to_positive(origin, e.number, one(e));
                else if (e.key == "batch") cfg.bench.batch = to_positive(origin, e.number, one(e));
                else if (e.key == "lr") cfg.bench.lr = to_double(origin, e.number, one(e));
                else if (e.key == "cov_seed") cfg.bench.cov_seed = to_count(origin, e.number, one(e));
                else if (e.key == "per_epoch_valid") cfg.bench.per_epoch_valid = to_positive(origin, e.number, one(e));
                else fail(origin, e.number, "unknown key '" + e.key + "' in [bench]");
            }
        } else if (name == "output") {
            if (sec.args.size() != 1) fail(origin, sec.line, "[output] needs an index");
            const int idx = static_cast<int>(to_positive(origin, sec.line, sec.args[0]));
            if (output_lines.count(idx))
                fail(origin, sec.line, "output " + std::to_string(idx) + " defined twice (first at line " +
                                           std::to_string(output_lines[idx]) + ")");
            output_lines[idx] = sec.line;
            if (static_cast<int>(cfg.outputs.size()) < idx) cfg.outputs.resize(idx);
            OutputSpec& out = cfg.outputs[idx - 1];
            for (const auto& e : sec.entries) {
                if (e.key == "subdomain")
                    out.subdomain = static_cast<int>(to_positive(origin, e.number, one(e))) - 1;
                else if (e.key == "segment") {
                    if (e.values.size() != 4) fail(origin, e.number, "segment needs 'axis fixed lo hi'");
                    if (e.values[0] != "x" && e.values[0] != "y")
                        fail(origin, e.number, "segment axis must be 'x' or 'y'");
                    out.segment.axis = e.values[0][0];
                    out.segment.fixed = to_double(origin, e.number, e.values[1]);
                    out.segment.lo = to_double(origin, e.number, e.values[2]);
                    out.segment.hi = to_double(origin, e.number, e.values[3]);
                    if (out.segment.lo >= out.segment.hi)
                        fail(origin, e.number, "segment must have lo < hi");
                } else fail(origin, e.number, "unknown key '" + e.key + "' in [output]");
            }
        } else if (name == "report") {
            for (const auto& e : sec.entries) {
                if (e.key == "thresholds") {
                    cfg.report_thresholds.clear();
                    for (const auto& tok : e.values)
                        cfg.report_thresholds.push_back(to_double(origin, e.number, tok));
                } else fail(origin, e.number, "unknown key '" + e.key + "' in [report]");
            }
        } else {
            fail(origin, sec.line, "unknown section [" + name + "]");
        }
    }

    // cross checks
    for (std::size_t i = 0; i < cfg.dec.subdomains.size(); ++i) {
        if (!subdomain_lines.count(static_cast<int>(i) + 1))
            throw ConfigError(origin + ": subdomain " + std::to_string(i + 1) +
                              " is referenced but never defined");
    }
    if (cfg.dec.subdomains.empty()) throw ConfigError(origin + ": no [subdomain] sections");
    for (std::size_t i = 0; i < cfg.outputs.size(); ++i) {
        if (!output_lines.count(static_cast<int>(i) + 1))
            throw ConfigError(origin + ": output " + std::to_string(i + 1) +
                              " is referenced but never defined");
        if (cfg.outputs[i].subdomain < 0 ||
            cfg.outputs[i].subdomain >= static_cast<int>(cfg.dec.subdomains.size()))
            throw ConfigError(origin + ": output " + std::to_string(i + 1) +
                              " references an unknown subdomain");
    }
    if (!cfg.flow.stages.empty() && cfg.flow.stages.size() != 1 &&
        cfg.flow.stages.size() != cfg.dec.subdomains.size())
        throw ConfigError(origin + ": [flow] stages must give one value or one per subdomain");
    try {
        cfg.dec.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return parse_config_text(os.str(), path);
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : cfg.raw_text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace ckr
