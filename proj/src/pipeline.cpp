#include "ckr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ckr/stats.hpp"
#include "ckr/util.hpp"

namespace ckr {

namespace {

using nlohmann::json;

// stage tags for derived seed streams
constexpr std::uint64_t kSeedPrep = 1;
constexpr std::uint64_t kSeedOffline = 100;    // + subdomain
constexpr std::uint64_t kSeedSurrogate = 300;  // + 16*from + to
constexpr std::uint64_t kSeedOnline = 3;
constexpr std::uint64_t kSeedFlow = 400;       // + subdomain
constexpr std::uint64_t kSeedReference = 6;
constexpr std::uint64_t kSeedBench = 700;      // + case index

void write_rows(const std::string& path, const std::vector<std::pair<std::string, Vec>>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw UsageError("pipeline: cannot open '" + path + "' for writing");
    for (const auto& [label, values] : rows) {
        os << label;
        for (double v : values) os << "\t" << format_double(v);
        os << "\n";
    }
    if (!os) throw UsageError("pipeline: write to '" + path + "' failed");
}

std::vector<std::pair<std::string, Vec>> read_rows(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("pipeline: cannot open '" + path + "'");
    std::vector<std::pair<std::string, Vec>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string label;
        ls >> label;
        Vec values;
        double v;
        while (ls >> v) values.push_back(v);
        rows.emplace_back(label, std::move(values));
    }
    return rows;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw UsageError("pipeline: cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("pipeline: cannot open '" + path + "'");
    json j;
    is >> j;
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// least-squares slope and R^2 of log(values) against the step index
std::pair<double, double> log_linear_fit(const std::vector<double>& values) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(values[k] > 0)) continue;
        const double x = static_cast<double>(k), y = std::log(values[k]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
        ++n;
    }
    if (n < 3) return {0.0, 0.0};
    const double dn = static_cast<double>(n);
    const double slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    const double denom = (dn * sxx - sx * sx) * (dn * syy - sy * sy);
    const double r = denom > 0 ? (dn * sxy - sx * sy) / std::sqrt(denom) : 0.0;
    return {slope, r * r};
}

}  // namespace

// ---------------------------------------------------------------------------
// construction and paths

Pipeline::Pipeline(PipelineConfig cfg, std::string out_dir, int workers,
                   std::optional<std::uint64_t> seed_override)
    : cfg_(std::move(cfg)), out_(std::move(out_dir)), workers_(std::max(1, workers)) {
    seed_ = seed_override.value_or(cfg_.seed);
    std::filesystem::create_directories(out_);
    for (const auto& s : cfg_.dec.subdomains) meshes_.emplace_back(s.rect, cfg_.dec.mesh_h);
}

std::uint64_t Pipeline::stage_sample_seed(std::uint64_t tag) const {
    Rng r = Rng::derive(seed_, tag);
    return r.next_u64();
}

std::string Pipeline::path_kl(int i) const {
    return out_ + "/kl_" + std::to_string(i + 1) + ".txt";
}
std::string Pipeline::path_pod(int from, int to) const {
    return out_ + "/pod_" + std::to_string(from + 1) + "_" + std::to_string(to + 1) + ".txt";
}
std::string Pipeline::path_proposal(int i) const {
    return out_ + "/proposal_" + std::to_string(i + 1) + ".txt";
}
std::string Pipeline::path_offline(int i) const {
    return out_ + "/offline_" + std::to_string(i + 1) + ".tsv";
}
std::string Pipeline::path_surrogate(int from, int to) const {
    return out_ + "/sur_" + std::to_string(from + 1) + "_" + std::to_string(to + 1) + ".ckpt";
}
std::string Pipeline::path_online(int i) const {
    return out_ + "/online_" + std::to_string(i + 1) + ".tsv";
}
std::string Pipeline::path_flow(int i) const {
    return out_ + "/flow_" + std::to_string(i + 1) + ".ckpt";
}
std::string Pipeline::path_reference() const { return out_ + "/reference.tsv"; }
std::string Pipeline::path_diagnostics() const { return out_ + "/diagnostics.json"; }
std::string Pipeline::path_report() const { return out_ + "/report.json"; }

void Pipeline::append_manifest(const std::string& stage) {
    std::ofstream os(out_ + "/manifest.tsv", std::ios::app);
    os << stage << "\t" << hex64(config_hash(cfg_)) << "\t" << seed_ << "\t"
       << static_cast<long long>(std::time(nullptr)) << "\n";
}

void Pipeline::require_file(const std::string& path, const std::string& producer) const {
    if (!std::filesystem::exists(path))
        throw UsageError("pipeline: missing artifact '" + path + "'; run the '" + producer +
                         "' stage first");
}

void Pipeline::run_stage(const std::string& stage) {
    if (stage == "prep") prep();
    else if (stage == "offline") offline();
    else if (stage == "surrogate") surrogates();
    else if (stage == "online") online();
    else if (stage == "report") report();
    else if (stage == "flow-bench") flow_bench();
    else
        throw ConfigError("pipeline: unknown stage '" + stage +
                          "' (expected prep|offline|surrogate|online|report|flow-bench)");
}

// ---------------------------------------------------------------------------
// prep: KL bases, POD bases from exact nodal DD snapshots, proposals

void Pipeline::prep() {
    const Decomposition& dec = cfg_.dec;
    const int m = dec.n_subdomains();

    std::vector<KLBasis> kl;
    for (int i = 0; i < m; ++i) {
        kl.push_back(kl_expand(dec.subdomains[i].field, meshes_[i]));
        std::vector<std::pair<std::string, Vec>> rows;
        rows.emplace_back("lambda", kl[i].eigenvalues);
        for (std::size_t node = 0; node < meshes_[i].n_nodes(); ++node) {
            Vec row(kl[i].eigenfunctions.cols);
            for (std::size_t k = 0; k < row.size(); ++k) row[k] = kl[i].eigenfunctions(node, k);
            rows.emplace_back("phi", std::move(row));
        }
        write_rows(path_kl(i), rows);
    }

    // exact nodal DD runs, one per xi sample, provide the interface-function
    // snapshots: every iterate of every run, or only the converged data
    const std::size_t n_runs = cfg_.pod_snapshots;
    const std::uint64_t prep_seed = stage_sample_seed(kSeedPrep);
    std::vector<std::vector<std::map<InterfaceKey, Vec>>> run_snaps(n_runs);
    InputLaw law;
    parallel_for(n_runs, workers_, [&](std::size_t s) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt >= 32)
                throw NumericError("prep: POD snapshot run " + std::to_string(s) +
                                   " failed repeatedly (degenerate random fields)");
            Rng rng = Rng::derive(prep_seed, s + attempt * n_runs);
            std::vector<Vec> xi;
            for (int i = 0; i < m; ++i) xi.push_back(law.sample(dec.subdomains[i].field.n_modes, rng));
            try {
                PdeCouplingSession session(dec, meshes_, kl, xi, nullptr);
                std::map<InterfaceKey, Vec> tau0;
                for (const auto& spec : dec.interfaces)
                    tau0[{spec.from, spec.to}] =
                        Vec(dec.interface_dofs(spec.from, spec.to, dec.mesh_h), 0.0);
                const auto result = dd_iterate(dec, session, tau0, cfg_.dd_tol, cfg_.dd_max_steps,
                                               cfg_.snapshots_from_iterates);
                if (!result.converged)
                    throw NumericError("prep: DD iteration for POD snapshot run " +
                                       std::to_string(s) + " did not converge within " +
                                       std::to_string(cfg_.dd_max_steps) + " steps");
                if (cfg_.snapshots_from_iterates)
                    run_snaps[s] = result.trace;
                else
                    run_snaps[s] = {result.tau};
                return;
            } catch (const NumericError& e) {
                if (std::string(e.what()).find("ellipticity") == std::string::npos) throw;
            }
        }
    });
    std::size_t n_snap = 0;
    for (const auto& rs : run_snaps) n_snap += rs.size();
    std::map<InterfaceKey, Matrix> snaps;
    for (const auto& spec : dec.interfaces)
        snaps[{spec.from, spec.to}] =
            Matrix(n_snap, dec.interface_dofs(spec.from, spec.to, dec.mesh_h));
    std::size_t row = 0;
    for (const auto& rs : run_snaps)
        for (const auto& state : rs) {
            for (const auto& [key, vec] : state)
                for (std::size_t j = 0; j < vec.size(); ++j) snaps[key](row, j) = vec[j];
            ++row;
        }

    std::map<InterfaceKey, PODBasis> pod;
    for (const auto& spec : dec.interfaces) {
        const InterfaceKey key{spec.from, spec.to};
        pod[key] = build_pod(snaps.at(key), spec.pod_modes);
        std::vector<std::pair<std::string, Vec>> rows;
        rows.emplace_back("mean", pod[key].mean);
        rows.emplace_back("singular", pod[key].singular);
        for (std::size_t d = 0; d < pod[key].mean.size(); ++d) {
            Vec row(pod[key].n_modes());
            for (std::size_t k = 0; k < row.size(); ++k) row[k] = pod[key].modes(d, k);
            rows.emplace_back("mode", std::move(row));
        }
        write_rows(path_pod(spec.from, spec.to), rows);
    }

    // per-subdomain Gaussian proposals over concatenated input coefficients
    for (int i = 0; i < m; ++i) {
        std::size_t width = 0;
        for (int j : dec.neighbors(i)) width += pod.at({j, i}).n_modes();
        Matrix coeffs(n_snap, width);
        for (std::size_t s = 0; s < n_snap; ++s) {
            std::size_t off = 0;
            for (int j : dec.neighbors(i)) {
                const PODBasis& basis = pod.at({j, i});
                Vec nodal(snaps.at({j, i}).row(s), snaps.at({j, i}).row(s) + snaps.at({j, i}).cols);
                const Vec c = basis.project(nodal);
                for (std::size_t k = 0; k < c.size(); ++k) coeffs(s, off + k) = c[k];
                off += c.size();
            }
        }
        const GaussianProposal proposal = GaussianProposal::fit(coeffs);
        std::vector<std::pair<std::string, Vec>> rows;
        rows.emplace_back("mean", proposal.mean());
        for (std::size_t a = 0; a < proposal.dim(); ++a) {
            Vec row(proposal.dim());
            for (std::size_t b = 0; b < proposal.dim(); ++b) row[b] = proposal.covariance()(a, b);
            rows.emplace_back("cov", std::move(row));
        }
        write_rows(path_proposal(i), rows);
    }
    append_manifest("prep");
}

// ---------------------------------------------------------------------------
// artifact loading

KLBasis Pipeline::load_kl(int i) const {
    require_file(path_kl(i), "prep");
    const auto rows = read_rows(path_kl(i));
    if (rows.empty() || rows[0].first != "lambda")
        throw UsageError("pipeline: malformed KL file " + path_kl(i));
    KLBasis basis;
    basis.eigenvalues = rows[0].second;
    const std::size_t n_nodes = rows.size() - 1;
    basis.eigenfunctions.resize(n_nodes, basis.eigenvalues.size());
    for (std::size_t node = 0; node < n_nodes; ++node) {
        const Vec& row = rows[node + 1].second;
        if (row.size() != basis.eigenvalues.size())
            throw UsageError("pipeline: malformed KL file " + path_kl(i));
        for (std::size_t k = 0; k < row.size(); ++k) basis.eigenfunctions(node, k) = row[k];
    }
    const Mesh2D& mesh = meshes_[i];
    basis.weights.resize(mesh.n_nodes());
    for (std::size_t id = 0; id < mesh.n_nodes(); ++id) {
        const std::size_t ix = id % (mesh.nx + 1), iy = id / (mesh.nx + 1);
        basis.weights[id] = ((ix == 0 || ix == mesh.nx) ? 0.5 * mesh.h : mesh.h) *
                            ((iy == 0 || iy == mesh.ny) ? 0.5 * mesh.h : mesh.h);
    }
    return basis;
}

PODBasis Pipeline::load_pod(int from, int to) const {
    require_file(path_pod(from, to), "prep");
    const auto rows = read_rows(path_pod(from, to));
    if (rows.size() < 3 || rows[0].first != "mean" || rows[1].first != "singular")
        throw UsageError("pipeline: malformed POD file " + path_pod(from, to));
    PODBasis basis;
    basis.mean = rows[0].second;
    basis.singular = rows[1].second;
    const std::size_t dofs = basis.mean.size();
    if (rows.size() != dofs + 2)
        throw UsageError("pipeline: malformed POD file " + path_pod(from, to));
    const std::size_t modes = rows[2].second.size();
    basis.modes.resize(dofs, modes);
    for (std::size_t d = 0; d < dofs; ++d)
        for (std::size_t k = 0; k < modes; ++k) basis.modes(d, k) = rows[d + 2].second[k];
    return basis;
}

GaussianProposal Pipeline::load_proposal(int i) const {
    require_file(path_proposal(i), "prep");
    const auto rows = read_rows(path_proposal(i));
    if (rows.empty() || rows[0].first != "mean")
        throw UsageError("pipeline: malformed proposal file " + path_proposal(i));
    const Vec mean = rows[0].second;
    Matrix cov(mean.size(), mean.size());
    if (rows.size() != mean.size() + 1)
        throw UsageError("pipeline: malformed proposal file " + path_proposal(i));
    for (std::size_t a = 0; a < mean.size(); ++a)
        for (std::size_t b = 0; b < mean.size(); ++b) cov(a, b) = rows[a + 1].second[b];
    return GaussianProposal(mean, cov);
}

SampleTable Pipeline::load_offline(int i) const {
    require_file(path_offline(i), "offline");
    return SampleTable::read(path_offline(i));
}

SampleTable Pipeline::load_online(int i) const {
    require_file(path_online(i), "online");
    return SampleTable::read(path_online(i));
}

SampleTable Pipeline::load_reference() const {
    require_file(path_reference(), "report");
    return SampleTable::read(path_reference());
}

// ---------------------------------------------------------------------------
// offline: local Monte Carlo with the proposal PDF

void Pipeline::offline() {
    const Decomposition& dec = cfg_.dec;
    const int m = dec.n_subdomains();
    std::map<InterfaceKey, PODBasis> pod;
    for (const auto& spec : dec.interfaces)
        pod[{spec.from, spec.to}] = load_pod(spec.from, spec.to);

    json drops_meta;
    for (int i = 0; i < m; ++i) {
        const KLBasis kl = load_kl(i);
        const GaussianProposal proposal = load_proposal(i);
        const InputLaw law;
        const std::size_t modes = dec.subdomains[i].field.n_modes;
        const auto neighbors = dec.neighbors(i);
        std::vector<std::size_t> out_ids;
        for (std::size_t k = 0; k < cfg_.outputs.size(); ++k)
            if (cfg_.outputs[k].subdomain == i) out_ids.push_back(k);

        std::vector<std::string> columns;
        for (std::size_t k = 1; k <= modes; ++k) columns.push_back("xi_" + std::to_string(k));
        for (std::size_t k = 1; k <= proposal.dim(); ++k)
            columns.push_back("tau_" + std::to_string(k));
        for (std::size_t k : out_ids) columns.push_back("y_" + std::to_string(k + 1));
        for (int j : neighbors) {
            const std::size_t nm = pod.at({i, j}).n_modes();
            for (std::size_t k = 1; k <= nm; ++k)
                columns.push_back("h_" + std::to_string(j + 1) + "_" + std::to_string(k));
        }
        columns.push_back("w");

        const std::uint64_t stage_seed = stage_sample_seed(kSeedOffline + static_cast<std::uint64_t>(i));
        const std::size_t n = cfg_.n_off;
        Matrix rows(n, columns.size());
        std::vector<char> ok(n, 0);
        parallel_for(n, workers_, [&](std::size_t s) {
            Rng rng = Rng::derive(stage_seed, s);
            const Vec xi = law.sample(modes, rng);
            const Vec tau = proposal.sample(rng);
            try {
                const Vec field = evaluate_field(kl, dec.subdomains[i].field, xi);
                LocalSolver solver(meshes_[i], field, dirichlet_sides(dec, i));
                const double f = dec.source;
                const Vec u = solver.solve([f](double, double) { return f; },
                                           interface_boundary_conditions(dec, i, tau, &pod));
                const auto hs = extract_couplings(dec, i, u, field, meshes_[i], &pod);
                double* row = rows.row(s);
                std::size_t c = 0;
                for (double v : xi) row[c++] = v;
                for (double v : tau) row[c++] = v;
                for (std::size_t k : out_ids)
                    row[c++] = evaluate_output(u, meshes_[i], cfg_.outputs[k].segment);
                for (int j : neighbors)
                    for (double v : hs.at(j)) row[c++] = v;
                row[c++] = 0.0;  // weights assigned by the online stage
                ok[s] = 1;
            } catch (const NumericError&) {
                ok[s] = 0;  // dropped row
            }
        });

        SampleTable table;
        table.columns = columns;
        std::size_t kept = 0;
        for (std::size_t s = 0; s < n; ++s) kept += ok[s];
        const std::size_t dropped = n - kept;
        if (static_cast<double>(dropped) > 0.01 * static_cast<double>(n))
            throw NumericError("offline: " + std::to_string(dropped) + " of " + std::to_string(n) +
                               " local solves failed (above the 1% drop budget)");
        table.data.resize(kept, columns.size());
        std::size_t r = 0;
        for (std::size_t s = 0; s < n; ++s) {
            if (!ok[s]) continue;
            std::copy_n(rows.row(s), columns.size(), table.data.row(r));
            ++r;
        }
        table.write(path_offline(i));
        drops_meta["subdomain_" + std::to_string(i + 1)] = {{"attempted", n}, {"dropped", dropped}};
    }
    write_json(out_ + "/offline_meta.json", drops_meta);
    append_manifest("offline");
}

// ---------------------------------------------------------------------------
// surrogate training

void Pipeline::surrogates() {
    const Decomposition& dec = cfg_.dec;
    json report;
    for (const auto& spec : dec.interfaces) {
        const int i = spec.from, j = spec.to;
        const SampleTable table = load_offline(i);
        const Matrix xi = table.column_group("xi");
        const Matrix tau = table.column_group("tau");
        const Matrix h = table.column_group("h_" + std::to_string(j + 1));
        Matrix x(table.rows(), xi.cols + tau.cols);
        for (std::size_t s = 0; s < table.rows(); ++s) {
            std::copy_n(xi.row(s), xi.cols, x.row(s));
            std::copy_n(tau.row(s), tau.cols, x.row(s) + xi.cols);
        }
        SurrogateConfig scfg;
        scfg.in_dim = x.cols;
        scfg.out_dim = h.cols;
        scfg.width = cfg_.surrogate.width;
        scfg.blocks = cfg_.surrogate.blocks;
        scfg.batch = cfg_.surrogate.batch;
        scfg.max_epochs = cfg_.surrogate.max_epochs;
        scfg.patience = cfg_.surrogate.patience;
        scfg.lr = cfg_.surrogate.lr;
        scfg.seed = stage_sample_seed(kSeedSurrogate + 16ULL * static_cast<std::uint64_t>(i) +
                                      static_cast<std::uint64_t>(j));
        Rng rng(scfg.seed);
        CouplingSurrogate model(scfg, rng);
        const auto result = train_surrogate(model, x, h, scfg);
        save_checkpoint(path_surrogate(i, j), model.to_checkpoint());
        const std::string key =
            "surrogate_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
        report[key] = {{"val_mse", result.best_val_mse},
                       {"best_epoch", result.best_epoch},
                       {"epochs_run", result.val_mse.size()},
                       {"warning_mse_above_ceiling",
                        result.best_val_mse > cfg_.surrogate.mse_ceiling}};
    }
    write_json(out_ + "/surrogate_report.json", report);
    append_manifest("surrogate");
}

// ---------------------------------------------------------------------------
// online: surrogate-coupled iteration, cKRnet training, weights

namespace {

// coupling oracle backed by the trained surrogates; one instance per sample
struct SurrogateSession final : CouplingSession {
    const Decomposition& dec;
    const std::map<InterfaceKey, CouplingSurrogate>& surrogates;
    const std::vector<Vec>& xi;

    SurrogateSession(const Decomposition& d, const std::map<InterfaceKey, CouplingSurrogate>& s,
                     const std::vector<Vec>& x)
        : dec(d), surrogates(s), xi(x) {}

    std::map<int, Vec> couple(int i, const Vec& tau_i) override {
        Vec input = xi[i];
        input.insert(input.end(), tau_i.begin(), tau_i.end());
        std::map<int, Vec> out;
        for (int j : dec.neighbors(i)) out[j] = surrogates.at({i, j}).eval_one(input);
        return out;
    }
};

}  // namespace

void Pipeline::online() {
    const Decomposition& dec = cfg_.dec;
    const int m = dec.n_subdomains();
    std::map<InterfaceKey, PODBasis> pod;
    std::map<InterfaceKey, CouplingSurrogate> surrogates;
    for (const auto& spec : dec.interfaces) {
        const InterfaceKey key{spec.from, spec.to};
        pod[key] = load_pod(spec.from, spec.to);
        require_file(path_surrogate(spec.from, spec.to), "surrogate");
        surrogates.emplace(
            key, CouplingSurrogate::from_checkpoint(load_checkpoint(path_surrogate(spec.from, spec.to))));
    }

    const std::size_t n = cfg_.n_on;
    const std::uint64_t stage_seed = stage_sample_seed(kSeedOnline);
    const InputLaw law;

    struct SampleResult {
        std::vector<Vec> tau_inf;  // per subdomain, concatenated inputs
        std::map<InterfaceKey, std::vector<double>> histories;
        double final_eps = 0.0;
        bool converged = false;
    };
    std::vector<SampleResult> results(n);
    std::vector<std::vector<Vec>> xis(n);

    parallel_for(n, workers_, [&](std::size_t s) {
        Rng rng = Rng::derive(stage_seed, s);
        std::vector<Vec> xi;
        for (int i = 0; i < m; ++i) xi.push_back(law.sample(dec.subdomains[i].field.n_modes, rng));
        xis[s] = xi;
        SurrogateSession session(dec, surrogates, xi);
        std::map<InterfaceKey, Vec> tau0;
        for (const auto& spec : dec.interfaces)
            tau0[{spec.from, spec.to}] = Vec(pod.at({spec.from, spec.to}).n_modes(), 0.0);
        const auto it = dd_iterate(dec, session, tau0, cfg_.dd_tol, cfg_.dd_max_steps);
        SampleResult& r = results[s];
        r.converged = it.converged;
        r.final_eps = it.indicator.empty() ? 0.0 : it.indicator.back();
        r.histories = it.indicator_by_interface;
        for (int i = 0; i < m; ++i) r.tau_inf.push_back(concat_inputs(dec, i, it.tau));
    });

    std::size_t nonconverged = 0;
    for (const auto& r : results) nonconverged += r.converged ? 0 : 1;
    if (static_cast<double>(nonconverged) > 0.01 * static_cast<double>(n)) {
        // histogram of final indicators over decades
        std::map<int, std::size_t> histogram;
        for (const auto& r : results) {
            const double e = std::max(r.final_eps, 1e-300);
            histogram[static_cast<int>(std::floor(std::log10(e)))]++;
        }
        std::ostringstream os;
        os << "online: " << nonconverged << " of " << n
           << " iterations did not converge (above the 1% budget); final-indicator histogram:";
        for (const auto& [decade, count] : histogram)
            os << " [1e" << decade << ": " << count << "]";
        throw NumericError(os.str());
    }

    // per-subdomain indicator series: max over samples per step
    json diagnostics;
    for (int i = 0; i < m; ++i) {
        std::vector<double> series;
        for (const auto& r : results) {
            for (int j : dec.neighbors(i)) {
                const auto it = r.histories.find({j, i});
                if (it == r.histories.end()) continue;
                if (series.size() < it->second.size()) series.resize(it->second.size(), 0.0);
                for (std::size_t k = 0; k < it->second.size(); ++k)
                    series[k] = std::max(series[k], it->second[k]);
            }
        }
        diagnostics["indicator_subdomain_" + std::to_string(i + 1)] = series;
        const auto [slope, r2] = log_linear_fit(series);
        diagnostics["indicator_fit_subdomain_" + std::to_string(i + 1)] = {{"slope", slope},
                                                                           {"r2", r2}};
        // persist the series as CSV for plotting
        std::ofstream cs(out_ + "/indicator_" + std::to_string(i + 1) + ".csv", std::ios::trunc);
        cs << "step,eps\n";
        for (std::size_t k = 0; k < series.size(); ++k)
            cs << (k + 1) << "," << format_double(series[k]) << "\n";
    }
    diagnostics["nonconverged"] = nonconverged;
    diagnostics["n_on"] = n;

    // target samples and conditional density estimation per subdomain
    for (int i = 0; i < m; ++i) {
        const std::size_t modes = dec.subdomains[i].field.n_modes;
        std::size_t tau_dim = 0;
        for (int j : dec.neighbors(i)) tau_dim += pod.at({j, i}).n_modes();
        Matrix alpha(n, tau_dim), cond(n, modes);
        for (std::size_t s = 0; s < n; ++s) {
            std::copy_n(results[s].tau_inf[i].begin(), tau_dim, alpha.row(s));
            std::copy_n(xis[s][i].begin(), modes, cond.row(s));
        }
        // persist the target samples
        SampleTable online_table;
        for (std::size_t k = 1; k <= modes; ++k)
            online_table.columns.push_back("xi_" + std::to_string(k));
        for (std::size_t k = 1; k <= tau_dim; ++k)
            online_table.columns.push_back("tau_" + std::to_string(k));
        online_table.data.resize(n, modes + tau_dim);
        for (std::size_t s = 0; s < n; ++s) {
            std::copy_n(cond.row(s), modes, online_table.data.row(s));
            std::copy_n(alpha.row(s), tau_dim, online_table.data.row(s) + modes);
        }
        online_table.write(path_online(i));

        FlowConfig fcfg;
        fcfg.dim = tau_dim;
        fcfg.cond_dim = modes;
        fcfg.stages = cfg_.flow_stages(i);
        fcfg.couplings_per_stage = cfg_.flow.couplings;
        fcfg.hidden_width = cfg_.flow.width;
        fcfg.gamma = cfg_.flow.gamma;
        const std::uint64_t fseed = stage_sample_seed(kSeedFlow + static_cast<std::uint64_t>(i));
        Rng frng(fseed);
        FlowModel flow(fcfg, frng);
        FlowTrainConfig tcfg;
        tcfg.batch = std::min(cfg_.flow.batch, n);
        tcfg.epochs = cfg_.flow.epochs;
        tcfg.lr = cfg_.flow.lr;
        tcfg.seed = fseed ^ 0x5bd1e995;
        const auto train = train_flow(flow, alpha, cond, tcfg);
        save_checkpoint(path_flow(i), flow.to_checkpoint());
        diagnostics["flow_subdomain_" + std::to_string(i + 1)] = {
            {"initial_nll", train.initial_train_nll},
            {"final_nll", train.final_train_nll},
            {"holdout_nll", train.holdout_nll}};

        // re-weight the offline outputs
        SampleTable offline_table = load_offline(i);
        const Matrix off_tau = offline_table.column_group("tau");
        const Matrix off_xi = offline_table.column_group("xi");
        const GaussianProposal proposal = load_proposal(i);
        const WeightsResult wr = compute_weights(flow, off_tau, off_xi, proposal);
        offline_table.set_column("w", wr.weights);
        offline_table.write(path_offline(i));
        diagnostics["weights_subdomain_" + std::to_string(i + 1)] = {
            {"clamp_count", wr.clamp_count},
            {"ess", effective_sample_size(wr.weights)}};
    }
    write_json(path_diagnostics(), diagnostics);
    append_manifest("online");
}

// ---------------------------------------------------------------------------
// report: reference Monte Carlo (cached), moments, errors, PDFs

void Pipeline::report() {
    const Decomposition& dec = cfg_.dec;
    const int m = dec.n_subdomains();
    for (int i = 0; i < m; ++i) require_file(path_offline(i), "offline");
    require_file(path_diagnostics(), "online");

    // reference output samples from monolithic solves, cached per config+seed
    const std::string ref_meta_path = out_ + "/reference_meta.json";
    bool have_reference = std::filesystem::exists(path_reference()) &&
                          std::filesystem::exists(ref_meta_path);
    if (have_reference) {
        const json meta = read_json(ref_meta_path);
        have_reference = meta.value("config_hash", std::string()) == hex64(config_hash(cfg_)) &&
                         meta.value("seed", std::uint64_t(0)) == seed_ &&
                         meta.value("n_ref", std::size_t(0)) == cfg_.n_ref;
    }
    if (!have_reference) {
        std::vector<KLBasis> kl;
        for (int i = 0; i < m; ++i) kl.push_back(load_kl(i));
        const std::uint64_t stage_seed = stage_sample_seed(kSeedReference);
        const InputLaw law;
        const std::size_t n = cfg_.n_ref;
        Matrix rows(n, cfg_.outputs.size());
        std::vector<char> ok(n, 0);
        parallel_for(n, workers_, [&](std::size_t s) {
            Rng rng = Rng::derive(stage_seed, s);
            std::vector<Vec> xi;
            for (int i = 0; i < m; ++i)
                xi.push_back(law.sample(dec.subdomains[i].field.n_modes, rng));
            try {
                const auto [gmesh, gu] = solve_global(dec, meshes_, kl, xi);
                for (std::size_t k = 0; k < cfg_.outputs.size(); ++k)
                    rows(s, k) = evaluate_output(gu, gmesh, cfg_.outputs[k].segment);
                ok[s] = 1;
            } catch (const NumericError&) {
                ok[s] = 0;
            }
        });
        std::size_t kept = 0;
        for (std::size_t s = 0; s < n; ++s) kept += ok[s];
        if (static_cast<double>(n - kept) > 0.01 * static_cast<double>(n))
            throw NumericError("report: reference solves dropped above the 1% budget");
        SampleTable ref;
        for (std::size_t k = 0; k < cfg_.outputs.size(); ++k)
            ref.columns.push_back("y_" + std::to_string(k + 1));
        ref.data.resize(kept, cfg_.outputs.size());
        std::size_t r = 0;
        for (std::size_t s = 0; s < n; ++s) {
            if (!ok[s]) continue;
            std::copy_n(rows.row(s), cfg_.outputs.size(), ref.data.row(r));
            ++r;
        }
        ref.write(path_reference());
        write_json(ref_meta_path, json{{"config_hash", hex64(config_hash(cfg_))},
                                       {"seed", seed_},
                                       {"n_ref", cfg_.n_ref},
                                       {"dropped", n - kept}});
    }
    const SampleTable ref = load_reference();

    json report;
    report["n_off"] = cfg_.n_off;
    report["n_on"] = cfg_.n_on;
    report["n_ref"] = ref.rows();
    if (std::filesystem::exists(out_ + "/offline_meta.json"))
        report["offline_drops"] = read_json(out_ + "/offline_meta.json");
    const json diagnostics = read_json(path_diagnostics());
    report["nonconverged"] = diagnostics.value("nonconverged", 0);

    for (int i = 0; i < m; ++i) {
        const SampleTable table = load_offline(i);
        const Vec w = table.column("w");
        json sub;
        sub["ess"] = effective_sample_size(w);
        const std::string wkey = "weights_subdomain_" + std::to_string(i + 1);
        if (diagnostics.contains(wkey))
            sub["clamp_count"] = diagnostics[wkey].value("clamp_count", 0);
        report["subdomain_" + std::to_string(i + 1)] = sub;
    }

    for (std::size_t k = 0; k < cfg_.outputs.size(); ++k) {
        const int i = cfg_.outputs[k].subdomain;
        const SampleTable table = load_offline(i);
        const Vec w = table.column("w");
        const Vec y = table.column("y_" + std::to_string(k + 1));
        const Moments est = weighted_moments(y, w);
        const Vec yref = ref.column("y_" + std::to_string(k + 1));
        Moments rm;
        for (double v : yref) rm.mean += v;
        rm.mean /= static_cast<double>(yref.size());
        for (double v : yref) rm.variance += (v - rm.mean) * (v - rm.mean);
        rm.variance /= static_cast<double>(yref.size());
        const ErrorMetrics err = error_metrics(est, rm);
        json out;
        out["subdomain"] = i + 1;
        out["mean"] = est.mean;
        out["variance"] = est.variance;
        out["reference_mean"] = rm.mean;
        out["reference_variance"] = rm.variance;
        out["mean_error"] = err.mean_error;
        out["variance_error"] = err.variance_error;
        if (!cfg_.report_thresholds.empty()) {
            json probs;
            for (double a : cfg_.report_thresholds)
                probs[format_double(a)] = exceedance_probability(y, w, a);
            out["probability_below"] = probs;
        }
        report["output_" + std::to_string(k + 1)] = out;

        // weighted output PDF curve plus the reference curve
        KdeModel kde(y, w);
        KdeModel ref_kde(yref);
        double lo = y[0], hi = y[0];
        for (double v : y) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (double v : yref) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        lo -= 3.0 * kde.bandwidth();
        hi += 3.0 * kde.bandwidth();
        std::ofstream cs(out_ + "/pdf_" + std::to_string(k + 1) + ".csv", std::ios::trunc);
        cs << "y,density,reference_density\n";
        const int grid = 256;
        for (int g = 0; g < grid; ++g) {
            const double x = lo + (hi - lo) * static_cast<double>(g) / (grid - 1);
            cs << format_double(x) << "," << format_double(kde.pdf(x)) << ","
               << format_double(ref_kde.pdf(x)) << "\n";
        }
    }
    write_json(path_report(), report);
    append_manifest("report");
}

// ---------------------------------------------------------------------------
// the 16-d Gaussian mixture flow benchmark

MixtureLaw benchmark_mixture(std::size_t dim, std::uint64_t cov_seed) {
    const Vec mu1{-1, -1, -0.3, -0.3, -0.4, -0.4, -1.6, -1.6,
                  -0.8, -0.8, -0.5, -0.5, -0.5, -0.3, -1, -1};
    const Vec mu3{32, 32, 32.6, 32.6, 32.8, 32.8, 33.2, 33.2,
                  32.4, 32.4, 30.8, 30.8, 31, 31, 31.6, 31.6};
    if (dim > 16) throw ConfigError("benchmark mixture supports up to 16 dimensions");
    Matrix means(3, dim);
    for (std::size_t j = 0; j < dim; ++j) {
        means(0, j) = mu1[j];
        means(2, j) = mu3[j];
        means(1, j) = 0.5 * (mu1[j] + mu3[j]);
    }
    Rng rng(cov_seed);
    std::vector<Matrix> covs;
    for (int k = 0; k < 3; ++k) {
        Matrix factor(dim, dim);
        for (auto& v : factor.data) v = rng.uniform01();
        Matrix cov(dim, dim);
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b) {
                double s = 0;
                for (std::size_t l = 0; l < dim; ++l) s += factor(a, l) * factor(b, l);
                cov(a, b) = s;
            }
        covs.push_back(std::move(cov));
    }
    return MixtureLaw(Vec{0.3, 0.4, 0.3}, means, covs);
}

BenchCaseResult run_bench_case(const MixtureLaw& mixture, const BenchSection& bench,
                               std::size_t cond_dim, std::uint64_t seed) {
    const std::size_t dim = mixture.dim();
    if (cond_dim == 0 || cond_dim >= dim)
        throw ConfigError("bench: conditional dimension must lie strictly inside (0, dim)");
    const std::size_t alpha_dim = dim - cond_dim;

    const Matrix train = mixture.sample(bench.n_train, seed);
    const Matrix valid = mixture.sample(bench.n_valid, seed ^ 0xabcdef1234567ULL);
    const Vec ref_ld = mixture.logpdf_rows(valid);
    const MixtureLaw cond_marginal = mixture.marginal(alpha_dim, dim);

    auto split = [&](const Matrix& src, Matrix* a, Matrix* c) {
        a->resize(src.rows, alpha_dim);
        c->resize(src.rows, cond_dim);
        for (std::size_t i = 0; i < src.rows; ++i) {
            std::copy_n(src.row(i), alpha_dim, a->row(i));
            std::copy_n(src.row(i) + alpha_dim, cond_dim, c->row(i));
        }
    };
    Matrix train_a, train_c, valid_a, valid_c;
    split(train, &train_a, &train_c);
    split(valid, &valid_a, &valid_c);
    const Vec cond_ld = cond_marginal.logpdf_rows(valid_c);

    const std::size_t n_sub = std::min(bench.per_epoch_valid, bench.n_valid);

    FlowConfig ccfg;
    ccfg.dim = alpha_dim;
    ccfg.cond_dim = cond_dim;
    ccfg.stages = dim - cond_dim;  // R = dim - |c|, terminal layer included
    ccfg.couplings_per_stage = 4;
    ccfg.hidden_width = 32;
    if (ccfg.stages < 2) throw ConfigError("bench: dim - cond_dim must be at least 2");
    FlowConfig kcfg = ccfg;
    kcfg.dim = dim;
    kcfg.cond_dim = 0;

    Rng crng(seed ^ 0x11);
    Rng krng(seed ^ 0x22);
    FlowModel ckr(ccfg, crng);
    FlowModel kr(kcfg, krng);

    BenchCaseResult result;
    result.cond_dim = cond_dim;

    auto delta_ckr = [&](std::size_t rows) {
        Matrix a(rows, alpha_dim), c(rows, cond_dim);
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy_n(valid_a.row(i), alpha_dim, a.row(i));
            std::copy_n(valid_c.row(i), cond_dim, c.row(i));
        }
        Vec est = ckr.log_density(a, c);
        for (std::size_t i = 0; i < rows; ++i) est[i] += cond_ld[i];
        Vec ref(ref_ld.begin(), ref_ld.begin() + static_cast<long>(rows));
        return relative_kl_error(ref, est);
    };
    auto delta_kr = [&](std::size_t rows) {
        Matrix v(rows, dim);
        for (std::size_t i = 0; i < rows; ++i) std::copy_n(valid.row(i), dim, v.row(i));
        Vec est = kr.log_density(v, Matrix());
        Vec ref(ref_ld.begin(), ref_ld.begin() + static_cast<long>(rows));
        return relative_kl_error(ref, est);
    };

    FlowTrainConfig tc;
    tc.batch = bench.batch;
    tc.epochs = bench.epochs;
    tc.lr = bench.lr;
    tc.holdout_fraction = 0.0;  // the validation set is external here
    tc.seed = seed ^ 0x33;
    tc.on_epoch = [&](std::size_t) { result.delta_ckr.push_back(delta_ckr(n_sub)); };
    train_flow(ckr, train_a, train_c, tc);
    tc.seed = seed ^ 0x44;
    tc.on_epoch = [&](std::size_t) { result.delta_kr.push_back(delta_kr(n_sub)); };
    train_flow(kr, train, Matrix(), tc);

    result.final_delta_ckr = delta_ckr(bench.n_valid);
    result.final_delta_kr = delta_kr(bench.n_valid);
    return result;
}

void Pipeline::flow_bench() {
    const BenchSection& bench = cfg_.bench;
    const MixtureLaw mixture = benchmark_mixture(bench.dim, bench.cov_seed);
    json summary;
    summary["cov_seed"] = bench.cov_seed;
    for (std::size_t c = 0; c < bench.cond_dims.size(); ++c) {
        const std::size_t cond_dim = bench.cond_dims[c];
        const auto result = run_bench_case(mixture, bench, cond_dim,
                                           stage_sample_seed(kSeedBench + c));
        std::ofstream cs(out_ + "/bench_c" + std::to_string(cond_dim) + ".csv", std::ios::trunc);
        cs << "epoch,delta_ckr,delta_kr\n";
        for (std::size_t e = 0; e < result.delta_ckr.size(); ++e)
            cs << (e + 1) << "," << format_double(result.delta_ckr[e]) << ","
               << format_double(e < result.delta_kr.size() ? result.delta_kr[e] : 0.0) << "\n";
        summary["c" + std::to_string(cond_dim)] = {{"final_delta_ckr", result.final_delta_ckr},
                                                   {"final_delta_kr", result.final_delta_kr}};
    }
    write_json(out_ + "/bench_summary.json", summary);
    append_manifest("flow-bench");
}

}  // namespace ckr
