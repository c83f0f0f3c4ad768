#include "ckr/ddcore.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "ckr/util.hpp"

namespace ckr {

namespace {

bool close(double a, double b) { return std::abs(a - b) < 1e-12; }

}  // namespace

void Decomposition::validate() {
    if (subdomains.empty()) throw ConfigError("decomposition: no subdomains");
    if (mesh_h <= 0) throw ConfigError("decomposition: mesh_h must be positive");
    facing_.clear();

    for (const auto& spec : interfaces) {
        if (spec.from < 0 || spec.from >= n_subdomains() || spec.to < 0 ||
            spec.to >= n_subdomains() || spec.from == spec.to)
            throw ConfigError("decomposition: interface references unknown subdomain");
        if (spec.theta < 0)
            throw ConfigError("decomposition: negative relaxation factor on interface " +
                              std::to_string(spec.from + 1) + "->" + std::to_string(spec.to + 1));
        if (spec.pod_modes < 1)
            throw ConfigError("decomposition: interface needs at least one POD mode");
        bool has_reverse = false;
        for (const auto& other : interfaces)
            if (other.from == spec.to && other.to == spec.from) has_reverse = true;
        if (!has_reverse)
            throw ConfigError("decomposition: interface " + std::to_string(spec.from + 1) + "->" +
                              std::to_string(spec.to + 1) + " has no reverse direction");

        const Rect& a = subdomains[spec.from].rect;
        const Rect& b = subdomains[spec.to].rect;
        Side side_a;
        if (close(a.x1, b.x0) && close(a.y0, b.y0) && close(a.y1, b.y1)) side_a = Side::Right;
        else if (close(b.x1, a.x0) && close(a.y0, b.y0) && close(a.y1, b.y1)) side_a = Side::Left;
        else if (close(a.y1, b.y0) && close(a.x0, b.x0) && close(a.x1, b.x1)) side_a = Side::Top;
        else if (close(b.y1, a.y0) && close(a.x0, b.x0) && close(a.x1, b.x1)) side_a = Side::Bottom;
        else
            throw ConfigError("decomposition: subdomains " + std::to_string(spec.from + 1) +
                              " and " + std::to_string(spec.to + 1) +
                              " do not share a full edge");
        facing_[{spec.from, spec.to}] = side_a;
        facing_[{spec.to, spec.from}] = opposite_side(side_a);
    }

    for (int i = 0; i < n_subdomains(); ++i) {
        auto& spec = subdomains[i];
        spec.exterior_dirichlet.clear();
        for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top}) {
            bool is_interface = false;
            for (int j : neighbors(i))
                if (facing_.at({i, j}) == s) is_interface = true;
            if (!is_interface) spec.exterior_dirichlet.push_back(s);
        }
        if (spec.exterior_dirichlet.empty())
            throw ConfigError("decomposition: subdomain " + std::to_string(i + 1) +
                              " has no exterior Dirichlet boundary");
        // the meshes must exist on the common grid
        Mesh2D probe(spec.rect, mesh_h);
        (void)probe;
    }
}

const InterfaceSpec& Decomposition::interface(int from, int to) const {
    for (const auto& spec : interfaces)
        if (spec.from == from && spec.to == to) return spec;
    throw UsageError("decomposition: unknown interface " + std::to_string(from + 1) + "->" +
                     std::to_string(to + 1));
}

std::vector<int> Decomposition::neighbors(int i) const {
    std::vector<int> out;
    for (const auto& spec : interfaces)
        if (spec.to == i) out.push_back(spec.from);
    std::sort(out.begin(), out.end());
    return out;
}

Side Decomposition::facing_side(int of, int other) const {
    auto it = facing_.find({of, other});
    if (it == facing_.end())
        throw UsageError("decomposition: subdomains " + std::to_string(of + 1) + " and " +
                         std::to_string(other + 1) + " are not neighbors");
    return it->second;
}

std::size_t Decomposition::interface_dofs(int from, int to, double h) const {
    const Side s = facing_side(from, to);
    const Rect& r = subdomains[from].rect;
    const double len = (s == Side::Left || s == Side::Right) ? r.height() : r.width();
    return static_cast<std::size_t>(std::llround(len / h)) + 1;
}

// ---------------------------------------------------------------------------
// POD

Vec PODBasis::project(const Vec& nodal) const {
    if (nodal.size() != mean.size()) throw ConfigError("pod: data length mismatch");
    Vec coeffs(modes.cols, 0.0);
    for (std::size_t m = 0; m < modes.cols; ++m) {
        double s = 0.0;
        for (std::size_t i = 0; i < mean.size(); ++i)
            s += modes(i, m) * (nodal[i] - mean[i]);
        coeffs[m] = s;
    }
    return coeffs;
}

Vec PODBasis::reconstruct(const Vec& coeffs) const {
    if (coeffs.size() != modes.cols) throw ConfigError("pod: coefficient length mismatch");
    Vec out = mean;
    for (std::size_t m = 0; m < modes.cols; ++m)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += modes(i, m) * coeffs[m];
    return out;
}

PODBasis build_pod(const Matrix& snapshots, std::size_t retained) {
    const std::size_t n = snapshots.rows, d = snapshots.cols;
    if (retained > std::min(n, d))
        throw ConfigError("pod: retained count exceeds snapshot count or dimension");
    PODBasis basis;
    basis.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) basis.mean[j] += snapshots(i, j);
    for (auto& v : basis.mean) v /= static_cast<double>(n);

    Eigen::MatrixXd centered(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                snapshots(i, j) - basis.mean[j];

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    basis.singular.assign(sv.data(), sv.data() + sv.size());

    std::size_t rank = 0;
    const double floor_sv = sv.size() > 0 ? 1e-12 * std::max(sv(0), 1.0) : 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > floor_sv) ++rank;
    if (retained > rank) {
        std::ostringstream os;
        os << "pod: retained count " << retained << " exceeds numerical rank " << rank
           << "; singular values:";
        for (Eigen::Index k = 0; k < sv.size(); ++k) os << " " << sv(k);
        throw NumericError(os.str());
    }

    basis.modes.resize(d, retained);
    for (std::size_t m = 0; m < retained; ++m) {
        Eigen::VectorXd v = svd.matrixV().col(static_cast<Eigen::Index>(m));
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0) v = -v;
        for (std::size_t i = 0; i < d; ++i) basis.modes(i, m) = v(static_cast<Eigen::Index>(i));
    }
    return basis;
}

// ---------------------------------------------------------------------------
// iteration

Vec dn_update(const Vec& tau, const Vec& h, double theta) {
    if (theta < 0) throw ConfigError("dn_update: negative relaxation factor");
    if (tau.size() != h.size()) throw ConfigError("dn_update: size mismatch");
    if (theta == 0.0) return h;  // direct replacement; the literal formula would freeze
    Vec out(tau.size());
    for (std::size_t k = 0; k < tau.size(); ++k) out[k] = tau[k] + theta * (h[k] - tau[k]);
    return out;
}

Vec concat_inputs(const Decomposition& dec, int i, const std::map<InterfaceKey, Vec>& tau) {
    Vec out;
    for (int j : dec.neighbors(i)) {
        const Vec& t = tau.at({j, i});
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

IterationResult dd_iterate(const Decomposition& dec, CouplingSession& session,
                           const std::map<InterfaceKey, Vec>& tau0, double tol,
                           std::size_t max_steps, bool record_trace) {
    if (tol <= 0) throw ConfigError("dd_iterate: tolerance must be positive");
    IterationResult result;
    result.tau = tau0;
    for (std::size_t k = 1; k <= max_steps; ++k) {
        // parallel structure: all couplings evaluated from the current state
        std::map<InterfaceKey, Vec> exported;
        for (int i = 0; i < dec.n_subdomains(); ++i) {
            const Vec tau_i = concat_inputs(dec, i, result.tau);
            auto hs = session.couple(i, tau_i);
            for (auto& [j, h] : hs) exported[{i, j}] = std::move(h);
        }
        double eps = 0.0;
        for (const auto& spec : dec.interfaces) {
            const InterfaceKey key{spec.from, spec.to};
            Vec next = dn_update(result.tau.at(key), exported.at(key), spec.theta);
            for (double v : next) {
                if (!std::isfinite(v))
                    throw NumericError("dd_iterate: non-finite interface value at step " +
                                       std::to_string(k));
            }
            const Vec& prev = result.tau.at(key);
            double eps_if = 0.0;
            for (std::size_t m = 0; m < next.size(); ++m)
                eps_if = std::max(eps_if, std::abs(next[m] - prev[m]));
            result.indicator_by_interface[key].push_back(eps_if);
            eps = std::max(eps, eps_if);
            result.tau[key] = std::move(next);
        }
        result.indicator.push_back(eps);
        if (record_trace) result.trace.push_back(result.tau);
        result.steps = k;
        if (eps < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// per-subdomain solve plumbing

std::vector<Side> dirichlet_sides(const Decomposition& dec, int i) {
    std::vector<Side> out = dec.subdomains[i].exterior_dirichlet;
    for (int j : dec.neighbors(i))
        if (dec.interface(j, i).kind == CouplingKind::Dirichlet)
            out.push_back(dec.facing_side(i, j));
    return out;
}

std::map<Side, SideBc> interface_boundary_conditions(const Decomposition& dec, int i,
                                                     const Vec& tau_i,
                                                     const std::map<InterfaceKey, PODBasis>* pod) {
    std::map<Side, SideBc> bcs;
    for (Side s : dec.subdomains[i].exterior_dirichlet) {
        SideBc bc;
        bc.kind = BcKind::DirichletConst;
        bc.value = 0.0;
        bcs[s] = bc;
    }
    std::size_t offset = 0;
    for (int j : dec.neighbors(i)) {
        const InterfaceSpec& spec = dec.interface(j, i);
        const std::size_t dofs = dec.interface_dofs(j, i, dec.mesh_h);
        const std::size_t width = pod ? pod->at({j, i}).n_modes() : dofs;
        if (offset + width > tau_i.size())
            throw ConfigError("coupling session: interface inputs shorter than expected");
        Vec slice(tau_i.begin() + offset, tau_i.begin() + offset + width);
        offset += width;
        const Vec nodal = pod ? pod->at({j, i}).reconstruct(slice) : slice;
        if (nodal.size() != dofs)
            throw ConfigError("coupling session: interface data length mismatch");
        SideBc bc;
        bc.kind = spec.kind == CouplingKind::Dirichlet ? BcKind::DirichletNodal
                                                       : BcKind::NeumannNodal;
        bc.nodal = nodal;
        bcs[dec.facing_side(i, j)] = bc;
    }
    if (offset != tau_i.size())
        throw ConfigError("coupling session: interface inputs longer than expected");
    return bcs;
}

std::map<int, Vec> extract_couplings(const Decomposition& dec, int i, const Vec& u,
                                     const Vec& field, const Mesh2D& mesh,
                                     const std::map<InterfaceKey, PODBasis>* pod) {
    const double f = dec.source;
    const auto source = [f](double, double) { return f; };
    std::map<int, Vec> out;
    for (int j : dec.neighbors(i)) {
        const InterfaceSpec& spec = dec.interface(i, j);
        const Side side = dec.facing_side(i, j);
        Vec data = spec.kind == CouplingKind::Dirichlet
                       ? extract_trace(u, mesh, side)
                       : extract_flux(u, field, mesh, side, source);
        out[j] = pod ? pod->at({i, j}).project(data) : std::move(data);
    }
    return out;
}

// ---------------------------------------------------------------------------
// exact PDE session

PdeCouplingSession::PdeCouplingSession(const Decomposition& dec,
                                       const std::vector<Mesh2D>& meshes,
                                       const std::vector<KLBasis>& kl,
                                       const std::vector<Vec>& xi,
                                       const std::map<InterfaceKey, PODBasis>* pod)
    : dec_(dec), meshes_(meshes), pod_(pod) {
    for (int i = 0; i < dec.n_subdomains(); ++i) {
        fields_.push_back(evaluate_field(kl[i], dec.subdomains[i].field, xi[i]));
        solvers_.push_back(
            std::make_unique<LocalSolver>(meshes_[i], fields_[i], dirichlet_sides(dec, i)));
    }
}

std::map<Side, SideBc> PdeCouplingSession::boundary_conditions(int i, const Vec& tau_i) const {
    return interface_boundary_conditions(dec_, i, tau_i, pod_);
}

Vec PdeCouplingSession::solve_subdomain(int i, const Vec& tau_i) const {
    const double f = dec_.source;
    return solvers_[i]->solve([f](double, double) { return f; }, boundary_conditions(i, tau_i));
}

std::map<int, Vec> PdeCouplingSession::couple(int i, const Vec& tau_i) {
    const Vec u = solve_subdomain(i, tau_i);
    return extract_couplings(dec_, i, u, fields_[i], meshes_[i], pod_);
}

// ---------------------------------------------------------------------------
// monolithic reference solve

std::pair<Mesh2D, Vec> solve_global(const Decomposition& dec, const std::vector<Mesh2D>& meshes,
                                    const std::vector<KLBasis>& kl, const std::vector<Vec>& xi) {
    Rect bbox = dec.subdomains[0].rect;
    double area = 0.0;
    for (const auto& s : dec.subdomains) {
        bbox.x0 = std::min(bbox.x0, s.rect.x0);
        bbox.y0 = std::min(bbox.y0, s.rect.y0);
        bbox.x1 = std::max(bbox.x1, s.rect.x1);
        bbox.y1 = std::max(bbox.y1, s.rect.y1);
        area += s.rect.width() * s.rect.height();
    }
    if (std::abs(area - bbox.width() * bbox.height()) > 1e-9)
        throw ConfigError("solve_global: subdomains do not tile a rectangle");

    Mesh2D gmesh(bbox, dec.mesh_h);
    const std::size_t n = gmesh.n_nodes();
    BandedSpd matrix(n, gmesh.nx + 2);
    Vec load(n, 0.0);

    std::vector<bool> constrained(n, false);
    for (Side s : {Side::Left, Side::Right, Side::Bottom, Side::Top})
        for (std::size_t id : gmesh.side_nodes(s)) constrained[id] = true;

    const double g = 1.0 / std::sqrt(3.0);
    const double cx[4] = {-1, 1, 1, -1}, cy[4] = {-1, -1, 1, 1};
    const double xs[4] = {-g, g, g, -g}, ys[4] = {-g, -g, g, g};

    for (int si = 0; si < dec.n_subdomains(); ++si) {
        const Mesh2D& lm = meshes[si];
        const Vec field = evaluate_field(kl[si], dec.subdomains[si].field, xi[si]);
        const std::size_t ox = static_cast<std::size_t>(
            std::llround((lm.rect.x0 - bbox.x0) / dec.mesh_h));
        const std::size_t oy = static_cast<std::size_t>(
            std::llround((lm.rect.y0 - bbox.y0) / dec.mesh_h));
        for (std::size_t ey = 0; ey < lm.ny; ++ey) {
            for (std::size_t ex = 0; ex < lm.nx; ++ex) {
                const auto lnodes = lm.element_nodes(ex, ey);
                std::array<std::size_t, 4> gnodes;
                for (int c = 0; c < 4; ++c) {
                    const std::size_t lix = lnodes[c] % (lm.nx + 1);
                    const std::size_t liy = lnodes[c] / (lm.nx + 1);
                    gnodes[c] = gmesh.node_id(lix + ox, liy + oy);
                }
                // element stiffness, same quadrature as the local assembly
                double ke[4][4] = {};
                for (int q = 0; q < 4; ++q) {
                    double nq[4], dxi[4], deta[4], aq = 0.0;
                    for (int c = 0; c < 4; ++c) {
                        nq[c] = 0.25 * (1 + cx[c] * xs[q]) * (1 + cy[c] * ys[q]);
                        dxi[c] = 0.25 * cx[c] * (1 + cy[c] * ys[q]);
                        deta[c] = 0.25 * cy[c] * (1 + cx[c] * xs[q]);
                        aq += field[lnodes[c]] * nq[c];
                    }
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b)
                            ke[a][b] += aq * (dxi[a] * dxi[b] + deta[a] * deta[b]);
                    const double jac = dec.mesh_h * dec.mesh_h / 4.0;
                    for (int a = 0; a < 4; ++a) load[gnodes[a]] += dec.source * jac * nq[a];
                }
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        if (gnodes[a] >= gnodes[b]) matrix.at(gnodes[a], gnodes[b]) += ke[a][b];
            }
        }
    }

    // homogeneous Dirichlet on the whole outer boundary
    const std::size_t bw = gmesh.nx + 2;
    for (std::size_t j = 0; j < n; ++j) {
        if (!constrained[j]) continue;
        const std::size_t lo = j > bw ? j - bw : 0;
        const std::size_t hi = std::min(n - 1, j + bw);
        for (std::size_t i2 = lo; i2 <= hi; ++i2) {
            if (i2 == j) continue;
            if (i2 >= j) matrix.at(i2, j) = 0.0;
            else matrix.at(j, i2) = 0.0;
        }
        matrix.at(j, j) = 1.0;
        load[j] = 0.0;
    }
    matrix.factorize();
    Vec u = matrix.solve(load);
    for (std::size_t j = 0; j < n; ++j)
        if (constrained[j]) u[j] = 0.0;
    return {std::move(gmesh), std::move(u)};
}

Vec restrict_to_subdomain(const Decomposition& dec, const Mesh2D& gmesh, const Vec& gu,
                          const Mesh2D& lmesh, int i) {
    (void)i;
    const std::size_t ox =
        static_cast<std::size_t>(std::llround((lmesh.rect.x0 - gmesh.rect.x0) / dec.mesh_h));
    const std::size_t oy =
        static_cast<std::size_t>(std::llround((lmesh.rect.y0 - gmesh.rect.y0) / dec.mesh_h));
    Vec out(lmesh.n_nodes());
    for (std::size_t id = 0; id < lmesh.n_nodes(); ++id) {
        const std::size_t lix = id % (lmesh.nx + 1);
        const std::size_t liy = id / (lmesh.nx + 1);
        out[id] = gu[gmesh.node_id(lix + ox, liy + oy)];
    }
    return out;
}

}  // namespace ckr
