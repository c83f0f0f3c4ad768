#include "ckr/fem.hpp"

#include <cmath>
#include <cstring>

#include "ckr/util.hpp"

namespace ckr {

// ---------------------------------------------------------------------------
// banded Cholesky

BandedSpd::BandedSpd(std::size_t n, std::size_t bandwidth) : n_(n), bw_(bandwidth) {
    band_.resize(n, bandwidth + 1);
}

double& BandedSpd::at(std::size_t i, std::size_t j) {
    return band_(i, i - j);
}

double BandedSpd::get(std::size_t i, std::size_t j) const {
    if (j > i) std::swap(i, j);
    if (i - j > bw_) return 0.0;
    return band_(i, i - j);
}

void BandedSpd::factorize() {
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j0 = i > bw_ ? i - bw_ : 0;
        for (std::size_t j = j0; j <= i; ++j) {
            double sum = band_(i, i - j);
            const std::size_t k0 = std::max(j0, j > bw_ ? j - bw_ : 0);
            for (std::size_t k = k0; k < j; ++k) sum -= band_(i, i - k) * band_(j, j - k);
            if (j < i) {
                band_(i, i - j) = sum / band_(j, 0);
            } else {
                if (sum <= 0.0)
                    throw NumericError("banded cholesky: matrix is not positive definite at row " +
                                       std::to_string(i));
                band_(i, 0) = std::sqrt(sum);
            }
        }
    }
    factored_ = true;
}

Vec BandedSpd::solve(const Vec& rhs) const {
    if (!factored_) throw UsageError("banded solve called before factorize");
    if (rhs.size() != n_) throw UsageError("banded solve: rhs size mismatch");
    Vec y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        double sum = rhs[i];
        const std::size_t k0 = i > bw_ ? i - bw_ : 0;
        for (std::size_t k = k0; k < i; ++k) sum -= band_(i, i - k) * y[k];
        y[i] = sum / band_(i, 0);
    }
    Vec x(n_);
    for (std::size_t ii = n_; ii-- > 0;) {
        double sum = y[ii];
        const std::size_t kmax = std::min(n_ - 1, ii + bw_);
        for (std::size_t k = ii + 1; k <= kmax; ++k) sum -= band_(k, k - ii) * x[k];
        x[ii] = sum / band_(ii, 0);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Q1 element machinery: 2x2 Gauss quadrature on the reference square

namespace {

struct QuadPoint {
    double xi, eta;
    double n[4];     // shape values
    double dxi[4];   // d/dxi
    double deta[4];  // d/deta
};

const std::array<QuadPoint, 4>& quad_points() {
    static const std::array<QuadPoint, 4> pts = [] {
        std::array<QuadPoint, 4> out{};
        const double g = 1.0 / std::sqrt(3.0);
        const double xs[4] = {-g, g, g, -g};
        const double ys[4] = {-g, -g, g, g};
        const double cx[4] = {-1, 1, 1, -1};
        const double cy[4] = {-1, -1, 1, 1};
        for (int q = 0; q < 4; ++q) {
            out[q].xi = xs[q];
            out[q].eta = ys[q];
            for (int i = 0; i < 4; ++i) {
                out[q].n[i] = 0.25 * (1 + cx[i] * xs[q]) * (1 + cy[i] * ys[q]);
                out[q].dxi[i] = 0.25 * cx[i] * (1 + cy[i] * ys[q]);
                out[q].deta[i] = 0.25 * cy[i] * (1 + cx[i] * xs[q]);
            }
        }
        return out;
    }();
    return pts;
}

// Stiffness contribution with the coefficient interpolated bilinearly from
// nodal values; the h/2 Jacobian factors cancel against the gradient scaling.
void element_stiffness(const double a_nodal[4], double ke[4][4]) {
    std::memset(ke, 0, 16 * sizeof(double));
    for (const auto& q : quad_points()) {
        double aq = 0.0;
        for (int i = 0; i < 4; ++i) aq += a_nodal[i] * q.n[i];
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                ke[i][j] += aq * (q.dxi[i] * q.dxi[j] + q.deta[i] * q.deta[j]);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// LocalSolver

LocalSolver::LocalSolver(const Mesh2D& mesh, const Vec& nodal_field,
                         const std::vector<Side>& dirichlet_sides)
    : mesh_(mesh), field_(nodal_field), matrix_(mesh.n_nodes(), mesh.nx + 2) {
    if (field_.size() != mesh.n_nodes())
        throw ConfigError("local solver: field size does not match mesh");
    for (double a : field_)
        if (!(a > 1e-6))
            throw NumericError("local solver: diffusion field violates the ellipticity floor 1e-6");
    if (dirichlet_sides.empty())
        throw NumericError("local solver: pure-Neumann subdomain gives a singular system");

    constrained_.assign(mesh.n_nodes(), false);
    for (Side s : dirichlet_sides)
        for (std::size_t id : mesh.side_nodes(s)) constrained_[id] = true;
    for (std::size_t id = 0; id < mesh.n_nodes(); ++id)
        if (constrained_[id]) constrained_ids_.push_back(id);

    // assemble the full stiffness
    for (std::size_t ey = 0; ey < mesh.ny; ++ey) {
        for (std::size_t ex = 0; ex < mesh.nx; ++ex) {
            const auto nodes = mesh.element_nodes(ex, ey);
            double a_local[4], ke[4][4];
            for (int i = 0; i < 4; ++i) a_local[i] = field_[nodes[i]];
            element_stiffness(a_local, ke);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    if (nodes[i] >= nodes[j]) matrix_.at(nodes[i], nodes[j]) += ke[i][j];
        }
    }

    // record columns of constrained dofs for RHS elimination, then blank them
    columns_.resize(constrained_ids_.size());
    const std::size_t bw = matrix_.bandwidth();
    for (std::size_t ci = 0; ci < constrained_ids_.size(); ++ci) {
        const std::size_t j = constrained_ids_[ci];
        const std::size_t lo = j > bw ? j - bw : 0;
        const std::size_t hi = std::min(mesh.n_nodes() - 1, j + bw);
        for (std::size_t i = lo; i <= hi; ++i) {
            if (constrained_[i] || i == j) continue;
            const double v = matrix_.get(i, j);
            if (v != 0.0) columns_[ci].emplace_back(i, v);
        }
    }
    for (std::size_t ci = 0; ci < constrained_ids_.size(); ++ci) {
        const std::size_t j = constrained_ids_[ci];
        const std::size_t lo = j > bw ? j - bw : 0;
        const std::size_t hi = std::min(mesh.n_nodes() - 1, j + bw);
        for (std::size_t i = lo; i <= hi; ++i) {
            if (i == j) continue;
            if (i >= j) matrix_.at(i, j) = 0.0;
            else matrix_.at(j, i) = 0.0;
        }
        matrix_.at(j, j) = 1.0;
    }
    matrix_.factorize();
}

Vec LocalSolver::solve(const ScalarField& source, const std::map<Side, SideBc>& bcs) const {
    const Mesh2D& mesh = mesh_;
    Vec load(mesh.n_nodes(), 0.0);

    // volume source with the same 2x2 quadrature
    const double jac = mesh.h * mesh.h / 4.0;
    for (std::size_t ey = 0; ey < mesh.ny; ++ey) {
        for (std::size_t ex = 0; ex < mesh.nx; ++ex) {
            const auto nodes = mesh.element_nodes(ex, ey);
            const double x0 = mesh.rect.x0 + static_cast<double>(ex) * mesh.h;
            const double y0 = mesh.rect.y0 + static_cast<double>(ey) * mesh.h;
            for (const auto& q : quad_points()) {
                const double xq = x0 + (q.xi + 1.0) * 0.5 * mesh.h;
                const double yq = y0 + (q.eta + 1.0) * 0.5 * mesh.h;
                const double fq = source(xq, yq) * jac;
                for (int i = 0; i < 4; ++i) load[nodes[i]] += fq * q.n[i];
            }
        }
    }

    // Neumann sides: trapezoidal edge quadrature; imported flux changes sign
    for (const auto& [side, bc] : bcs) {
        if (bc.kind != BcKind::NeumannNodal) continue;
        const auto ids = mesh.side_nodes(side);
        if (bc.nodal.size() != ids.size())
            throw ConfigError("local solver: Neumann data length mismatch");
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const double w = (k == 0 || k + 1 == ids.size()) ? 0.5 * mesh.h : mesh.h;
            load[ids[k]] += -bc.nodal[k] * w;
        }
    }

    // Dirichlet values: nodal interface data first, exterior constants after
    // (corners shared with an exterior side keep the exterior value)
    Vec dval(mesh.n_nodes(), 0.0);
    std::vector<bool> dset(mesh.n_nodes(), false);
    for (const auto& [side, bc] : bcs) {
        if (bc.kind != BcKind::DirichletNodal) continue;
        const auto ids = mesh.side_nodes(side);
        if (bc.nodal.size() != ids.size())
            throw ConfigError("local solver: Dirichlet data length mismatch");
        for (std::size_t k = 0; k < ids.size(); ++k) {
            dval[ids[k]] = bc.nodal[k];
            dset[ids[k]] = true;
        }
    }
    for (const auto& [side, bc] : bcs) {
        if (bc.kind != BcKind::DirichletConst) continue;
        for (std::size_t id : mesh.side_nodes(side)) {
            dval[id] = bc.value;
            dset[id] = true;
        }
    }
    for (std::size_t id : constrained_ids_)
        if (!dset[id])
            throw ConfigError("local solver: missing Dirichlet data for a constrained side");

    // rhs elimination and imposed values
    for (std::size_t ci = 0; ci < constrained_ids_.size(); ++ci) {
        const std::size_t j = constrained_ids_[ci];
        const double gj = dval[j];
        if (gj != 0.0)
            for (const auto& [i, a_ij] : columns_[ci]) load[i] -= a_ij * gj;
    }
    for (std::size_t id : constrained_ids_) load[id] = dval[id];

    Vec u = matrix_.solve(load);
    for (std::size_t id : constrained_ids_) u[id] = dval[id];  // imposed bitwise
    return u;
}

Vec solve_local(const LocalProblem& p) {
    if (p.mesh == nullptr) throw ConfigError("solve_local: missing mesh");
    std::vector<Side> dsides;
    for (const auto& [side, bc] : p.bcs)
        if (bc.kind != BcKind::NeumannNodal) dsides.push_back(side);
    LocalSolver solver(*p.mesh, p.field, dsides);
    return solver.solve(p.source, p.bcs);
}

// ---------------------------------------------------------------------------
// outputs and coupling extraction

namespace {

std::size_t grid_index(double value, double origin, double h, const char* what) {
    const double f = (value - origin) / h;
    const auto idx = static_cast<long long>(std::llround(f));
    if (idx < 0 || std::abs(f - static_cast<double>(idx)) > 1e-9)
        throw ConfigError(std::string("segment ") + what + " does not lie on a mesh line");
    return static_cast<std::size_t>(idx);
}

}  // namespace

double evaluate_output(const Vec& u, const Mesh2D& mesh, const Segment& seg) {
    if (u.size() != mesh.n_nodes()) throw ConfigError("evaluate_output: solution size mismatch");
    std::vector<double> values;
    if (seg.axis == 'x') {
        const std::size_t ix = grid_index(seg.fixed, mesh.rect.x0, mesh.h, "x");
        const std::size_t j0 = grid_index(seg.lo, mesh.rect.y0, mesh.h, "lo");
        const std::size_t j1 = grid_index(seg.hi, mesh.rect.y0, mesh.h, "hi");
        if (ix > mesh.nx || j1 > mesh.ny || j0 >= j1)
            throw ConfigError("evaluate_output: segment outside the mesh");
        for (std::size_t j = j0; j <= j1; ++j) values.push_back(u[mesh.node_id(ix, j)]);
    } else if (seg.axis == 'y') {
        const std::size_t iy = grid_index(seg.fixed, mesh.rect.y0, mesh.h, "y");
        const std::size_t i0 = grid_index(seg.lo, mesh.rect.x0, mesh.h, "lo");
        const std::size_t i1 = grid_index(seg.hi, mesh.rect.x0, mesh.h, "hi");
        if (iy > mesh.ny || i1 > mesh.nx || i0 >= i1)
            throw ConfigError("evaluate_output: segment outside the mesh");
        for (std::size_t i = i0; i <= i1; ++i) values.push_back(u[mesh.node_id(i, iy)]);
    } else {
        throw ConfigError("evaluate_output: segment axis must be 'x' or 'y'");
    }
    double integral = 0.5 * (values.front() + values.back());
    for (std::size_t k = 1; k + 1 < values.size(); ++k) integral += values[k];
    return integral * mesh.h;
}

Vec extract_trace(const Vec& u, const Mesh2D& mesh, Side side) {
    const auto ids = mesh.side_nodes(side);
    Vec out(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) out[k] = u[ids[k]];
    return out;
}

Vec extract_flux(const Vec& u, const Vec& field, const Mesh2D& mesh, Side side,
                 const ScalarField& source) {
    const auto ids = mesh.side_nodes(side);
    Vec residual(mesh.n_nodes(), 0.0);

    // elements of the first layer along the side
    std::size_t ex0 = 0, ex1 = mesh.nx, ey0 = 0, ey1 = mesh.ny;
    switch (side) {
        case Side::Left: ex1 = 1; break;
        case Side::Right: ex0 = mesh.nx - 1; break;
        case Side::Bottom: ey1 = 1; break;
        case Side::Top: ey0 = mesh.ny - 1; break;
    }
    const double jac = mesh.h * mesh.h / 4.0;
    for (std::size_t ey = ey0; ey < ey1; ++ey) {
        for (std::size_t ex = ex0; ex < ex1; ++ex) {
            const auto nodes = mesh.element_nodes(ex, ey);
            double a_local[4], ke[4][4];
            for (int i = 0; i < 4; ++i) a_local[i] = field[nodes[i]];
            element_stiffness(a_local, ke);
            const double x0 = mesh.rect.x0 + static_cast<double>(ex) * mesh.h;
            const double y0 = mesh.rect.y0 + static_cast<double>(ey) * mesh.h;
            for (int i = 0; i < 4; ++i) {
                double r = 0.0;
                for (int j = 0; j < 4; ++j) r += ke[i][j] * u[nodes[j]];
                residual[nodes[i]] += r;
            }
            for (const auto& q : quad_points()) {
                const double xq = x0 + (q.xi + 1.0) * 0.5 * mesh.h;
                const double yq = y0 + (q.eta + 1.0) * 0.5 * mesh.h;
                const double fq = source(xq, yq) * jac;
                for (int i = 0; i < 4; ++i) residual[nodes[i]] -= fq * q.n[i];
            }
        }
    }

    Vec out(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const double w = (k == 0 || k + 1 == ids.size()) ? 0.5 * mesh.h : mesh.h;
        out[k] = residual[ids[k]] / w;
    }
    return out;
}

}  // namespace ckr
