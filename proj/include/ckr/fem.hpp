#ifndef CKR_FEM_HPP
#define CKR_FEM_HPP

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "ckr/mesh.hpp"

namespace ckr {

using ScalarField = std::function<double(double, double)>;

// Symmetric positive definite banded matrix, lower band storage:
// band(i, d) = A(i, i-d) for d = 0..bw. Cholesky factorization in place.
class BandedSpd {
  public:
    BandedSpd(std::size_t n, std::size_t bandwidth);
    std::size_t size() const { return n_; }
    std::size_t bandwidth() const { return bw_; }
    double& at(std::size_t i, std::size_t j);      // requires i >= j, i-j <= bw
    double get(std::size_t i, std::size_t j) const;
    void factorize();                              // throws NumericError if not SPD
    Vec solve(const Vec& rhs) const;               // after factorize
    bool factorized() const { return factored_; }

  private:
    std::size_t n_, bw_;
    Matrix band_;
    bool factored_ = false;
};

enum class BcKind { DirichletConst, DirichletNodal, NeumannNodal };

// Boundary condition on one full side of the rectangle. Nodal vectors are
// ordered like Mesh2D::side_nodes. Neumann data is the flux a*du/dn of the
// *exporting* side's outward normal, so the importing subdomain applies it
// with the sign flipped.
struct SideBc {
    BcKind kind = BcKind::DirichletConst;
    double value = 0.0;   // DirichletConst
    Vec nodal;            // DirichletNodal / NeumannNodal
};

struct LocalProblem {
    const Mesh2D* mesh = nullptr;
    Vec field;            // nodal diffusion coefficient, strictly positive
    ScalarField source;   // f(x, y)
    std::map<Side, SideBc> bcs;  // every side must be present
};

// Assembles and factorizes the stiffness once per diffusion field; solves for
// any right-hand boundary/source data. Dirichlet values are imposed exactly
// (the solution vector carries them verbatim).
class LocalSolver {
  public:
    LocalSolver(const Mesh2D& mesh, const Vec& nodal_field,
                const std::vector<Side>& dirichlet_sides);

    // bcs must use Dirichlet kinds exactly on the sides declared at
    // construction and Neumann on the rest.
    Vec solve(const ScalarField& source, const std::map<Side, SideBc>& bcs) const;

    const Mesh2D& mesh() const { return mesh_; }
    const Vec& field() const { return field_; }

  private:
    const Mesh2D& mesh_;
    Vec field_;
    std::vector<bool> constrained_;
    std::vector<std::size_t> constrained_ids_;
    // original column entries of constrained dofs, for RHS elimination
    std::vector<std::vector<std::pair<std::size_t, double>>> columns_;
    BandedSpd matrix_;
};

// One-shot convenience: assemble, factorize, solve.
Vec solve_local(const LocalProblem& p);

// Line segment along a mesh line; axis 'x' means a vertical segment at
// x = fixed integrating over y in [lo, hi], axis 'y' the transpose.
struct Segment {
    char axis = 'x';
    double fixed = 0;
    double lo = 0, hi = 1;
};

// Composite trapezoidal integral of the nodal solution along the segment.
double evaluate_output(const Vec& u, const Mesh2D& mesh, const Segment& seg);

// Dirichlet trace along a side, ordered like side_nodes.
Vec extract_trace(const Vec& u, const Mesh2D& mesh, Side side);

// Normal flux a * du/dn on `side` (outward normal of this mesh), recovered
// variationally: the residual (K u - F) restricted to the side nodes equals
// the boundary functional int a du/dn phi_i ds, which divided by the
// trapezoidal edge weight gives a pointwise-equivalent flux. Re-imposing
// these values with trapezoidal edge quadrature reproduces the functional
// exactly, so a converged Dirichlet-Neumann fixed point coincides with the
// monolithic Galerkin solution.
Vec extract_flux(const Vec& u, const Vec& field, const Mesh2D& mesh, Side side,
                 const ScalarField& source);

}  // namespace ckr

#endif
