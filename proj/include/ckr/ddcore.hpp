#ifndef CKR_DDCORE_HPP
#define CKR_DDCORE_HPP

#include <map>
#include <memory>
#include <vector>

#include "ckr/fem.hpp"
#include "ckr/randfield.hpp"

namespace ckr {

enum class CouplingKind { Dirichlet, Neumann };

// Directed interface: data produced by subdomain `from` and consumed by
// subdomain `to`. `kind` names the boundary condition imposed on `to`'s side
// (Dirichlet trace or Neumann flux), theta the relaxation factor of the
// update, pod_modes the retained basis size.
struct InterfaceSpec {
    int from = 0, to = 0;
    CouplingKind kind = CouplingKind::Dirichlet;
    double theta = 1.0;
    std::size_t pod_modes = 2;
};

struct SubdomainSpec {
    Rect rect;
    FieldConfig field;
    std::vector<Side> exterior_dirichlet;  // derived by validate()
};

using InterfaceKey = std::pair<int, int>;  // (from, to)

struct Decomposition {
    double mesh_h = 1.0 / 16;
    double source = 100.0;
    std::vector<SubdomainSpec> subdomains;
    std::vector<InterfaceSpec> interfaces;

    // Geometric derivation + invariant checks: interfaces are symmetric,
    // neighbors share a full edge on the common grid, every subdomain keeps
    // at least one exterior Dirichlet side. Fills exterior_dirichlet and the
    // side maps below.
    void validate();

    int n_subdomains() const { return static_cast<int>(subdomains.size()); }
    const InterfaceSpec& interface(int from, int to) const;
    // neighbors of i in ascending order
    std::vector<int> neighbors(int i) const;
    // side of subdomain `of` facing subdomain `other`
    Side facing_side(int of, int other) const;
    // number of interface nodes (shared edge) of interface (from, to)
    std::size_t interface_dofs(int from, int to, double h) const;

  private:
    std::map<InterfaceKey, Side> facing_;
};

// ---------------------------------------------------------------------------
// POD reduction of interface data

struct PODBasis {
    Vec mean;           // snapshot mean, length = interface dofs
    Matrix modes;       // [dofs x retained], orthonormal columns
    Vec singular;       // all singular values of the centered snapshots

    std::size_t n_modes() const { return modes.cols; }
    Vec project(const Vec& nodal) const;       // coefficients of (nodal - mean)
    Vec reconstruct(const Vec& coeffs) const;  // mean + modes * coeffs
};

// Mean-centered SVD of snapshots [n_snapshots x dofs]; retained must not
// exceed the numerical rank.
PODBasis build_pod(const Matrix& snapshots, std::size_t retained);

// ---------------------------------------------------------------------------
// parallel Dirichlet-Neumann iteration

// Per-sample coupling evaluator: given subdomain i and its concatenated
// interface inputs tau_i (tau_{j,i} for ascending j), return the exported
// data h_{i,j} for every neighbor j. Representation (nodal or POD
// coefficients) is fixed by the session.
struct CouplingSession {
    virtual ~CouplingSession() = default;
    virtual std::map<int, Vec> couple(int i, const Vec& tau_i) = 0;
};

struct IterationResult {
    std::map<InterfaceKey, Vec> tau;  // converged interface parameters
    std::vector<double> indicator;    // eps_k history, k = 1..steps
    // per-interface infinity-norm change per step, same length as indicator
    std::map<InterfaceKey, std::vector<double>> indicator_by_interface;
    // per-step states tau^k, k = 1..steps; filled only on request
    std::vector<std::map<InterfaceKey, Vec>> trace;
    std::size_t steps = 0;
    bool converged = false;
};

// Relaxation update; theta = 0 is treated as direct replacement (the literal
// formula would freeze the interface forever).
Vec dn_update(const Vec& tau, const Vec& h, double theta);

// Concatenate subdomain i's interface inputs from the state map.
Vec concat_inputs(const Decomposition& dec, int i, const std::map<InterfaceKey, Vec>& tau);

IterationResult dd_iterate(const Decomposition& dec, CouplingSession& session,
                           const std::map<InterfaceKey, Vec>& tau0, double tol,
                           std::size_t max_steps, bool record_trace = false);

// ---------------------------------------------------------------------------
// per-subdomain solve plumbing shared by the exact session and the offline
// Monte Carlo loop

// sides of subdomain i constrained by Dirichlet data (exterior plus
// Dirichlet-kind interfaces)
std::vector<Side> dirichlet_sides(const Decomposition& dec, int i);

// boundary conditions of subdomain i for interface inputs tau_i (POD
// coefficients when `pod` is given, nodal data otherwise)
std::map<Side, SideBc> interface_boundary_conditions(const Decomposition& dec, int i,
                                                     const Vec& tau_i,
                                                     const std::map<InterfaceKey, PODBasis>* pod);

// exported coupling data h_{i,j} of a local solution
std::map<int, Vec> extract_couplings(const Decomposition& dec, int i, const Vec& u,
                                     const Vec& field, const Mesh2D& mesh,
                                     const std::map<InterfaceKey, PODBasis>* pod);

// ---------------------------------------------------------------------------
// exact PDE coupling

// Per-sample session that actually solves the local problems. In nodal mode
// tau vectors are raw interface data; in POD mode they are coefficients in
// the bases supplied.
class PdeCouplingSession : public CouplingSession {
  public:
    PdeCouplingSession(const Decomposition& dec, const std::vector<Mesh2D>& meshes,
                       const std::vector<KLBasis>& kl, const std::vector<Vec>& xi,
                       const std::map<InterfaceKey, PODBasis>* pod);  // null = nodal mode

    std::map<int, Vec> couple(int i, const Vec& tau_i) override;

    // full local solve for the current inputs (outputs, diagnostics)
    Vec solve_subdomain(int i, const Vec& tau_i) const;
    const Mesh2D& mesh(int i) const { return meshes_[i]; }

  private:
    std::map<Side, SideBc> boundary_conditions(int i, const Vec& tau_i) const;

    const Decomposition& dec_;
    const std::vector<Mesh2D>& meshes_;
    const std::map<InterfaceKey, PODBasis>* pod_;
    std::vector<Vec> fields_;
    std::vector<std::unique_ptr<LocalSolver>> solvers_;
};

// Monolithic solve of the global problem on the union rectangle, using each
// subdomain's nodal field over its own elements. Returns the global mesh and
// nodal solution.
std::pair<Mesh2D, Vec> solve_global(const Decomposition& dec, const std::vector<Mesh2D>& meshes,
                                    const std::vector<KLBasis>& kl, const std::vector<Vec>& xi);

// Restriction of a global nodal vector to subdomain i's mesh.
Vec restrict_to_subdomain(const Decomposition& dec, const Mesh2D& global_mesh,
                          const Vec& global_u, const Mesh2D& local_mesh, int i);

}  // namespace ckr

#endif
