#ifndef CKR_RANDFIELD_HPP
#define CKR_RANDFIELD_HPP

#include "ckr/mesh.hpp"
#include "ckr/rng.hpp"

namespace ckr {

struct FieldConfig {
    double mean = 1.0;       // a_{i,0}, constant per subdomain
    double sigma = 0.5;      // standard deviation of the log-free field
    double corr_len = 1.0;   // L_c
    std::size_t n_modes = 1; // retained KL modes
};

// Truncated KL basis of the separable exponential covariance
//   C(x, x') = sigma^2 exp(-|x1-x1'|/Lc - |x2-x2'|/Lc)
// discretized on the mesh nodes (Nystrom with trapezoidal weights).
struct KLBasis {
    Vec eigenvalues;       // non-increasing, clamped at 0
    Matrix eigenfunctions; // [n_nodes x n_modes], orthonormal in the weighted inner product
    Vec weights;           // trapezoidal node weights of the discretization
};

// Top eigenpairs of the covariance on the mesh; n_modes may be n_nodes.
KLBasis kl_expand(const FieldConfig& cfg, const Mesh2D& mesh);

// Nodal field a(x, xi) = mean + sum_m sqrt(lambda_m) a_m(x) xi_m.
// Throws NumericError when any nodal value drops to the ellipticity floor.
Vec evaluate_field(const KLBasis& basis, const FieldConfig& cfg, const Vec& xi);

// Coordinates of the local system inputs: truncated normal with mean 0,
// standard deviation 0.5, support [-1, 1], sampled by rejection.
struct InputLaw {
    double stddev = 0.5;
    double lo = -1.0, hi = 1.0;

    double sample_one(Rng& rng) const;
    Vec sample(std::size_t dim, Rng& rng) const;
};

}  // namespace ckr

#endif
