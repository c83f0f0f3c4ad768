#ifndef CKR_PWL_HPP
#define CKR_PWL_HPP

#include <cmath>
#include <cstddef>

#include "ckr/tensor.hpp"

// Elementwise monotone bijection y = logit(F(sigmoid(x))) where F is a
// piecewise-linear CDF on [0,1] with equal-width bins and positive slopes.
// Slopes are exp(theta) normalized to average 1 per dimension. Tail bins are
// evaluated in log space so the map and its inverse stay finite for any x.
// Forward evaluation and its cached quantities live in the graph op; this
// header holds the slope tables and the scalar inverse so both sides of the
// round trip use identical arithmetic.

namespace ckr {

inline double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

struct PwlTables {
    std::size_t dims = 0, bins = 0;
    Matrix hbar;     // [d x nb] slopes
    Matrix loghbar;  // [d x nb]
    Matrix cum;      // [d x (nb+1)] forward cumulative masses, cum[0]=0
    Matrix comp;     // [d x nb] comp(k) = sum_{l>k} hbar_l / nb
};

inline PwlTables pwl_tables(const ParameterTensor& theta) {
    PwlTables t;
    t.dims = theta.shape[0];
    t.bins = theta.shape[1];
    const std::size_t d = t.dims, nb = t.bins;
    t.hbar.resize(d, nb);
    t.loghbar.resize(d, nb);
    t.cum.resize(d, nb + 1);
    t.comp.resize(d, nb);
    const double inv_nb = 1.0 / static_cast<double>(nb);
    for (std::size_t j = 0; j < d; ++j) {
        const double* th = theta.values.data() + j * nb;
        double mx = th[0];
        for (std::size_t k = 1; k < nb; ++k) mx = std::max(mx, th[k]);
        double z = 0.0;
        for (std::size_t k = 0; k < nb; ++k) z += std::exp(th[k] - mx);
        const double logz = mx + std::log(z) - std::log(static_cast<double>(nb));
        for (std::size_t k = 0; k < nb; ++k) {
            t.loghbar(j, k) = th[k] - logz;
            t.hbar(j, k) = std::exp(t.loghbar(j, k));
        }
        t.cum(j, 0) = 0.0;
        for (std::size_t k = 0; k < nb; ++k) t.cum(j, k + 1) = t.cum(j, k) + t.hbar(j, k) * inv_nb;
        double run = 0.0;
        for (std::size_t k = nb; k-- > 0;) {
            t.comp(j, k) = run;
            run += t.hbar(j, k) * inv_nb;
        }
    }
    return t;
}

struct PwlPoint {
    double u, v, onemv, lu, logv, log1mv, y, ld;
    std::size_t bin;
};

inline PwlPoint pwl_forward_point(const PwlTables& t, std::size_t j, double x) {
    const std::size_t nb = t.bins;
    const double inv_nb = 1.0 / static_cast<double>(nb);
    PwlPoint p;
    p.lu = log_sigmoid(x);
    const double l1u = p.lu - x;
    p.u = std::exp(p.lu);
    std::size_t k = static_cast<std::size_t>(p.u * static_cast<double>(nb));
    if (k >= nb) k = nb - 1;
    p.bin = k;
    const double hb = t.hbar(j, k);
    const double lhb = t.loghbar(j, k);
    p.v = t.cum(j, k) + hb * (p.u - static_cast<double>(k) * inv_nb);
    p.onemv = t.comp(j, k) + hb * (static_cast<double>(k + 1) * inv_nb - p.u);
    p.logv = (k == 0) ? lhb + p.lu : std::log(p.v);
    p.log1mv = (k == nb - 1) ? lhb + l1u : std::log(p.onemv);
    p.y = p.logv - p.log1mv;
    p.ld = p.lu + l1u + lhb - p.logv - p.log1mv;
    return p;
}

inline double pwl_inverse_point(const PwlTables& t, std::size_t j, double y) {
    const std::size_t nb = t.bins;
    const double inv_nb = 1.0 / static_cast<double>(nb);
    const double lv = log_sigmoid(y);
    const double l1v = lv - y;
    const double v = std::exp(lv);
    std::size_t k = 0;
    while (k + 1 < nb && t.cum(j, k + 1) <= v) ++k;
    if (k == 0) {
        const double lu = lv - t.loghbar(j, 0);
        const double u = std::exp(lu);
        return lu - std::log1p(-u);
    }
    if (k == nb - 1) {
        const double l1u = l1v - t.loghbar(j, nb - 1);
        return std::log1p(-std::exp(l1u)) - l1u;
    }
    const double u = static_cast<double>(k) * inv_nb + (v - t.cum(j, k)) / t.hbar(j, k);
    return std::log(u) - std::log1p(-u);
}

}  // namespace ckr

#endif
