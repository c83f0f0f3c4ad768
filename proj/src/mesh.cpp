#include "ckr/mesh.hpp"

#include <cmath>

#include "ckr/util.hpp"

namespace ckr {

Side opposite_side(Side s) {
    switch (s) {
        case Side::Left: return Side::Right;
        case Side::Right: return Side::Left;
        case Side::Bottom: return Side::Top;
        case Side::Top: return Side::Bottom;
    }
    return Side::Left;
}

Mesh2D::Mesh2D(const Rect& r, double mesh_h) : rect(r), h(mesh_h) {
    if (mesh_h <= 0) throw ConfigError("mesh: h must be positive");
    const double fx = r.width() / mesh_h;
    const double fy = r.height() / mesh_h;
    nx = static_cast<std::size_t>(std::llround(fx));
    ny = static_cast<std::size_t>(std::llround(fy));
    if (nx == 0 || ny == 0 || std::abs(fx - static_cast<double>(nx)) > 1e-9 ||
        std::abs(fy - static_cast<double>(ny)) > 1e-9)
        throw ConfigError("mesh: rectangle dimensions must be integer multiples of h");
}

std::array<std::size_t, 4> Mesh2D::element_nodes(std::size_t ex, std::size_t ey) const {
    return {node_id(ex, ey), node_id(ex + 1, ey), node_id(ex + 1, ey + 1), node_id(ex, ey + 1)};
}

std::vector<std::size_t> Mesh2D::side_nodes(Side side) const {
    std::vector<std::size_t> out;
    switch (side) {
        case Side::Left:
            for (std::size_t iy = 0; iy <= ny; ++iy) out.push_back(node_id(0, iy));
            break;
        case Side::Right:
            for (std::size_t iy = 0; iy <= ny; ++iy) out.push_back(node_id(nx, iy));
            break;
        case Side::Bottom:
            for (std::size_t ix = 0; ix <= nx; ++ix) out.push_back(node_id(ix, 0));
            break;
        case Side::Top:
            for (std::size_t ix = 0; ix <= nx; ++ix) out.push_back(node_id(ix, ny));
            break;
    }
    return out;
}

bool Mesh2D::on_side(std::size_t id, Side side) const {
    const std::size_t ix = id % (nx + 1);
    const std::size_t iy = id / (nx + 1);
    switch (side) {
        case Side::Left: return ix == 0;
        case Side::Right: return ix == nx;
        case Side::Bottom: return iy == 0;
        case Side::Top: return iy == ny;
    }
    return false;
}

}  // namespace ckr
