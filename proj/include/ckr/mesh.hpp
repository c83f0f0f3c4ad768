#ifndef CKR_MESH_HPP
#define CKR_MESH_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "ckr/tensor.hpp"

namespace ckr {

struct Rect {
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

enum class Side { Left, Right, Bottom, Top };

Side opposite_side(Side s);

// Uniform square-cell mesh on a rectangle with bilinear (Q1) elements.
// Nodes are numbered lexicographically, x fastest.
struct Mesh2D {
    Rect rect;
    double h = 0;
    std::size_t nx = 0, ny = 0;  // cells per direction

    Mesh2D() = default;
    Mesh2D(const Rect& r, double mesh_h);

    std::size_t n_nodes() const { return (nx + 1) * (ny + 1); }
    std::size_t n_elements() const { return nx * ny; }
    std::size_t node_id(std::size_t ix, std::size_t iy) const { return iy * (nx + 1) + ix; }
    double node_x(std::size_t id) const { return rect.x0 + static_cast<double>(id % (nx + 1)) * h; }
    double node_y(std::size_t id) const { return rect.y0 + static_cast<double>(id / (nx + 1)) * h; }
    // element (ex, ey) corner nodes, counterclockwise from lower-left
    std::array<std::size_t, 4> element_nodes(std::size_t ex, std::size_t ey) const;

    // Nodes along one side, ordered by the running coordinate; includes corners.
    std::vector<std::size_t> side_nodes(Side side) const;
    bool on_side(std::size_t id, Side side) const;
};

}  // namespace ckr

#endif
