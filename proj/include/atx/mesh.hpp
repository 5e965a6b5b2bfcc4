#pragma once
#include <cstdint>
#include <vector>

#include "atx/geometry.hpp"
#include "atx/types.hpp"

namespace atx {

struct Tri {
  int a, b, c;
};

// Regions are nested: 0 = inner disk, 1 = middle annulus, 2 = outer annulus.
enum Region : int8_t { kInner = 0, kMid = 1, kOuter = 2 };

// Ring-structured conforming triangulation of the outer disk. Rings of nodes
// sit on concentric circles; the three domain circles are rings, so their
// nodes lie on the circles exactly.
class DiskMesh {
 public:
  static DiskMesh build(const DiskDomain& dom, double h);

  DiskDomain domain;
  double target_h = 0;
  std::vector<Vec2> xy;
  std::vector<Tri> tris;                 // CCW
  std::vector<int8_t> node_region;       // smallest region the node belongs to
  std::vector<int8_t> tri_region;        // smallest region containing the triangle
  std::vector<int> circle_inner, circle_mid, circle_outer;  // ordered loops
  std::vector<std::vector<int>> nbrs;    // 1-ring node adjacency, sorted

  int n_nodes() const { return (int)xy.size(); }
  int n_tris() const { return (int)tris.size(); }

  double tri_area(int t) const {
    const Tri& T = tris[t];
    return 0.5 * cross(xy[T.b] - xy[T.a], xy[T.c] - xy[T.a]);
  }
  double min_angle_deg() const;

  struct Loc {
    int tri = -1;
    double b[3] = {0, 0, 0};
  };
  // Point location with barycentric clamping against the polygonal boundary
  // gap; returns false only when p is genuinely outside the mesh.
  bool locate(Vec2 p, Loc& out) const;

  // Nodes of `t` and P1 gradients of its barycentric basis.
  void p1_gradients(int t, Vec2 grad[3]) const;

 private:
  // background grid for locate()
  double cell_ = 0, x0_ = 0, y0_ = 0;
  int ncx_ = 0, ncy_ = 0;
  std::vector<std::vector<int>> cells_;
  void build_locator();
  void build_adjacency();
};

// Weights turning stencil differences into nodal gradients: weighted least
// squares fit of u(x) - u(x_i) by a quadratic form over the 2-ring. The
// gradient is exact for quadratic fields, which keeps the consistency error
// second order at the ring-suture nodes of the structured mesh.
struct GradientOp {
  struct Entry {
    int j;
    double wx, wy;
  };
  std::vector<std::vector<Entry>> rows;  // per node, excluding the node itself
  static GradientOp build(const DiskMesh& mesh);
};

}  // namespace atx
