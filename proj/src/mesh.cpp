#include "atx/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace atx {

namespace {

struct Ring {
  double r;
  int first;  // index of first node
  int count;
  double offset;
};

// Triangulate the band between two rings with a monotone angular zipper.
void zip(std::vector<Tri>& tris, const Ring& in, const Ring& out) {
  auto ang = [](const Ring& rg, int i) {
    return rg.offset + 2.0 * M_PI * i / rg.count;
  };
  int i = 0, j = 0;
  // align start: choose j so out node j is nearest in angle to in node 0
  double a0 = ang(in, 0);
  double best = 1e300;
  int j0 = 0;
  for (int k = 0; k < out.count; ++k) {
    double d = std::remainder(ang(out, k) - a0, 2.0 * M_PI);
    if (std::abs(d) < best) {
      best = std::abs(d);
      j0 = k;
    }
  }
  auto inode = [&](int k) { return in.first + ((k % in.count) + in.count) % in.count; };
  auto onode = [&](int k) { return out.first + (((k + j0) % out.count) + out.count) % out.count; };
  double base = ang(out, j0);
  auto ia = [&](int k) { return std::remainder(ang(in, k % in.count) - base, 2.0 * M_PI) + 2.0 * M_PI * (k / in.count); };
  auto oa = [&](int k) { return std::remainder(ang(out, (k + j0) % out.count) - base, 2.0 * M_PI) + 2.0 * M_PI * ((k + j0) / out.count); };
  // unwrap monotonically
  double prev_i = ia(0), prev_o = 0;
  std::vector<double> ua(in.count + 1), ub(out.count + 1);
  ua[0] = prev_i;
  for (int k = 1; k <= in.count; ++k) {
    double a = ia(k);
    while (a < ua[k - 1] - 1e-12) a += 2.0 * M_PI;
    ua[k] = a;
  }
  ub[0] = prev_o;
  for (int k = 1; k <= out.count; ++k) {
    double a = std::remainder(ang(out, (k + j0) % out.count) - base, 2.0 * M_PI);
    while (a < ub[k - 1] - 1e-12) a += 2.0 * M_PI;
    ub[k] = a;
  }
  while (i < in.count || j < out.count) {
    bool adv_in;
    if (i >= in.count)
      adv_in = false;
    else if (j >= out.count)
      adv_in = true;
    else
      adv_in = ua[i + 1] <= ub[j + 1];
    if (adv_in) {
      tris.push_back({inode(i), onode(j), inode(i + 1)});
      ++i;
    } else {
      tris.push_back({inode(i), onode(j), onode(j + 1)});
      ++j;
    }
  }
}

}  // namespace

DiskMesh DiskMesh::build(const DiskDomain& dom, double h) {
  dom.validate();
  if (!(h > 0 && h < dom.r_inner)) throw ConfigError("mesh spacing h out of range");
  DiskMesh m;
  m.domain = dom;
  m.target_h = h;

  int n1 = std::max(3, (int)std::lround(dom.r_inner / h));
  int n2 = std::max(2, (int)std::lround((dom.r_mid - dom.r_inner) / h));
  int n3 = std::max(2, (int)std::lround((dom.r_outer - dom.r_mid) / h));
  double dr1 = dom.r_inner / n1;

  std::vector<double> radii;
  std::vector<int8_t> reg;
  for (int k = 1; k <= n1; ++k) {
    radii.push_back(k == n1 ? dom.r_inner : k * dr1);
    reg.push_back(kInner);
  }
  for (int k = 1; k <= n2; ++k) {
    radii.push_back(k == n2 ? dom.r_mid : dom.r_inner + k * (dom.r_mid - dom.r_inner) / n2);
    reg.push_back(kMid);
  }
  for (int k = 1; k <= n3; ++k) {
    radii.push_back(k == n3 ? dom.r_outer : dom.r_mid + k * (dom.r_outer - dom.r_mid) / n3);
    reg.push_back(kOuter);
  }

  // center node
  m.xy.push_back({0, 0});
  m.node_region.push_back(kInner);

  std::vector<Ring> rings;
  for (size_t k = 0; k < radii.size(); ++k) {
    Ring rg;
    rg.r = radii[k];
    rg.count = 6 * std::max(1, (int)std::lround(radii[k] / dr1));
    rg.offset = (k % 2) ? M_PI / rg.count : 0.0;
    rg.first = (int)m.xy.size();
    for (int i = 0; i < rg.count; ++i) {
      double th = rg.offset + 2.0 * M_PI * i / rg.count;
      m.xy.push_back({rg.r * std::cos(th), rg.r * std::sin(th)});
      m.node_region.push_back(reg[k]);
    }
    rings.push_back(rg);
    if (radii[k] == dom.r_inner || radii[k] == dom.r_mid || radii[k] == dom.r_outer) {
      auto& loop = radii[k] == dom.r_inner ? m.circle_inner
                   : radii[k] == dom.r_mid ? m.circle_mid
                                           : m.circle_outer;
      for (int i = 0; i < rg.count; ++i) loop.push_back(rg.first + i);
    }
  }

  // center fan
  for (int i = 0; i < rings[0].count; ++i)
    m.tris.push_back({0, rings[0].first + i, rings[0].first + (i + 1) % rings[0].count});
  for (size_t k = 0; k + 1 < rings.size(); ++k) zip(m.tris, rings[k], rings[k + 1]);

  // enforce CCW orientation
  for (auto& t : m.tris) {
    if (cross(m.xy[t.b] - m.xy[t.a], m.xy[t.c] - m.xy[t.a]) < 0) std::swap(t.b, t.c);
  }

  m.tri_region.resize(m.tris.size());
  for (size_t t = 0; t < m.tris.size(); ++t) {
    const Tri& T = m.tris[t];
    m.tri_region[t] =
        std::max({m.node_region[T.a], m.node_region[T.b], m.node_region[T.c]});
  }

  m.build_adjacency();
  m.build_locator();
  return m;
}

void DiskMesh::build_adjacency() {
  nbrs.assign(xy.size(), {});
  auto add = [&](int a, int b) {
    auto& v = nbrs[a];
    if (std::find(v.begin(), v.end(), b) == v.end()) v.push_back(b);
  };
  for (const auto& t : tris) {
    add(t.a, t.b);
    add(t.b, t.a);
    add(t.b, t.c);
    add(t.c, t.b);
    add(t.a, t.c);
    add(t.c, t.a);
  }
  for (auto& v : nbrs) std::sort(v.begin(), v.end());
}

double DiskMesh::min_angle_deg() const {
  double worst = 180.0;
  for (const auto& t : tris) {
    Vec2 p[3] = {xy[t.a], xy[t.b], xy[t.c]};
    for (int i = 0; i < 3; ++i) {
      Vec2 u = p[(i + 1) % 3] - p[i], v = p[(i + 2) % 3] - p[i];
      double ang = std::acos(std::clamp(dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0));
      worst = std::min(worst, ang * 180.0 / M_PI);
    }
  }
  return worst;
}

void DiskMesh::build_locator() {
  cell_ = target_h;
  x0_ = -domain.r_outer - 2 * cell_;
  y0_ = x0_;
  ncx_ = (int)std::ceil(2.0 * (domain.r_outer + 2 * cell_) / cell_) + 1;
  ncy_ = ncx_;
  cells_.assign((size_t)ncx_ * ncy_, {});
  for (int t = 0; t < n_tris(); ++t) {
    const Tri& T = tris[t];
    double xmin = std::min({xy[T.a].x, xy[T.b].x, xy[T.c].x});
    double xmax = std::max({xy[T.a].x, xy[T.b].x, xy[T.c].x});
    double ymin = std::min({xy[T.a].y, xy[T.b].y, xy[T.c].y});
    double ymax = std::max({xy[T.a].y, xy[T.b].y, xy[T.c].y});
    int i0 = std::clamp((int)((xmin - x0_) / cell_), 0, ncx_ - 1);
    int i1 = std::clamp((int)((xmax - x0_) / cell_), 0, ncx_ - 1);
    int j0 = std::clamp((int)((ymin - y0_) / cell_), 0, ncy_ - 1);
    int j1 = std::clamp((int)((ymax - y0_) / cell_), 0, ncy_ - 1);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) cells_[(size_t)j * ncx_ + i].push_back(t);
  }
}

bool DiskMesh::locate(Vec2 p, Loc& out) const {
  int ci = (int)((p.x - x0_) / cell_);
  int cj = (int)((p.y - y0_) / cell_);
  double best_min = -1e300;
  Loc best;
  if (ci >= 0 && ci < ncx_ && cj >= 0 && cj < ncy_) {
    // every triangle overlapping this cell is binned here, so one pass suffices
    for (int t : cells_[(size_t)cj * ncx_ + ci]) {
      const Tri& T = tris[t];
      Vec2 a = xy[T.a], b = xy[T.b], c = xy[T.c];
      double den = cross(b - a, c - a);
      double l0 = cross(b - p, c - p) / den;
      double l1 = cross(c - p, a - p) / den;
      double l2 = 1.0 - l0 - l1;
      double mn = std::min({l0, l1, l2});
      if (mn > best_min) {
        best_min = mn;
        best.tri = t;
        best.b[0] = l0;
        best.b[1] = l1;
        best.b[2] = l2;
      }
      if (mn >= -1e-13) break;
    }
  }
  if (best.tri < 0 || best_min < -0.08) return false;
  if (best_min < 0) {
    // clamp onto the triangle: the query point sits in the sliver between the
    // polygon hull and a circle
    double s = 0;
    for (int k = 0; k < 3; ++k) {
      best.b[k] = std::max(best.b[k], 0.0);
      s += best.b[k];
    }
    for (int k = 0; k < 3; ++k) best.b[k] /= s;
  }
  out = best;
  return true;
}

void DiskMesh::p1_gradients(int t, Vec2 grad[3]) const {
  const Tri& T = tris[t];
  Vec2 a = xy[T.a], b = xy[T.b], c = xy[T.c];
  double den = cross(b - a, c - a);
  grad[0] = (1.0 / den) * perp(c - b);
  grad[1] = (1.0 / den) * perp(a - c);
  grad[2] = (1.0 / den) * perp(b - a);
}

GradientOp GradientOp::build(const DiskMesh& mesh) {
  GradientOp op;
  op.rows.resize(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    // 2-ring stencil
    std::set<int> st(mesh.nbrs[i].begin(), mesh.nbrs[i].end());
    for (int j : mesh.nbrs[i]) st.insert(mesh.nbrs[j].begin(), mesh.nbrs[j].end());
    st.erase(i);
    std::vector<int> ids(st.begin(), st.end());
    const int n = (int)ids.size();
    if (n < 5) throw NumericalError("gradient stencil too small");

    double hloc = 0;
    for (int j : mesh.nbrs[i]) hloc += norm(mesh.xy[j] - mesh.xy[i]);
    hloc /= mesh.nbrs[i].size();

    // basis [dx, dy, dx^2/2, dx dy, dy^2/2] in coordinates scaled by hloc,
    // rows weighted by 1/|d|^2
    double AtA[5][5] = {};
    std::vector<std::array<double, 5>> wrow(n);
    for (int r = 0; r < n; ++r) {
      Vec2 d = (1.0 / hloc) * (mesh.xy[ids[r]] - mesh.xy[i]);
      double w = 1.0 / dot(d, d);
      std::array<double, 5> b{d.x, d.y, 0.5 * d.x * d.x, d.x * d.y, 0.5 * d.y * d.y};
      for (int p = 0; p < 5; ++p) {
        wrow[r][p] = w * b[p];
        for (int q = 0; q < 5; ++q) AtA[p][q] += w * b[p] * b[q];
      }
    }
    // invert the 5x5 normal matrix by Gauss-Jordan with partial pivoting
    double inv[5][5] = {};
    for (int p = 0; p < 5; ++p) inv[p][p] = 1;
    for (int col = 0; col < 5; ++col) {
      int piv = col;
      for (int r = col + 1; r < 5; ++r)
        if (std::abs(AtA[r][col]) > std::abs(AtA[piv][col])) piv = r;
      if (std::abs(AtA[piv][col]) < 1e-14) throw NumericalError("singular gradient stencil");
      std::swap(AtA[col], AtA[piv]);
      std::swap(inv[col], inv[piv]);
      double s = 1.0 / AtA[col][col];
      for (int q = 0; q < 5; ++q) {
        AtA[col][q] *= s;
        inv[col][q] *= s;
      }
      for (int r = 0; r < 5; ++r) {
        if (r == col) continue;
        double f = AtA[r][col];
        for (int q = 0; q < 5; ++q) {
          AtA[r][q] -= f * AtA[col][q];
          inv[r][q] -= f * inv[col][q];
        }
      }
    }
    auto& row = op.rows[i];
    row.reserve(n);
    for (int r = 0; r < n; ++r) {
      double wx = 0, wy = 0;
      for (int q = 0; q < 5; ++q) {
        wx += inv[0][q] * wrow[r][q];
        wy += inv[1][q] * wrow[r][q];
      }
      row.push_back({ids[r], wx / hloc, wy / hloc});
    }
  }
  return op;
}

}  // namespace atx
