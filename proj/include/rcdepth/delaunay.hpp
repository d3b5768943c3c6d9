#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rcdepth/types.hpp"

namespace rcdepth {

struct Point2 {
  double x = 0.0, y = 0.0;
};

// Vertex indices into the input point list, counter-clockwise.
struct Triangle {
  int a = -1, b = -1, c = -1;
};

namespace detail {

// Twice the signed area of (a, b, c); > 0 for counter-clockwise.
// Exact for integer coordinates up to ~2^26 in magnitude.
inline double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 iff p is strictly inside the circumcircle of CCW triangle (a, b, c).
// Translated 3x3 determinant; exact for integer coordinates within ~2^13.
inline double incircle(const Point2& a, const Point2& b, const Point2& c,
                       const Point2& p) {
  double ax = a.x - p.x, ay = a.y - p.y;
  double bx = b.x - p.x, by = b.y - p.y;
  double cx = c.x - p.x, cy = c.y - p.y;
  double a2 = ax * ax + ay * ay;
  double b2 = bx * bx + by * by;
  double c2 = cx * cx + cy * cy;
  return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) +
         a2 * (bx * cy - by * cx);
}

struct TriNode {
  int v[3];    // vertex indices, CCW
  int nbr[3];  // nbr[i] is across the edge opposite v[i]; -1 at the hull
  bool alive = true;
};

class DelaunayBuilder {
 public:
  explicit DelaunayBuilder(const std::vector<Point2>& pts) : pts_(pts) {
    n_real_ = static_cast<int>(pts_.size());
    double min_x = pts_[0].x, max_x = pts_[0].x;
    double min_y = pts_[0].y, max_y = pts_[0].y;
    for (const Point2& p : pts_) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    double cx = 0.5 * (min_x + max_x);
    double cy = 0.5 * (min_y + max_y);
    double m = std::max(max_x - min_x, max_y - min_y) + 1.0;
    pts_.push_back({cx - 20.0 * m, cy - 13.0 * m});
    pts_.push_back({cx + 20.0 * m, cy - 13.0 * m});
    pts_.push_back({cx, cy + 26.0 * m});
    tris_.push_back(TriNode{{n_real_, n_real_ + 1, n_real_ + 2}, {-1, -1, -1}});
    last_tri_ = 0;
  }

  std::vector<Triangle> build() {
    for (int i = 0; i < n_real_; ++i) insert(i);
    std::vector<Triangle> out;
    for (const TriNode& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n_real_ || t.v[1] >= n_real_ || t.v[2] >= n_real_)
        continue;
      out.push_back(Triangle{t.v[0], t.v[1], t.v[2]});
    }
    return out;
  }

 private:
  int locate(const Point2& p) const {
    int cur = last_tri_;
    size_t steps = 0;
    const size_t max_steps = tris_.size() * 4 + 64;
    while (steps++ < max_steps) {
      if (!tris_[cur].alive) break;
      const TriNode& t = tris_[cur];
      int next = -1;
      for (int j = 0; j < 3; ++j) {
        const Point2& e0 = pts_[t.v[(j + 1) % 3]];
        const Point2& e1 = pts_[t.v[(j + 2) % 3]];
        if (orient2d(e0, e1, p) < 0.0) {
          next = t.nbr[j];
          break;
        }
      }
      if (next == -1) return cur;  // inside or on boundary of cur
      cur = next;
    }
    // Fallback scan; only reachable on walk cycles through degeneracies.
    for (size_t k = 0; k < tris_.size(); ++k) {
      const TriNode& t = tris_[k];
      if (!t.alive) continue;
      bool inside = true;
      for (int j = 0; j < 3 && inside; ++j) {
        const Point2& e0 = pts_[t.v[(j + 1) % 3]];
        const Point2& e1 = pts_[t.v[(j + 2) % 3]];
        if (orient2d(e0, e1, p) < 0.0) inside = false;
      }
      if (inside) return static_cast<int>(k);
    }
    throw Error(ErrorCode::DegenerateSupport,
                "triangulation: point location failed");
  }

  void insert(int pi) {
    const Point2& p = pts_[pi];
    int start = locate(p);

    // Grow the cavity of triangles whose circumcircle strictly contains p.
    // The containing triangle is always removed, so exact cocircular ties
    // resolve by insertion order.
    std::vector<int> cavity;
    std::vector<int> stack{start};
    in_cavity_.assign(tris_.size(), 0);
    in_cavity_[start] = 1;
    while (!stack.empty()) {
      int ti = stack.back();
      stack.pop_back();
      cavity.push_back(ti);
      const TriNode& t = tris_[ti];
      for (int j = 0; j < 3; ++j) {
        int nb = t.nbr[j];
        if (nb < 0 || in_cavity_[nb]) continue;
        const TriNode& tn = tris_[nb];
        if (incircle(pts_[tn.v[0]], pts_[tn.v[1]], pts_[tn.v[2]], p) > 0.0) {
          in_cavity_[nb] = 1;
          stack.push_back(nb);
        }
      }
    }

    // Boundary edges of the cavity, with the surviving triangle across each.
    struct BoundaryEdge {
      int a, b;     // directed so the cavity interior is on the left
      int outside;  // triangle index or -1
      int out_slot;
    };
    std::vector<BoundaryEdge> edges;
    for (int ti : cavity) {
      const TriNode& t = tris_[ti];
      for (int j = 0; j < 3; ++j) {
        int nb = t.nbr[j];
        if (nb >= 0 && in_cavity_[nb]) continue;
        int ea = t.v[(j + 1) % 3];
        int eb = t.v[(j + 2) % 3];
        int out_slot = -1;
        if (nb >= 0) {
          for (int k = 0; k < 3; ++k)
            if (tris_[nb].nbr[k] == ti) out_slot = k;
        }
        edges.push_back(BoundaryEdge{ea, eb, nb, out_slot});
      }
    }

    for (int ti : cavity) tris_[ti].alive = false;

    // Fan the cavity from p; new triangle (ea, eb, p) is CCW because the
    // cavity is star-shaped around p.
    std::unordered_map<int64_t, std::pair<int, int>> open_edges;
    int first_new = -1;
    for (const BoundaryEdge& e : edges) {
      int ni = static_cast<int>(tris_.size());
      TriNode nt;
      nt.v[0] = e.a;
      nt.v[1] = e.b;
      nt.v[2] = pi;
      nt.nbr[2] = e.outside;
      nt.nbr[0] = -1;  // across (b, p)
      nt.nbr[1] = -1;  // across (p, a)
      if (e.outside >= 0 && e.out_slot >= 0)
        tris_[e.outside].nbr[e.out_slot] = ni;
      tris_.push_back(nt);
      in_cavity_.push_back(0);
      if (first_new < 0) first_new = ni;

      auto link = [&](int vert, int slot) {
        int64_t key = vert;
        auto it = open_edges.find(key);
        if (it == open_edges.end()) {
          open_edges.emplace(key, std::make_pair(ni, slot));
        } else {
          tris_[ni].nbr[slot] = it->second.first;
          tris_[it->second.first].nbr[it->second.second] = ni;
          open_edges.erase(it);
        }
      };
      // Edge (b, p) is shared with the new triangle whose a == b; key on the
      // shared boundary vertex.
      link(e.b, 0);
      link(e.a, 1);
    }
    last_tri_ = first_new;
  }

  std::vector<Point2> pts_;
  std::vector<TriNode> tris_;
  std::vector<uint8_t> in_cavity_;
  int n_real_ = 0;
  int last_tri_ = 0;
};

}  // namespace detail

// Delaunay triangulation by incremental insertion. Requires at least three
// points, not all collinear. Cocircular ties resolve by insertion order.
inline std::vector<Triangle> delaunay_triangulate(
    const std::vector<Point2>& pts) {
  if (pts.size() < 3)
    throw Error(ErrorCode::DegenerateSupport,
                "triangulation needs at least 3 points");
  size_t j = 1;
  while (j < pts.size() && pts[j].x == pts[0].x && pts[j].y == pts[0].y) ++j;
  bool noncollinear = false;
  for (size_t k = j + 1; j < pts.size() && k < pts.size() && !noncollinear;
       ++k) {
    if (detail::orient2d(pts[0], pts[j], pts[k]) != 0.0) noncollinear = true;
  }
  if (!noncollinear)
    throw Error(ErrorCode::DegenerateSupport, "all points collinear");
  detail::DelaunayBuilder builder(pts);
  return builder.build();
}

}  // namespace rcdepth
