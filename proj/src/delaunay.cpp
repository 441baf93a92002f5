#include "delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "calderon/errors.hpp"

namespace calderon::detail {
namespace {

using Real = long double;

Real orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (Real(b.x()) - a.x()) * (Real(c.y()) - a.y()) -
         (Real(b.y()) - a.y()) * (Real(c.x()) - a.x());
}

// Positive when d lies strictly inside the circumcircle of the CCW triangle abc.
Real incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const Real adx = Real(a.x()) - d.x(), ady = Real(a.y()) - d.y();
  const Real bdx = Real(b.x()) - d.x(), bdy = Real(b.y()) - d.y();
  const Real cdx = Real(c.x()) - d.x(), cdy = Real(c.y()) - d.y();
  const Real alift = adx * adx + ady * ady;
  const Real blift = bdx * bdx + bdy * bdy;
  const Real clift = cdx * cdx + cdy * cdy;
  return alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
         clift * (adx * bdy - bdx * ady);
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Real bx = Real(b.x()) - a.x(), by = Real(b.y()) - a.y();
  const Real cx = Real(c.x()) - a.x(), cy = Real(c.y()) - a.y();
  const Real d = 2 * (bx * cy - by * cx);
  const Real b2 = bx * bx + by * by;
  const Real c2 = cx * cx + cy * cy;
  const Real ux = (cy * b2 - by * c2) / d;
  const Real uy = (bx * c2 - cx * b2) / d;
  return {static_cast<double>(a.x() + ux), static_cast<double>(a.y() + uy)};
}

double min_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto angle = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const Vec2 u = q - p;
    const Vec2 v = r - p;
    return std::atan2(std::abs(cross(u, v)), u.dot(v));
  };
  return std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
}

struct Tri {
  std::array<int, 3> v{};
  std::array<int, 3> n{-1, -1, -1};  // n[i] is across the edge opposite v[i]
  bool alive = true;
};

class Refiner {
 public:
  explicit Refiner(const RefinementInput& in) : in_(in) {}

  RefinementOutput run() {
    setup_super_triangle();
    std::vector<int> index(in_.points.size());
    for (std::size_t i = 0; i < in_.points.size(); ++i) index[i] = insert(in_.points[i]);
    for (const auto& s : in_.segments) {
      const int a = index[s[0]];
      const int b = index[s[1]];
      if (a != b) subsegs_.push_back({a, b});
    }
    const double sin_bound = std::sin(in_.min_angle_deg * std::numbers::pi / 180.0);
    std::set<std::array<int, 3>> skipped;

    for (;;) {
      enforce_segments(true);
      struct Bad {
        double priority;
        int tri;
        std::array<int, 3> v;
      };
      std::vector<Bad> bad;
      for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        const Tri& tri = tris_[t];
        if (!tri.alive || is_super(tri.v[0]) || is_super(tri.v[1]) || is_super(tri.v[2])) continue;
        const Vec2& a = pts_[tri.v[0]];
        const Vec2& b = pts_[tri.v[1]];
        const Vec2& c = pts_[tri.v[2]];
        const Vec2 g = (a + b + c) / 3.0;
        if (!in_.inside(g)) continue;
        if (skipped.contains(tri.v)) continue;
        const double longest = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
        const double size_ratio = longest / in_.size(g);
        const double angle_ratio = sin_bound / std::max(std::sin(min_angle(a, b, c)), 1e-300);
        const double priority = std::max(size_ratio, angle_ratio);
        if (priority > 1.0 + 1e-12) bad.push_back({priority, t, tri.v});
      }
      if (bad.empty()) break;
      std::stable_sort(bad.begin(), bad.end(),
                       [](const Bad& x, const Bad& y) { return x.priority > y.priority; });
      for (const Bad& item : bad) {
        const Tri& tri = tris_[item.tri];
        if (!tri.alive || tri.v != item.v) continue;
        const Vec2& a = pts_[tri.v[0]];
        const Vec2& b = pts_[tri.v[1]];
        const Vec2& c = pts_[tri.v[2]];
        const Vec2 cc = circumcenter(a, b, c);
        std::vector<std::size_t> enc;
        for (std::size_t s = 0; s < subsegs_.size(); ++s) {
          if (encroaches(cc, subsegs_[s])) enc.push_back(s);
        }
        if (!enc.empty()) {
          for (std::size_t s : enc) split_segment(s);
          enforce_segments(false);
          continue;
        }
        if (!in_.inside(cc)) {
          const std::size_t s = crossing_segment((a + b + c) / 3.0, cc);
          if (s == subsegs_.size()) {
            skipped.insert(item.v);
          } else {
            split_segment(s);
            enforce_segments(false);
          }
          continue;
        }
        const std::size_t before = pts_.size();
        const int v = insert(cc);
        if (pts_.size() == before) {
          skipped.insert(item.v);
          continue;
        }
        queue_encroached_by(v);
        enforce_segments(false);
        if (pts_.size() > in_.max_vertices) {
          throw MeshError("mesh refinement exceeded the vertex budget");
        }
      }
    }
    return collect();
  }

 private:
  bool is_super(int v) const { return v < 3; }

  void setup_super_triangle() {
    Eigen::AlignedBox2d box;
    for (const auto& p : in_.points) box.extend(p);
    const Vec2 c = box.center();
    const double m = std::max(box.sizes().maxCoeff(), 1e-12);
    scale_ = m;
    pts_ = {c + Vec2(-30 * m, -20 * m), c + Vec2(30 * m, -20 * m), c + Vec2(0.0, 40 * m)};
    tris_.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, true});
    vtri_ = {0, 0, 0};
    stamp_.push_back(0);
  }

  int add_triangle(int a, int b, int c) {
    Tri tri{{a, b, c}, {-1, -1, -1}, true};
    if (!free_.empty()) {
      const int t = free_.back();
      free_.pop_back();
      tris_[t] = tri;
      stamp_[t] = 0;
      return t;
    }
    tris_.push_back(tri);
    stamp_.push_back(0);
    return static_cast<int>(tris_.size() - 1);
  }

  int locate(const Vec2& p) {
    int t = hint_;
    if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
      t = 0;
      while (!tris_[t].alive) ++t;
    }
    const std::size_t limit = 4 * tris_.size() + 16;
    for (std::size_t step = 0; step < limit; ++step) {
      const Tri& tri = tris_[t];
      bool moved = false;
      for (int k0 = 0; k0 < 3; ++k0) {
        const int k = static_cast<int>((k0 + step) % 3);
        const int a = tri.v[(k + 1) % 3];
        const int b = tri.v[(k + 2) % 3];
        if (orient(pts_[a], pts_[b], p) < 0) {
          if (tri.n[k] < 0) throw MeshError("point outside the enclosing triangle");
          t = tri.n[k];
          moved = true;
          break;
        }
      }
      if (!moved) return t;
    }
    for (int s = 0; s < static_cast<int>(tris_.size()); ++s) {
      const Tri& tri = tris_[s];
      if (!tri.alive) continue;
      if (orient(pts_[tri.v[0]], pts_[tri.v[1]], p) >= 0 &&
          orient(pts_[tri.v[1]], pts_[tri.v[2]], p) >= 0 &&
          orient(pts_[tri.v[2]], pts_[tri.v[0]], p) >= 0) {
        return s;
      }
    }
    throw MeshError("point location failed");
  }

  int insert(const Vec2& p) {
    const int t = locate(p);
    for (int k = 0; k < 3; ++k) {
      const int v = tris_[t].v[k];
      if ((pts_[v] - p).norm() <= 1e-13 * scale_) return v;
    }
    const int pv = static_cast<int>(pts_.size());
    pts_.push_back(p);
    vtri_.push_back(-1);

    ++stamp_id_;
    std::vector<int> cavity{t};
    stamp_[t] = stamp_id_;
    for (std::size_t i = 0; i < cavity.size(); ++i) {
      const Tri& tri = tris_[cavity[i]];
      for (int k = 0; k < 3; ++k) {
        const int nb = tri.n[k];
        if (nb < 0 || stamp_[nb] == stamp_id_) continue;
        const Tri& other = tris_[nb];
        if (incircle(pts_[other.v[0]], pts_[other.v[1]], pts_[other.v[2]], p) > 0) {
          stamp_[nb] = stamp_id_;
          cavity.push_back(nb);
        }
      }
    }

    struct Edge {
      int a, b, outside, owner;
    };
    std::vector<Edge> boundary;
    for (;;) {
      boundary.clear();
      for (int c : cavity) {
        if (stamp_[c] != stamp_id_) continue;
        const Tri& tri = tris_[c];
        for (int k = 0; k < 3; ++k) {
          const int nb = tri.n[k];
          if (nb >= 0 && stamp_[nb] == stamp_id_) continue;
          boundary.push_back({tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], nb, c});
        }
      }
      bool shrunk = false;
      for (const Edge& e : boundary) {
        if (orient(pts_[e.a], pts_[e.b], p) <= 0 && e.owner != t) {
          stamp_[e.owner] = 0;
          shrunk = true;
        }
      }
      if (!shrunk) break;
    }

    std::vector<int> created;
    created.reserve(boundary.size());
    for (const Edge& e : boundary) {
      const int nt = add_triangle(e.a, e.b, pv);
      tris_[nt].n[2] = e.outside;
      if (e.outside >= 0) {
        Tri& out = tris_[e.outside];
        for (int k = 0; k < 3; ++k) {
          if (out.n[k] == e.owner) out.n[k] = nt;
        }
      }
      created.push_back(nt);
    }
    for (int x : created) {
      for (int y : created) {
        if (x == y) continue;
        // x = (a, b, p), y = (a', b', p): edge (b, p) of x is edge (p, a') of y when a' == b.
        if (tris_[y].v[0] == tris_[x].v[1]) {
          tris_[x].n[0] = y;
          tris_[y].n[1] = x;
        }
      }
    }
    for (int c : cavity) {
      if (stamp_[c] != stamp_id_) continue;
      tris_[c].alive = false;
      free_.push_back(c);
    }
    for (int x : created) {
      vtri_[tris_[x].v[0]] = x;
      vtri_[tris_[x].v[1]] = x;
    }
    vtri_[pv] = created.front();
    hint_ = created.front();
    return pv;
  }

  // Triangle containing the directed edge a -> b or b -> a, with its apex
  // index; -1 when the edge is absent.
  std::pair<int, int> find_edge(int a, int b) const {
    const int t0 = vtri_[a];
    int t = t0;
    for (std::size_t guard = 0; guard < tris_.size() + 1; ++guard) {
      const Tri& tri = tris_[t];
      int i = 0;
      while (tri.v[i] != a) ++i;
      if (tri.v[(i + 1) % 3] == b) return {t, (i + 2) % 3};
      if (tri.v[(i + 2) % 3] == b) return {t, (i + 1) % 3};
      t = tri.n[(i + 2) % 3];
      if (t < 0 || t == t0) break;
    }
    return {-1, -1};
  }

  bool encroaches(const Vec2& p, const std::array<int, 2>& s) const {
    const Vec2& a = pts_[s[0]];
    const Vec2& b = pts_[s[1]];
    return (a - p).dot(b - p) < -1e-12 * (a - b).squaredNorm();
  }

  bool segment_needs_split(std::size_t s) const {
    const auto [t, apex] = find_edge(subsegs_[s][0], subsegs_[s][1]);
    if (t < 0) return true;
    const Tri& tri = tris_[t];
    if (encroaches(pts_[tri.v[apex]], subsegs_[s])) return true;
    const int nb = tri.n[apex];
    if (nb >= 0) {
      const Tri& other = tris_[nb];
      for (int v : other.v) {
        if (v != subsegs_[s][0] && v != subsegs_[s][1] && encroaches(pts_[v], subsegs_[s])) {
          return true;
        }
      }
    }
    return false;
  }

  void queue_encroached_by(int v) {
    for (std::size_t s = 0; s < subsegs_.size(); ++s) {
      if (subsegs_[s][0] != v && subsegs_[s][1] != v && encroaches(pts_[v], subsegs_[s])) {
        queue_.push_back(s);
      }
    }
  }

  void enforce_segments(bool full_scan) {
    if (full_scan) {
      for (std::size_t s = 0; s < subsegs_.size(); ++s) queue_.push_back(s);
    }
    while (!queue_.empty()) {
      const std::size_t s = queue_.front();
      queue_.pop_front();
      if (segment_needs_split(s)) split_segment(s);
    }
  }

  void split_segment(std::size_t s) {
    {
      const auto [a, b] = subsegs_[s];
      const Vec2 m = 0.5 * (pts_[a] + pts_[b]);
      const int v = insert(m);
      if (v == a || v == b) throw MeshError("segment split collapsed onto an endpoint");
      subsegs_[s] = {a, v};
      subsegs_.push_back({v, b});
      queue_.push_back(s);
      queue_.push_back(subsegs_.size() - 1);
      queue_encroached_by(v);
      if (pts_.size() > in_.max_vertices) {
        throw MeshError("mesh refinement exceeded the vertex budget");
      }
    }
  }

  // Subsegment first crossed by the path from p to q, or subsegs_.size().
  std::size_t crossing_segment(const Vec2& p, const Vec2& q) const {
    std::size_t best = subsegs_.size();
    double best_t = 2.0;
    const Vec2 d = q - p;
    for (std::size_t s = 0; s < subsegs_.size(); ++s) {
      const Vec2& a = pts_[subsegs_[s][0]];
      const Vec2& b = pts_[subsegs_[s][1]];
      const Vec2 e = b - a;
      const double den = cross(d, e);
      if (std::abs(den) < 1e-300) continue;
      const double t = cross(a - p, e) / den;
      const double u = cross(a - p, d) / den;
      if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0 && t < best_t) {
        best_t = t;
        best = s;
      }
    }
    return best;
  }

  RefinementOutput collect() const {
    RefinementOutput out;
    std::vector<int> remap(pts_.size(), -1);
    for (const Tri& tri : tris_) {
      if (!tri.alive || is_super(tri.v[0]) || is_super(tri.v[1]) || is_super(tri.v[2])) continue;
      const Vec2 g = (pts_[tri.v[0]] + pts_[tri.v[1]] + pts_[tri.v[2]]) / 3.0;
      if (!in_.inside(g)) continue;
      std::array<int, 3> t{};
      for (int k = 0; k < 3; ++k) {
        int& r = remap[tri.v[k]];
        if (r < 0) {
          r = static_cast<int>(out.vertices.size());
          out.vertices.push_back(pts_[tri.v[k]]);
        }
        t[k] = r;
      }
      out.triangles.push_back(t);
    }
    // Deterministic numbering independent of slot reuse: sort vertices by
    // insertion order, then triangles lexicographically.
    std::vector<int> by_insertion;
    for (std::size_t v = 0; v < pts_.size(); ++v) {
      if (remap[v] >= 0) by_insertion.push_back(static_cast<int>(v));
    }
    std::vector<int> renumber(out.vertices.size());
    RefinementOutput sorted;
    for (int v : by_insertion) {
      renumber[remap[v]] = static_cast<int>(sorted.vertices.size());
      sorted.vertices.push_back(pts_[v]);
    }
    for (auto t : out.triangles) {
      for (int& x : t) x = renumber[x];
      std::rotate(t.begin(), std::min_element(t.begin(), t.end()), t.end());
      sorted.triangles.push_back(t);
    }
    std::sort(sorted.triangles.begin(), sorted.triangles.end());
    return sorted;
  }

  const RefinementInput& in_;
  std::vector<Vec2> pts_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::vector<int> vtri_;
  std::vector<int> stamp_;
  int stamp_id_ = 0;
  int hint_ = 0;
  double scale_ = 1.0;
  std::vector<std::array<int, 2>> subsegs_;
  std::deque<std::size_t> queue_;
};

}  // namespace

RefinementOutput refine_delaunay(const RefinementInput& input) {
  Refiner refiner(input);
  return refiner.run();
}

}  // namespace calderon::detail
