#include "calderon/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "calderon/errors.hpp"

namespace calderon {

double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

double signed_area(std::span<const Vec2> polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& p = polygon[i];
    const Vec2& q = polygon[(i + 1) % polygon.size()];
    twice += cross(p, q);
  }
  return 0.5 * twice;
}

double distance_to_segment(const Vec2& p, const Segment& s) {
  const Vec2 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

PolygonSide classify_point(const Vec2& p, std::span<const Vec2> polygon, double tol) {
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (distance_to_segment(p, {polygon[i], polygon[(i + 1) % n]}) <= tol) {
      return PolygonSide::kBoundary;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = b.x() + (p.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside ? PolygonSide::kInside : PolygonSide::kOutside;
}

InterfacePortion InterfacePortion::flipped() const {
  InterfacePortion out = *this;
  std::swap(out.inside_domain, out.outside_domain);
  out.normal = -normal;
  out.segment = {segment.b, segment.a};
  return out;
}

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey key_of(int u, int v) { return {std::min(u, v), std::max(u, v)}; }

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

bool properly_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double tol) {
  const double scale_ab = (b - a).norm();
  const double scale_cd = (d - c).norm();
  const double o1 = orient(a, b, c) / scale_ab;
  const double o2 = orient(a, b, d) / scale_ab;
  const double o3 = orient(c, d, a) / scale_cd;
  const double o4 = orient(c, d, b) / scale_cd;
  return ((o1 > tol && o2 < -tol) || (o1 < -tol && o2 > tol)) &&
         ((o3 > tol && o4 < -tol) || (o3 < -tol && o4 > tol));
}

bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double tol) {
  if (properly_cross(a, b, c, d, tol)) return true;
  return distance_to_segment(a, {c, d}) <= tol || distance_to_segment(b, {c, d}) <= tol ||
         distance_to_segment(c, {a, b}) <= tol || distance_to_segment(d, {a, b}) <= tol;
}

std::vector<Vec2> coords(const std::vector<int>& poly, const std::vector<Vec2>& vertices) {
  std::vector<Vec2> out;
  out.reserve(poly.size());
  for (int i : poly) out.push_back(vertices[i]);
  return out;
}

bool is_simple(const std::vector<Vec2>& poly, double tol) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((poly[i] - poly[j]).norm() <= tol) return false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      const Vec2& c = poly[j];
      const Vec2& d = poly[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges may only share their common vertex; a fold-back
        // shows up as the far endpoint landing on the other edge.
        const Vec2& shared = (j == i + 1) ? b : a;
        const Vec2& p = (j == i + 1) ? a : b;
        const Vec2& q = (j == i + 1) ? d : c;
        if (distance_to_segment(p, {shared, q}) <= tol ||
            distance_to_segment(q, {shared, p}) <= tol) {
          return false;
        }
        continue;
      }
      if (segments_touch(a, b, c, d, tol)) return false;
    }
  }
  return std::abs(signed_area(poly)) > tol * tol;
}

struct Normalizer {
  const std::vector<Vec2>& vertices;
  std::vector<int> canonical;
  std::vector<int> used;  // canonical vertex ids referenced by any polygon
  double tol;

  std::vector<int> remap(const std::vector<int>& poly, const char* what) const {
    std::vector<int> out;
    for (int i : poly) {
      if (i < 0 || i >= static_cast<int>(vertices.size())) {
        throw GeometryError(std::string(what) + " references vertex index " + std::to_string(i) +
                            " out of range");
      }
      const int c = canonical[i];
      if (out.empty() || out.back() != c) out.push_back(c);
    }
    while (out.size() > 1 && out.front() == out.back()) out.pop_back();
    return out;
  }

  // Inserts every used vertex that lies inside an edge, so that shared
  // boundaries are made of identical edges on both sides.
  std::vector<int> split_edges(const std::vector<int>& poly) const {
    std::vector<int> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const int u = poly[i];
      const int v = poly[(i + 1) % n];
      out.push_back(u);
      const Vec2 a = vertices[u];
      const Vec2 d = vertices[v] - a;
      std::vector<std::pair<double, int>> inner;
      for (int w : used) {
        if (w == u || w == v) continue;
        const Vec2& p = vertices[w];
        if (distance_to_segment(p, {a, vertices[v]}) > tol) continue;
        const double t = (p - a).dot(d) / d.squaredNorm();
        if (t > 0.0 && t < 1.0) inner.emplace_back(t, w);
      }
      std::sort(inner.begin(), inner.end());
      for (const auto& [t, w] : inner) out.push_back(w);
    }
    return out;
  }

  std::vector<int> orient_ccw(std::vector<int> poly) const {
    if (signed_area(coords(poly, vertices)) < 0.0) std::reverse(poly.begin(), poly.end());
    return poly;
  }
};

struct PolygonEdge {
  int u = 0;
  int v = 0;
  int neighbour = 0;  // other subdomain id, 0 for the exterior
  bool sigma = false;
};

// One-sided cylinder test at the midpoint of a candidate flat portion.
bool cylinder_fits(const DomainPartition& partition, const InterfacePortion& portion,
                   double r0) {
  if (portion.segment.length() < 2.0 * r0 / 3.0 - partition.tolerance()) return false;
  const double half = r0 / 3.0;
  const Vec2 tau = portion.segment.tangent();
  const std::array<double, 5> along = {-0.98, -0.5, 0.0, 0.5, 0.98};
  const std::array<double, 5> across = {0.02, 0.25, 0.5, 0.75, 0.98};
  const double tol = partition.tolerance();
  for (double s : along) {
    for (double t : across) {
      const Vec2 base = portion.center + s * half * tau;
      const Vec2 in = base - t * half * portion.normal;
      const Vec2 out = base + t * half * portion.normal;
      if (classify_point(in, partition.subdomain(portion.inside_domain), tol) !=
          PolygonSide::kInside) {
        return false;
      }
      if (portion.outside_domain == 0) {
        if (classify_point(out, partition.outer(), tol) != PolygonSide::kOutside) return false;
      } else if (classify_point(out, partition.subdomain(portion.outside_domain), tol) !=
                 PolygonSide::kInside) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

double DomainPartition::subdomain_area(int id) const { return signed_area(subdomain(id)); }

std::optional<int> DomainPartition::locate(const Vec2& x) const {
  for (int id = 1; id <= num_subdomains(); ++id) {
    if (classify_point(x, subdomain(id), tolerance()) != PolygonSide::kOutside) return id;
  }
  return std::nullopt;
}

bool DomainPartition::contains(const Vec2& x) const {
  return classify_point(x, outer_, tolerance()) != PolygonSide::kOutside;
}

bool DomainPartition::on_boundary(const Vec2& x) const {
  return classify_point(x, outer_, tolerance()) == PolygonSide::kBoundary;
}

bool DomainPartition::on_sigma(const Vec2& x) const {
  return std::any_of(sigma_.begin(), sigma_.end(),
                     [&](const Segment& s) { return distance_to_segment(x, s) <= tolerance(); });
}

const InterfacePortion& DomainPartition::sigma_portion() const {
  for (const auto& p : portions_) {
    if (p.on_boundary()) return p;
  }
  throw FlatPortionError("partition has no flat portion of D_1 on Sigma");
}

std::optional<InterfacePortion> DomainPartition::portion_between(int outside, int inside) const {
  for (const auto& p : portions_) {
    if (p.outside_domain == outside && p.inside_domain == inside) return p;
    if (p.outside_domain == inside && p.inside_domain == outside) return p.flipped();
  }
  return std::nullopt;
}

std::vector<int> DomainPartition::neighbours(int id) const {
  std::set<int> out;
  for (const auto& p : portions_) {
    if (p.on_boundary()) continue;
    if (p.inside_domain == id) out.insert(p.outside_domain);
    if (p.outside_domain == id) out.insert(p.inside_domain);
  }
  return {out.begin(), out.end()};
}

std::vector<Segment> DomainPartition::constraint_segments() const { return edges_; }

DomainPartition DomainPartition::build(const PartitionSpec& spec) {
  if (spec.vertices.size() < 3) throw GeometryError("partition needs at least three vertices");
  if (spec.outer.size() < 3) throw GeometryError("outer boundary needs at least three vertices");
  if (spec.subdomains.empty()) throw GeometryError("partition has no subdomains");
  if (!(spec.r0 > 0.0)) throw GeometryError("r0 must be positive");
  if (!(spec.lipschitz_L > 0.0)) throw GeometryError("Lipschitz constant L must be positive");
  if (spec.sigma_edges.empty()) throw GeometryError("Sigma must contain at least one edge");

  DomainPartition out;
  out.spec_ = spec;

  Eigen::AlignedBox2d box;
  for (const auto& v : spec.vertices) box.extend(v);
  out.scale_ = box.diagonal().norm();
  const double tol = out.tolerance();

  Normalizer norm{spec.vertices, {}, {}, tol};
  norm.canonical.resize(spec.vertices.size());
  for (std::size_t i = 0; i < spec.vertices.size(); ++i) {
    norm.canonical[i] = static_cast<int>(i);
    for (std::size_t j = 0; j < i; ++j) {
      if ((spec.vertices[i] - spec.vertices[j]).norm() <= tol) {
        norm.canonical[i] = norm.canonical[j];
        break;
      }
    }
  }

  // Sigma as geometric segments of the declared outer edges.
  std::vector<Segment> declared_sigma;
  for (int e : spec.sigma_edges) {
    if (e < 0 || e >= static_cast<int>(spec.outer.size())) {
      throw GeometryError("Sigma edge id " + std::to_string(e) + " out of range");
    }
    const int u = spec.outer[e];
    const int v = spec.outer[(e + 1) % spec.outer.size()];
    if (u < 0 || v < 0 || u >= static_cast<int>(spec.vertices.size()) ||
        v >= static_cast<int>(spec.vertices.size())) {
      throw GeometryError("outer boundary references a vertex out of range");
    }
    declared_sigma.push_back({spec.vertices[u], spec.vertices[v]});
  }

  std::vector<int> outer = norm.remap(spec.outer, "outer boundary");
  std::vector<std::vector<int>> subs;
  for (std::size_t k = 0; k < spec.subdomains.size(); ++k) {
    subs.push_back(norm.remap(spec.subdomains[k], "subdomain"));
  }
  {
    std::set<int> used(outer.begin(), outer.end());
    for (const auto& s : subs) used.insert(s.begin(), s.end());
    norm.used.assign(used.begin(), used.end());
  }

  if (!is_simple(coords(outer, spec.vertices), tol)) {
    throw CoverageError("outer boundary is not a simple polygon (self-touching or degenerate)");
  }
  for (std::size_t k = 0; k < subs.size(); ++k) {
    if (!is_simple(coords(subs[k], spec.vertices), tol)) {
      throw GeometryError("subdomain D_" + std::to_string(k + 1) + " is not a simple polygon");
    }
  }

  outer = norm.split_edges(norm.orient_ccw(outer));
  for (auto& s : subs) s = norm.split_edges(norm.orient_ccw(s));

  out.outer_ = coords(outer, spec.vertices);
  for (const auto& s : subs) out.subdomains_.push_back(coords(s, spec.vertices));
  out.area_ = signed_area(out.outer_);
  const int n_sub = static_cast<int>(subs.size());

  // Sigma edges of the normalised outer polygon, which must form one run.
  std::vector<bool> outer_sigma(outer.size(), false);
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const Vec2 mid = 0.5 * (spec.vertices[outer[i]] + spec.vertices[outer[(i + 1) % outer.size()]]);
    const Vec2 a = spec.vertices[outer[i]];
    const Vec2 b = spec.vertices[outer[(i + 1) % outer.size()]];
    for (const auto& s : declared_sigma) {
      if (distance_to_segment(mid, s) <= tol && distance_to_segment(a, s) <= tol &&
          distance_to_segment(b, s) <= tol) {
        outer_sigma[i] = true;
      }
    }
  }
  {
    int starts = 0;
    for (std::size_t i = 0; i < outer.size(); ++i) {
      const bool prev = outer_sigma[(i + outer.size() - 1) % outer.size()];
      if (outer_sigma[i] && !prev) ++starts;
    }
    const bool all = std::all_of(outer_sigma.begin(), outer_sigma.end(), [](bool b) { return b; });
    if (!all && starts != 1) throw GeometryError("Sigma must be a contiguous set of outer edges");
    std::size_t first = 0;
    if (!all) {
      while (!(outer_sigma[first] && !outer_sigma[(first + outer.size() - 1) % outer.size()])) {
        ++first;
      }
    }
    for (std::size_t k = 0; k < outer.size(); ++k) {
      const std::size_t i = (first + k) % outer.size();
      if (!outer_sigma[i]) break;
      out.sigma_.push_back(
          {spec.vertices[outer[i]], spec.vertices[outer[(i + 1) % outer.size()]]});
    }
  }

  // Subdomains must sit inside Omega.
  for (int k = 0; k < n_sub; ++k) {
    for (const Vec2& p : out.subdomains_[k]) {
      if (classify_point(p, out.outer_, tol) == PolygonSide::kOutside) {
        throw CoverageError("subdomain D_" + std::to_string(k + 1) + " extends outside Omega");
      }
    }
    const auto& poly = out.subdomains_[k];
    for (std::size_t i = 0; i < poly.size(); ++i) {
      for (std::size_t j = 0; j < out.outer_.size(); ++j) {
        if (properly_cross(poly[i], poly[(i + 1) % poly.size()], out.outer_[j],
                           out.outer_[(j + 1) % out.outer_.size()], tol)) {
          throw CoverageError("subdomain D_" + std::to_string(k + 1) + " crosses dOmega");
        }
      }
    }
  }

  // Pairwise interior intersections.
  for (int k = 0; k < n_sub; ++k) {
    for (int l = k + 1; l < n_sub; ++l) {
      const auto& pk = out.subdomains_[k];
      const auto& pl = out.subdomains_[l];
      for (std::size_t i = 0; i < pk.size(); ++i) {
        for (std::size_t j = 0; j < pl.size(); ++j) {
          if (properly_cross(pk[i], pk[(i + 1) % pk.size()], pl[j], pl[(j + 1) % pl.size()], tol)) {
            std::ostringstream msg;
            msg << "subdomains D_" << k + 1 << " and D_" << l + 1 << " overlap";
            throw OverlapError(msg.str());
          }
        }
      }
    }
  }
  double sum = 0.0;
  for (int k = 1; k <= n_sub; ++k) sum += out.subdomain_area(k);
  if (sum > out.area_ * (1.0 + 1e-12) + tol * tol) {
    throw OverlapError("subdomain areas exceed |Omega|: interiors overlap");
  }
  if (sum < out.area_ * (1.0 - 1e-12) - tol * tol) {
    throw CoverageError("subdomains do not cover Omega");
  }

  // Edge adjacency.
  std::set<EdgeKey> outer_keys;
  std::map<EdgeKey, bool> outer_key_sigma;
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const EdgeKey key = key_of(outer[i], outer[(i + 1) % outer.size()]);
    outer_keys.insert(key);
    outer_key_sigma[key] = outer_sigma[i];
  }
  std::map<EdgeKey, std::vector<std::pair<int, int>>> owners;  // (subdomain id, direction u<v)
  for (int k = 0; k < n_sub; ++k) {
    const auto& s = subs[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int u = s[i];
      const int v = s[(i + 1) % s.size()];
      owners[key_of(u, v)].emplace_back(k + 1, u < v ? 1 : -1);
    }
  }
  for (const auto& [key, list] : owners) {
    if (list.size() > 2 || (list.size() == 2 && list[0].second == list[1].second)) {
      throw OverlapError("edge shared by overlapping subdomains");
    }
    if (list.size() == 1 && !outer_keys.contains(key)) {
      throw CoverageError("interface edge with a subdomain on one side only");
    }
    if (list.size() == 2 && outer_keys.contains(key)) {
      throw OverlapError("boundary edge claimed by two subdomains");
    }
  }
  for (const auto& key : outer_keys) {
    if (!owners.contains(key)) throw CoverageError("outer edge not covered by any subdomain");
  }
  for (const auto& [key, list] : owners) {
    out.edges_.push_back({spec.vertices[key.first], spec.vertices[key.second]});
  }

  // Connectivity through shared edges.
  {
    std::vector<std::set<int>> adj(n_sub + 1);
    for (const auto& [key, list] : owners) {
      if (list.size() == 2) {
        adj[list[0].first].insert(list[1].first);
        adj[list[1].first].insert(list[0].first);
      }
    }
    std::vector<bool> seen(n_sub + 1, false);
    std::queue<int> q;
    q.push(1);
    seen[1] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
      }
    }
    for (int k = 1; k <= n_sub; ++k) {
      if (!seen[k]) {
        throw CoverageError("subdomain D_" + std::to_string(k) +
                            " shares no edge with the rest of the partition");
      }
    }
  }

  // Flat portions from maximal straight runs of edges with a common neighbour.
  std::vector<InterfacePortion> sigma_candidates;
  std::map<EdgeKey, InterfacePortion> interior;  // (outside, inside) -> longest fitting run
  for (int k = 0; k < n_sub; ++k) {
    const int id = k + 1;
    const auto& s = subs[k];
    const std::size_t n = s.size();
    std::vector<PolygonEdge> edges(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int u = s[i];
      const int v = s[(i + 1) % n];
      const auto& list = owners.at(key_of(u, v));
      int other = 0;
      for (const auto& [owner, dir] : list) {
        if (owner != id) other = owner;
      }
      const bool sig = other == 0 && outer_key_sigma.at(key_of(u, v));
      edges[i] = {u, v, other, sig};
    }
    auto same_run = [&](const PolygonEdge& e, const PolygonEdge& f) {
      if (e.neighbour != f.neighbour || e.sigma != f.sigma) return false;
      const Vec2 te = (spec.vertices[e.v] - spec.vertices[e.u]).normalized();
      const Vec2 tf = (spec.vertices[f.v] - spec.vertices[f.u]).normalized();
      return std::abs(cross(te, tf)) < 1e-12 && te.dot(tf) > 0.0;
    };
    std::size_t start = 0;
    while (start < n && same_run(edges[(start + n - 1) % n], edges[start])) ++start;
    if (start == n) start = 0;
    for (std::size_t done = 0; done < n;) {
      const std::size_t first = (start + done) % n;
      std::size_t len = 1;
      while (done + len < n && same_run(edges[(first + len - 1) % n], edges[(first + len) % n])) {
        ++len;
      }
      const PolygonEdge& e0 = edges[first];
      const PolygonEdge& e1 = edges[(first + len - 1) % n];
      done += len;
      Segment seg{spec.vertices[e0.u], spec.vertices[e1.v]};
      const Vec2 tau = seg.tangent();
      const Vec2 inward{-tau.y(), tau.x()};
      InterfacePortion portion;
      portion.segment = seg;
      portion.center = seg.midpoint();
      if (e0.neighbour == 0) {
        if (!e0.sigma || id != 1) continue;
        portion.inside_domain = id;
        portion.outside_domain = 0;
        portion.normal = -inward;
        if (cylinder_fits(out, portion, spec.r0)) sigma_candidates.push_back(portion);
      } else if (id < e0.neighbour) {
        portion.inside_domain = e0.neighbour;
        portion.outside_domain = id;
        portion.normal = inward;
        if (!cylinder_fits(out, portion, spec.r0)) continue;
        const EdgeKey pair{id, e0.neighbour};
        auto it = interior.find(pair);
        if (it == interior.end() || it->second.segment.length() < seg.length()) {
          interior[pair] = portion;
        }
      }
    }
  }

  if (!sigma_candidates.empty()) {
    const auto best = std::max_element(
        sigma_candidates.begin(), sigma_candidates.end(),
        [](const auto& a, const auto& b) { return a.segment.length() < b.segment.length(); });
    out.portions_.push_back(*best);
  } else if (spec.enforce_apriori) {
    throw FlatPortionError("dD_1 contains no flat portion of size r0 inside Sigma");
  }
  for (const auto& [pair, portion] : interior) out.portions_.push_back(portion);

  for (const auto& [a, b] : spec.declared_interfaces) {
    if (a < 1 || b < 1 || a > n_sub || b > n_sub || a == b) {
      throw GeometryError("declared interface references an invalid subdomain id");
    }
    if (!out.portion_between(a, b)) {
      std::ostringstream msg;
      msg << "declared interface D_" << a << "/D_" << b << " has no flat portion of size r0";
      throw FlatPortionError(msg.str());
    }
  }

  if (spec.enforce_apriori && out.area_ > n_sub * spec.r0 * spec.r0 * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "|Omega| = " << out.area_ << " exceeds N r0^2 = " << n_sub * spec.r0 * spec.r0;
    throw GeometryError(msg.str());
  }
  return out;
}

Chain find_chain(const DomainPartition& partition, int target) {
  const int n = partition.num_subdomains();
  if (target < 1 || target > n) {
    throw PreconditionError("target subdomain " + std::to_string(target) + " does not exist");
  }
  const InterfacePortion& sigma1 = partition.sigma_portion();
  std::vector<int> dist(n + 1, -1);
  std::queue<int> q;
  dist[target] = 0;
  q.push(target);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : partition.neighbours(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  if (dist[1] < 0) {
    throw NoChainError("no chain of flat portions joins D_1 to D_" + std::to_string(target));
  }
  Chain chain;
  chain.ids.push_back(1);
  InterfacePortion first = sigma1;
  first.index_k = 1;
  chain.portions.push_back(first);
  int u = 1;
  while (u != target) {
    int next = -1;
    for (int v : partition.neighbours(u)) {
      if (dist[v] == dist[u] - 1) {
        next = v;
        break;
      }
    }
    InterfacePortion p = *partition.portion_between(u, next);
    p.index_k = static_cast<int>(chain.ids.size()) + 1;
    chain.ids.push_back(next);
    chain.portions.push_back(p);
    u = next;
  }
  return chain;
}

std::vector<std::pair<Vec2, Vec2>> probe_points(const InterfacePortion& portion, double r0,
                                                int count) {
  if (count < 1) throw PreconditionError("probe_points needs count >= 1");
  std::vector<std::pair<Vec2, Vec2>> out;
  const Vec2 tau = portion.segment.tangent();
  if (count == 1) {
    out.emplace_back(portion.center, portion.normal);
    return out;
  }
  const double reach = r0 / 8.0;
  for (int i = 0; i < count; ++i) {
    const double s = -reach + 2.0 * reach * i / (count - 1);
    out.emplace_back(portion.center + s * tau, portion.normal);
  }
  return out;
}

PartitionSpec layered_spec(int layers, double width, double depth, double r0, double lipschitz_L) {
  if (layers < 1) throw PreconditionError("layered partition needs at least one layer");
  PartitionSpec spec;
  spec.r0 = r0;
  spec.lipschitz_L = lipschitz_L;
  // left column 0..layers (top to bottom), then right column.
  for (int k = 0; k <= layers; ++k) spec.vertices.emplace_back(0.0, depth * (1.0 - double(k) / layers));
  for (int k = 0; k <= layers; ++k) spec.vertices.emplace_back(width, depth * (1.0 - double(k) / layers));
  auto left = [](int k) { return k; };
  auto right = [layers](int k) { return layers + 1 + k; };
  spec.outer.push_back(left(layers));
  for (int k = layers; k >= 0; --k) spec.outer.push_back(right(k));
  for (int k = 0; k < layers; ++k) spec.outer.push_back(left(k));
  spec.sigma_edges = {layers + 1};  // right(0) -> left(0): the top edge
  for (int k = 1; k <= layers; ++k) {
    spec.subdomains.push_back({left(k), right(k), right(k - 1), left(k - 1)});
  }
  return spec;
}

double AugmentedDomain::depth_of(const Vec2& x) const { return (x - contact.a).dot(outward); }

AugmentedDomain augment(const DomainPartition& partition) {
  const InterfacePortion& sigma1 = partition.sigma_portion();
  const double r0 = partition.r0();
  const Vec2 tau = sigma1.segment.tangent();
  const Vec2 out_n = sigma1.normal;
  const double reach = std::min((sigma1.center - sigma1.segment.a).norm(),
                                (sigma1.center - sigma1.segment.b).norm());
  const double half = std::min(2.0 * r0 / 3.0, 0.999 * reach);
  const double depth = 2.0 * r0 / 3.0;
  const Vec2 c1 = sigma1.center - half * tau;
  const Vec2 c2 = sigma1.center + half * tau;
  const Vec2 c3 = c2 + depth * out_n;
  const Vec2 c4 = c1 + depth * out_n;

  const PartitionSpec& base = partition.spec();
  PartitionSpec spec;
  spec.vertices = base.vertices;
  spec.subdomains = base.subdomains;
  spec.r0 = base.r0;
  spec.lipschitz_L = base.lipschitz_L;
  spec.enforce_apriori = false;

  // Walk the normalised outer polygon, replacing the stretch between c1 and
  // c2 by the outward bump c1 -> c4 -> c3 -> c2.
  const auto& outer = partition.outer();
  const double tol = partition.tolerance();
  std::vector<Vec2> ring;
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const Vec2& a = outer[i];
    const Vec2& b = outer[(i + 1) % outer.size()];
    ring.push_back(a);
    std::vector<std::pair<double, Vec2>> inserts;
    for (const Vec2& c : {c1, c2}) {
      if (distance_to_segment(c, {a, b}) <= tol && (c - a).norm() > tol && (c - b).norm() > tol) {
        inserts.emplace_back((c - a).norm(), c);
      }
    }
    std::sort(inserts.begin(), inserts.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [t, c] : inserts) ring.push_back(c);
  }
  std::vector<Vec2> bumped;
  bool skipping = false;
  for (const Vec2& p : ring) {
    if ((p - c1).norm() <= tol) {
      bumped.push_back(c1);
      bumped.push_back(c4);
      bumped.push_back(c3);
      bumped.push_back(c2);
      skipping = true;
      continue;
    }
    if ((p - c2).norm() <= tol) {
      skipping = false;
      continue;
    }
    if (!skipping) bumped.push_back(p);
  }
  if (skipping) {
    // c2 preceded c1 cyclically: drop leading points up to c2.
    std::vector<Vec2> fixed;
    bool after = false;
    for (const Vec2& p : bumped) {
      if (!after && (p - c2).norm() > tol && (p - c1).norm() > tol) {
        continue;
      }
      after = true;
      fixed.push_back(p);
    }
    bumped = fixed;
  }

  auto index_of = [&](const Vec2& p) {
    for (std::size_t i = 0; i < spec.vertices.size(); ++i) {
      if ((spec.vertices[i] - p).norm() <= tol) return static_cast<int>(i);
    }
    spec.vertices.push_back(p);
    return static_cast<int>(spec.vertices.size() - 1);
  };
  for (const Vec2& p : bumped) spec.outer.push_back(index_of(p));
  const int i1 = index_of(c1), i2 = index_of(c2), i3 = index_of(c3), i4 = index_of(c4);
  spec.subdomains.push_back({i1, i2, i3, i4});
  for (std::size_t i = 0; i < spec.outer.size(); ++i) {
    if (spec.outer[i] == i4 && spec.outer[(i + 1) % spec.outer.size()] == i3) {
      spec.sigma_edges = {static_cast<int>(i)};
    }
  }
  if (spec.sigma_edges.empty()) throw GeometryError("failed to glue D_0 onto Sigma_1");

  AugmentedDomain aug{DomainPartition::build(spec), partition.num_subdomains() + 1,
                      Segment{c1, c2}, out_n, depth};
  return aug;
}

}  // namespace calderon
