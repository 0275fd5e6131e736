#include "pinn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pinn/errors.hpp"
#include "pinn/rng.hpp"

namespace pinn::geom {

double radical_inverse(std::uint64_t index, unsigned base,
                       std::span<const unsigned> perm) {
  if (base < 2) throw std::invalid_argument("radical_inverse: base must be >= 2");
  if (!perm.empty() && perm.size() != base)
    throw std::invalid_argument("radical_inverse: permutation size != base");
  // Reverse the digits into one integer and divide once, so the result is the
  // correctly rounded value of the exact fraction (summing rounded powers of
  // 1/base drifts by an ulp for non-dyadic bases).
  std::uint64_t num = 0, den = 1;
  while (index > 0) {
    unsigned d = static_cast<unsigned>(index % base);
    if (!perm.empty()) d = perm[d];
    num = num * base + d;
    den *= base;
    index /= base;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double halton(std::uint64_t index, unsigned base) {
  return radical_inverse(index, base);
}

std::vector<unsigned> scramble_permutation(unsigned base, std::uint64_t seed) {
  std::vector<unsigned> perm(base);
  std::iota(perm.begin(), perm.end(), 0u);
  if (seed == 0 || base < 3) return perm;
  std::mt19937_64 gen(derive_seed(seed, base));
  // Fisher-Yates over {1..base-1}; 0 stays fixed.
  for (unsigned i = base - 1; i > 1; --i) {
    unsigned j = 1 + static_cast<unsigned>(gen() % i);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

Generator generator_from_string(const std::string& name) {
  if (name == "halton") return Generator::kHalton;
  if (name == "uniform-random") return Generator::kUniformRandom;
  throw ConfigError("unknown point generator '" + name +
                    "' (expected halton or uniform-random)");
}

std::string to_string(Generator g) {
  return g == Generator::kHalton ? "halton" : "uniform-random";
}

double BoundarySegment::length() const {
  if (kind == Kind::kLine)
    return std::hypot(b[0] - a[0], b[1] - a[1]);
  return radius * (ang1 - ang0);
}

std::array<double, 2> BoundarySegment::point_at(double u) const {
  if (kind == Kind::kLine)
    return {a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])};
  const double ang = ang0 + u * (ang1 - ang0);
  return {center[0] + radius * std::cos(ang),
          center[1] + radius * std::sin(ang)};
}

namespace {

std::vector<BoundarySegment> box_edges(double x0, double x1, double y0,
                                       double y1) {
  std::vector<BoundarySegment> s(4);
  s[0].name = "bottom-edge";
  s[0].a = {x0, y0};
  s[0].b = {x1, y0};
  s[1].name = "right-edge";
  s[1].a = {x1, y0};
  s[1].b = {x1, y1};
  s[2].name = "top-edge";
  s[2].a = {x1, y1};
  s[2].b = {x0, y1};
  s[3].name = "left-edge";
  s[3].a = {x0, y1};
  s[3].b = {x0, y0};
  return s;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Domain Domain::rectangle(double x0, double x1, double y0, double y1) {
  if (!(x0 < x1 && y0 < y1))
    throw std::invalid_argument("rectangle: empty extent");
  Domain d;
  d.kind_ = Kind::kRectangle;
  d.bbox_ = {x0, x1, y0, y1};
  d.segments_ = box_edges(x0, x1, y0, y1);
  return d;
}

Domain Domain::rectangle_with_holes(double x0, double x1, double y0, double y1,
                                    std::vector<Circle> holes) {
  Domain d = rectangle(x0, x1, y0, y1);
  d.holes_ = std::move(holes);
  for (std::size_t k = 0; k < d.holes_.size(); ++k) {
    BoundarySegment s;
    s.name = "hole-" + std::to_string(k + 1);
    s.kind = BoundarySegment::Kind::kArc;
    s.center = {d.holes_[k].cx, d.holes_[k].cy};
    s.radius = d.holes_[k].r;
    s.ang0 = 0.0;
    s.ang1 = kTwoPi;
    d.segments_.push_back(std::move(s));
  }
  return d;
}

Domain Domain::polygon(std::vector<std::array<double, 2>> vertices,
                       std::vector<Circle> holes) {
  if (vertices.size() < 3)
    throw std::invalid_argument("polygon: needs at least 3 vertices");
  Domain d;
  d.kind_ = Kind::kPolygon;
  d.vertices_ = std::move(vertices);
  d.holes_ = std::move(holes);
  double x0 = d.vertices_[0][0], x1 = x0, y0 = d.vertices_[0][1], y1 = y0;
  for (const auto& v : d.vertices_) {
    x0 = std::min(x0, v[0]);
    x1 = std::max(x1, v[0]);
    y0 = std::min(y0, v[1]);
    y1 = std::max(y1, v[1]);
  }
  d.bbox_ = {x0, x1, y0, y1};
  for (std::size_t i = 0; i < d.vertices_.size(); ++i) {
    BoundarySegment s;
    s.name = "boundary";
    s.a = d.vertices_[i];
    s.b = d.vertices_[(i + 1) % d.vertices_.size()];
    d.segments_.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < d.holes_.size(); ++k) {
    BoundarySegment s;
    s.name = "hole-" + std::to_string(k + 1);
    s.kind = BoundarySegment::Kind::kArc;
    s.center = {d.holes_[k].cx, d.holes_[k].cy};
    s.radius = d.holes_[k].r;
    s.ang0 = 0.0;
    s.ang1 = kTwoPi;
    d.segments_.push_back(std::move(s));
  }
  return d;
}

Domain Domain::space_time_box() {
  Domain d;
  d.kind_ = Kind::kSpaceTimeBox;
  d.bbox_ = {0.0, 1.0, 0.0, 1.0};
  d.segments_.resize(3);
  d.segments_[0].name = "initial";  // t = 0
  d.segments_[0].a = {0.0, 0.0};
  d.segments_[0].b = {0.0, 1.0};
  d.segments_[1].name = "left";  // x = 0
  d.segments_[1].a = {0.0, 0.0};
  d.segments_[1].b = {1.0, 0.0};
  d.segments_[2].name = "right";  // x = 1
  d.segments_[2].a = {0.0, 1.0};
  d.segments_[2].b = {1.0, 1.0};
  return d;
}

bool Domain::contains(double x, double y) const {
  if (x < bbox_[0] || x > bbox_[1] || y < bbox_[2] || y > bbox_[3])
    return false;
  if (kind_ == Kind::kPolygon) {
    bool inside = false;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const double yi = vertices_[i][1], yj = vertices_[j][1];
      if ((yi > y) != (yj > y)) {
        const double xi = vertices_[i][0], xj = vertices_[j][0];
        const double xint = xi + (y - yi) * (xj - xi) / (yj - yi);
        if (x < xint) inside = !inside;
      }
    }
    if (!inside) return false;
  }
  for (const Circle& h : holes_) {
    const double dx = x - h.cx, dy = y - h.cy;
    if (dx * dx + dy * dy < h.r * h.r) return false;
  }
  return true;
}

Domain load_polygon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open geometry file: " + path);
  std::vector<std::array<double, 2>> verts;
  std::vector<Circle> holes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;  // blank
    auto fail = [&](const std::string& msg) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (first == "hole") {
      Circle c;
      if (!(ls >> c.cx >> c.cy >> c.r) || c.r <= 0.0)
        fail("expected 'hole cx cy r' with r > 0");
      holes.push_back(c);
    } else {
      std::array<double, 2> v;
      std::istringstream vs(line);
      if (!(vs >> v[0] >> v[1])) fail("expected 'x y' vertex line");
      std::string extra;
      if (vs >> extra) fail("unexpected trailing token '" + extra + "'");
      verts.push_back(v);
    }
  }
  if (verts.size() < 3)
    throw ConfigError(path + ": polygon needs at least 3 vertices, found " +
                      std::to_string(verts.size()));
  return Domain::polygon(std::move(verts), std::move(holes));
}

InteriorSample sample_interior(const Domain& domain, std::size_t n,
                               Generator generator, std::uint64_t rng_seed,
                               std::uint64_t halton_start,
                               std::uint64_t scramble_seed) {
  const auto bb = domain.bbox();
  const double wx = bb[1] - bb[0];
  const double wy = bb[3] - bb[2];

  InteriorSample out;
  out.points.dim = 2;
  out.points.coords.reserve(2 * n);

  std::vector<unsigned> perm2, perm3;
  if (scramble_seed != 0) {
    perm2 = scramble_permutation(2, scramble_seed);
    perm3 = scramble_permutation(3, scramble_seed);
  }
  std::mt19937_64 gen(derive_seed(rng_seed, 0x1a7e51));

  std::uint64_t halton_index = halton_start;
  std::size_t accepted = 0;
  std::uint64_t candidates = 0;
  while (accepted < n) {
    double u, v;
    if (generator == Generator::kHalton) {
      u = radical_inverse(halton_index, 2, perm2);
      v = radical_inverse(halton_index, 3, perm3);
      ++halton_index;
    } else {
      u = uniform01(gen);
      v = uniform01(gen);
    }
    ++candidates;
    const double x = bb[0] + u * wx;
    const double y = bb[2] + v * wy;
    if (domain.contains(x, y)) {
      out.points.coords.push_back(x);
      out.points.coords.push_back(y);
      ++accepted;
    } else if (candidates >= 1000000 &&
               static_cast<double>(accepted) <
                   1e-4 * static_cast<double>(candidates)) {
      throw DegenerateDomainError(
          "sample_interior: acceptance rate below 1e-4 after " +
          std::to_string(candidates) + " candidates; domain is degenerate");
    }
  }
  out.next_halton_index = halton_index;
  return out;
}

PointSet sample_boundary(const Domain& domain, std::size_t n,
                         Generator generator, std::uint64_t rng_seed,
                         std::span<const std::string> filter) {
  const auto& all = domain.segments();
  std::vector<std::int32_t> selected;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (filter.empty() ||
        std::find(filter.begin(), filter.end(), all[i].name) != filter.end())
      selected.push_back(static_cast<std::int32_t>(i));
  }
  if (selected.empty())
    throw std::invalid_argument("sample_boundary: no segments selected");

  std::vector<double> cum(selected.size() + 1, 0.0);
  for (std::size_t i = 0; i < selected.size(); ++i)
    cum[i + 1] = cum[i] + all[selected[i]].length();
  const double total = cum.back();
  if (total <= 0.0)
    throw std::invalid_argument("sample_boundary: zero boundary length");

  PointSet out;
  out.dim = 2;
  out.coords.reserve(2 * n);
  out.segment_ids.reserve(n);
  std::mt19937_64 gen(derive_seed(rng_seed, 0xb0a2d));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = generator == Generator::kHalton
                         ? radical_inverse(i + 1, 2)
                         : uniform01(gen);
    const double target = u * total;
    // first segment whose cumulative end exceeds target
    std::size_t s =
        std::upper_bound(cum.begin() + 1, cum.end(), target) - cum.begin() - 1;
    if (s >= selected.size()) s = selected.size() - 1;
    const BoundarySegment& seg = all[selected[s]];
    const double t = (target - cum[s]) / seg.length();
    const auto p = seg.point_at(std::min(t, 1.0));
    out.coords.push_back(p[0]);
    out.coords.push_back(p[1]);
    out.segment_ids.push_back(selected[s]);
  }
  return out;
}

namespace {

inline double dist2(std::span<const double> p, const double* s,
                    std::size_t dim) {
  double d = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double t = p[k] - s[k];
    d += t * t;
  }
  return d;
}

struct KdTree {
  struct KdNode {
    double split = 0.0;
    std::int32_t axis = -1;  // -1 marks a leaf
    std::uint32_t lo = 0, hi = 0;  // leaf: index range; inner: child slots
  };

  const PointSet* seeds;
  std::vector<std::uint32_t> order;  // seed indices, partitioned recursively
  std::vector<KdNode> nodes;

  static constexpr std::size_t kLeafSize = 8;

  explicit KdTree(const PointSet& s) : seeds(&s) {
    order.resize(s.size());
    std::iota(order.begin(), order.end(), 0u);
    build(0, order.size());
  }

  std::uint32_t build(std::size_t lo, std::size_t hi) {
    const std::uint32_t slot = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();
    if (hi - lo <= kLeafSize) {
      nodes[slot].axis = -1;
      nodes[slot].lo = static_cast<std::uint32_t>(lo);
      nodes[slot].hi = static_cast<std::uint32_t>(hi);
      return slot;
    }
    // split along the axis with the widest spread
    const std::size_t dim = seeds->dim;
    int axis = 0;
    double best_spread = -1.0;
    for (std::size_t k = 0; k < dim; ++k) {
      double mn = seeds->point(order[lo])[k], mx = mn;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        const double v = seeds->point(order[i])[k];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      if (mx - mn > best_spread) {
        best_spread = mx - mn;
        axis = static_cast<int>(k);
      }
    }
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(order.begin() + lo, order.begin() + mid,
                     order.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return seeds->point(a)[axis] < seeds->point(b)[axis];
                     });
    const double split = seeds->point(order[mid])[axis];
    nodes[slot].axis = axis;
    nodes[slot].split = split;
    const std::uint32_t left = build(lo, mid);
    const std::uint32_t right = build(mid, hi);
    nodes[slot].lo = left;
    nodes[slot].hi = right;
    return slot;
  }

  void query(std::uint32_t slot, std::span<const double> p, double& best,
             std::uint32_t& best_idx) const {
    const KdNode& nd = nodes[slot];
    if (nd.axis < 0) {
      const std::size_t dim = seeds->dim;
      for (std::uint32_t i = nd.lo; i < nd.hi; ++i) {
        const std::uint32_t idx = order[i];
        const double d = dist2(p, seeds->coords.data() + idx * dim, dim);
        if (d < best || (d == best && idx < best_idx)) {
          best = d;
          best_idx = idx;
        }
      }
      return;
    }
    const double gap = p[nd.axis] - nd.split;
    const std::uint32_t near = gap <= 0.0 ? nd.lo : nd.hi;
    const std::uint32_t far = gap <= 0.0 ? nd.hi : nd.lo;
    query(near, p, best, best_idx);
    if (gap * gap <= best) query(far, p, best, best_idx);
  }
};

}  // namespace

std::vector<std::uint32_t> nearest_seed_brute(const PointSet& points,
                                              const PointSet& seeds) {
  if (points.dim != seeds.dim)
    throw std::invalid_argument("nearest_seed: dimension mismatch");
  if (seeds.size() == 0)
    throw std::invalid_argument("nearest_seed: empty seed set");
  const std::size_t dim = points.dim;
  std::vector<std::uint32_t> rho(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points.point(i);
    double best = dist2(p, seeds.coords.data(), dim);
    std::uint32_t best_idx = 0;
    for (std::uint32_t j = 1; j < seeds.size(); ++j) {
      const double d = dist2(p, seeds.coords.data() + j * dim, dim);
      if (d < best || (d == best && j < best_idx)) {
        best = d;
        best_idx = j;
      }
    }
    rho[i] = best_idx;
  }
  return rho;
}

std::vector<std::uint32_t> nearest_seed(const PointSet& points,
                                        const PointSet& seeds) {
  if (points.dim != seeds.dim)
    throw std::invalid_argument("nearest_seed: dimension mismatch");
  if (seeds.size() == 0)
    throw std::invalid_argument("nearest_seed: empty seed set");
  if (seeds.size() <= 2 * KdTree::kLeafSize)
    return nearest_seed_brute(points, seeds);
  KdTree tree(seeds);
  std::vector<std::uint32_t> rho(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_idx = 0xffffffffu;
    tree.query(0, points.point(i), best, best_idx);
    rho[i] = best_idx;
  }
  return rho;
}

}  // namespace pinn::geom
