#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pinn::geom {

// Radical inverse of index in the given base, optionally with a digit
// permutation (perm[d] in place of digit d). Sequences start at index 1;
// index 0 maps to 0.
double radical_inverse(std::uint64_t index, unsigned base,
                       std::span<const unsigned> perm = {});

double halton(std::uint64_t index, unsigned base);

// Digit permutation for a generalized Halton sequence: a seeded shuffle of
// {1..base-1} with 0 held fixed so finite digit expansions stay exact.
// seed 0 gives the identity permutation.
std::vector<unsigned> scramble_permutation(unsigned base, std::uint64_t seed);

enum class Generator { kHalton, kUniformRandom };

Generator generator_from_string(const std::string& name);
std::string to_string(Generator g);

struct PointSet {
  std::size_t dim = 0;
  std::vector<double> coords;  // row-major [size() x dim]
  std::vector<std::int32_t> segment_ids;  // filled by boundary sampling

  std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * dim, dim};
  }
};

struct Circle {
  double cx = 0, cy = 0, r = 0;
};

struct BoundarySegment {
  enum class Kind { kLine, kArc };
  std::string name;
  Kind kind = Kind::kLine;
  std::array<double, 2> a{}, b{};      // line endpoints
  std::array<double, 2> center{};      // arc
  double radius = 0, ang0 = 0, ang1 = 0;

  double length() const;
  std::array<double, 2> point_at(double u) const;  // arc-length parameter in [0,1)
};

// A 2D sampling domain: an axis-aligned box, a simple polygon, either of
// those minus circular holes, or the unit space-time box whose "boundary" is
// the set of condition-carrying faces (initial face t=0 plus the two spatial
// ends).
class Domain {
 public:
  static Domain rectangle(double x0, double x1, double y0, double y1);
  static Domain rectangle_with_holes(double x0, double x1, double y0,
                                     double y1, std::vector<Circle> holes);
  static Domain polygon(std::vector<std::array<double, 2>> vertices,
                        std::vector<Circle> holes = {});
  static Domain space_time_box();

  bool contains(double x, double y) const;
  // x0, x1, y0, y1
  std::array<double, 4> bbox() const { return bbox_; }
  const std::vector<BoundarySegment>& segments() const { return segments_; }
  const std::vector<Circle>& holes() const { return holes_; }

 private:
  enum class Kind { kRectangle, kPolygon, kSpaceTimeBox };
  Kind kind_ = Kind::kRectangle;
  std::array<double, 4> bbox_{};
  std::vector<std::array<double, 2>> vertices_;
  std::vector<Circle> holes_;
  std::vector<BoundarySegment> segments_;
};

// Reads a polygon domain: one "x y" vertex line per row (implicitly closed),
// plus optional "hole cx cy r" lines. '#' starts a comment.
Domain load_polygon(const std::string& path);

struct InteriorSample {
  PointSet points;
  std::uint64_t next_halton_index = 1;  // first unused index, for stream continuation
};

// n interior points by rejection inside the bounding box. Halton candidates
// use bases (2, 3) starting at halton_start with indices advancing across
// rejections; scramble_seed 0 means no digit scramble. Throws
// DegenerateDomainError when the acceptance rate stays below 1e-4 over 1e6
// candidates.
InteriorSample sample_interior(const Domain& domain, std::size_t n,
                               Generator generator, std::uint64_t rng_seed,
                               std::uint64_t halton_start = 1,
                               std::uint64_t scramble_seed = 0);

// n boundary points uniform in arc length across the selected segments (all
// segments when filter is empty; otherwise those whose name is in filter).
// kHalton places points by a base-2 radical inverse over total arc length.
PointSet sample_boundary(const Domain& domain, std::size_t n,
                         Generator generator, std::uint64_t rng_seed,
                         std::span<const std::string> filter = {});

// Index of the nearest seed (squared Euclidean distance) for every point,
// ties broken toward the lowest seed index. The tree-accelerated path and the
// brute-force path give identical results.
std::vector<std::uint32_t> nearest_seed(const PointSet& points,
                                        const PointSet& seeds);
std::vector<std::uint32_t> nearest_seed_brute(const PointSet& points,
                                              const PointSet& seeds);

}  // namespace pinn::geom
