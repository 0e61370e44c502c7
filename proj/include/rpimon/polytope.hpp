#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace rpimon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Global geometric tolerance used for LP feasibility, redundancy and
// emptiness. Defaults to 1e-7; the RPIMON_TOL environment variable overrides.
double default_tol();

// Radius at which the Chebyshev LP is clamped for unbounded polytopes.
inline constexpr double kRadiusClamp = 1e6;

// Closed convex polyhedron {x : A x <= b}. Rows are normalized to unit length
// at construction; zero rows are dropped (or turn the set into the canonical
// empty polytope when the offset is negative). Zero rows encode the universe.
class HPolytope {
 public:
  HPolytope() = default;
  explicit HPolytope(int dim);
  HPolytope(Mat A, Vec b);

  static HPolytope box(const Vec& lo, const Vec& hi);
  static HPolytope empty(int dim);

  int dim() const { return dim_; }
  int rows() const { return static_cast<int>(A_.rows()); }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }
  bool is_universe() const { return A_.rows() == 0; }

  // Row-concatenation without redundancy removal.
  HPolytope stacked(const HPolytope& other) const;
  HPolytope with_row(const Vec& a, double offset) const;

  bool operator==(const HPolytope& o) const {
    return dim_ == o.dim_ && A_ == o.A_ && b_ == o.b_;
  }

 private:
  Mat A_;
  Vec b_;
  int dim_ = 0;
};

// Finite union of polytopes of a common dimension. No parts = empty set.
class PolyUnion {
 public:
  PolyUnion() = default;
  explicit PolyUnion(int dim) : dim_(dim) {}
  PolyUnion(int dim, std::vector<HPolytope> parts);
  explicit PolyUnion(HPolytope p);

  int dim() const { return dim_; }
  const std::vector<HPolytope>& parts() const { return parts_; }
  std::size_t size() const { return parts_.size(); }
  bool no_parts() const { return parts_.empty(); }
  std::size_t facet_count() const;

  void add(HPolytope p);
  void append(const PolyUnion& other);

 private:
  int dim_ = 0;
  std::vector<HPolytope> parts_;
};

struct ChebyshevBall {
  Vec center;
  double radius = 0.0;  // negative when infeasible (depth of violation)
};

struct Membership {
  bool inside = false;
  double margin = 0.0;  // max over parts of min normalized facet slack
};

struct Box {
  Vec lo;
  Vec hi;
  bool overlaps(const Box& o, double tol) const;
  bool contains(const Box& o, double tol) const;
  bool contains(const Vec& p, double tol) const;
};

// --- core operations -------------------------------------------------------

Membership contains(const HPolytope& P, const Vec& point, double tol);
Membership contains(const PolyUnion& P, const Vec& point, double tol);

ChebyshevBall chebyshev_ball(const HPolytope& P);
bool is_empty(const HPolytope& P, double tol);
bool is_empty(const PolyUnion& P, double tol);

// Support function max_{x in P} d^T x; +inf when unbounded, -inf when empty.
double support(const HPolytope& P, const Vec& direction);
Box bounding_box(const HPolytope& P);

HPolytope reduce(const HPolytope& P, double tol);
HPolytope intersect(const HPolytope& P, const HPolytope& Q);
HPolytope affine_preimage(const HPolytope& P, const Mat& M, const Vec& c);
HPolytope robust_eliminate(const HPolytope& P, std::span<const int> elim_dims,
                           const HPolytope& U);
HPolytope project_out(const HPolytope& P, std::span<const int> elim_dims);

// P ⊆ Q within tol (every facet of Q supports P at most tol outside).
bool is_subset(const HPolytope& P, const HPolytope& Q, double tol);

PolyUnion region_diff(const HPolytope& A, const PolyUnion& B, double tol);
PolyUnion region_diff(const PolyUnion& A, const PolyUnion& B, double tol);
PolyUnion region_diff(const PolyUnion& A, const PolyUnion& B);
bool union_subset(const PolyUnion& A, const PolyUnion& B, double tol);

// --- structural helpers ----------------------------------------------------

// Places P into a space of dimension `new_dim`; coordinate i of P becomes
// coordinate coord_map[i]. Unmapped coordinates are unconstrained.
HPolytope embed(const HPolytope& P, int new_dim, std::span<const int> coord_map);
HPolytope product(const HPolytope& P, const HPolytope& Q);

// Drops parts with Chebyshev radius below tol and parts contained in another
// part. The order of surviving parts is preserved.
PolyUnion prune(const PolyUnion& U, double tol);
PolyUnion intersect(const PolyUnion& A, const PolyUnion& B, double tol);
PolyUnion embed(const PolyUnion& U, int new_dim, std::span<const int> coord_map);

// Vertex count by combinatorial enumeration; diagnostics only.
std::size_t count_vertices(const HPolytope& P, double tol);

// --- serialization ---------------------------------------------------------

nlohmann::json to_json(const PolyUnion& U);
nlohmann::json to_json(const HPolytope& P);
PolyUnion poly_union_from_json(const nlohmann::json& j);
HPolytope polytope_from_json(const nlohmann::json& j, int dim_hint = -1);

}  // namespace rpimon
