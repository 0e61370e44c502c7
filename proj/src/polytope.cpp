#include "rpimon/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rpimon/lp.hpp"

namespace rpimon {
namespace {

constexpr double kZeroRow = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_dim(int a, int b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// Chebyshev LP: maximize r s.t. a_j^T x + r <= b_j (unit rows), r <= clamp.
ChebyshevBall chebyshev_impl(const Mat& A, const Vec& b, int dim) {
  const int m = static_cast<int>(A.rows());
  Mat L(m + 1, dim + 1);
  Vec rhs(m + 1);
  L.setZero();
  if (m > 0) {
    L.topLeftCorner(m, dim) = A;
    L.block(0, dim, m, 1).setOnes();
    rhs.head(m) = b;
  }
  L(m, dim) = 1.0;
  rhs[m] = kRadiusClamp;
  Vec c = Vec::Zero(dim + 1);
  c[dim] = 1.0;
  const lp::Result r = lp::maximize(L, rhs, c);
  ChebyshevBall ball;
  if (r.status != lp::Status::optimal) {
    // Cannot happen for this LP (always feasible, bounded by the clamp);
    // treat as empty to stay conservative.
    ball.center = Vec::Zero(dim);
    ball.radius = -kInf;
    return ball;
  }
  ball.center = r.x.head(dim);
  ball.radius = r.x[dim];
  return ball;
}

struct Indexed {
  HPolytope poly;
  Box box;
};

Indexed indexed(HPolytope p) {
  Box bb = bounding_box(p);
  return {std::move(p), std::move(bb)};
}

// Pieces of p \ b in the standard recursive-splitting form: facets of b are
// processed in row order, each piece is p ∩ {previous facets hold} ∩ {facet j
// reversed}. Thin pieces (radius < tol) are dropped.
void diff_one(const Indexed& p, const Indexed& b, double tol,
              std::vector<Indexed>& out) {
  if (!p.box.overlaps(b.box, tol)) {
    out.push_back(p);
    return;
  }
  const HPolytope both = p.poly.stacked(b.poly);
  if (chebyshev_ball(both).radius < tol) {
    out.push_back(p);
    return;
  }
  HPolytope rest = p.poly;
  const Mat& A = b.poly.A();
  const Vec& bb = b.poly.b();
  for (int j = 0; j < A.rows(); ++j) {
    const Vec a = A.row(j).transpose();
    const double s = support(rest, a);
    if (s <= bb[j] + tol) continue;
    HPolytope piece = rest.with_row(-a, -bb[j]);
    if (chebyshev_ball(piece).radius >= tol) out.push_back(indexed(reduce(piece, tol)));
    rest = rest.with_row(a, bb[j]);
    if (chebyshev_ball(rest).radius < tol) return;
  }
}

}  // namespace

double default_tol() {
  static const double tol = [] {
    if (const char* env = std::getenv("RPIMON_TOL")) {
      char* end = nullptr;
      const double v = std::strtod(env, &end);
      if (end != env && v > 0.0 && std::isfinite(v)) return v;
    }
    return 1e-7;
  }();
  return tol;
}

// --- HPolytope -------------------------------------------------------------

HPolytope::HPolytope(int dim) : A_(0, dim), b_(0), dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("HPolytope: dimension must be positive");
}

HPolytope::HPolytope(Mat A, Vec b) : dim_(static_cast<int>(A.cols())) {
  if (A.rows() != b.size()) throw std::invalid_argument("HPolytope: A/b row mismatch");
  if (dim_ <= 0) throw std::invalid_argument("HPolytope: dimension must be positive");
  if (!A.allFinite() || !b.allFinite())
    throw std::invalid_argument("HPolytope: non-finite entry");
  std::vector<int> keep;
  keep.reserve(A.rows());
  bool infeasible = false;
  for (int i = 0; i < A.rows(); ++i) {
    const double n = A.row(i).norm();
    if (n < kZeroRow) {
      if (b[i] < -kZeroRow) infeasible = true;
      continue;
    }
    if (std::abs(n - 1.0) > 4e-16) {
      A.row(i) /= n;
      b[i] /= n;
    }
    keep.push_back(i);
  }
  if (infeasible) {
    *this = empty(dim_);
    return;
  }
  A_.resize(static_cast<Eigen::Index>(keep.size()), dim_);
  b_.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    A_.row(static_cast<Eigen::Index>(k)) = A.row(keep[k]);
    b_[static_cast<Eigen::Index>(k)] = b[keep[k]];
  }
}

HPolytope HPolytope::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw std::invalid_argument("box: bad bounds");
  const int d = static_cast<int>(lo.size());
  Mat A = Mat::Zero(2 * d, d);
  Vec b(2 * d);
  for (int i = 0; i < d; ++i) {
    A(2 * i, i) = -1.0;
    b[2 * i] = -lo[i];
    A(2 * i + 1, i) = 1.0;
    b[2 * i + 1] = hi[i];
  }
  return HPolytope(std::move(A), std::move(b));
}

HPolytope HPolytope::empty(int dim) {
  HPolytope p(dim);
  p.A_ = Mat::Zero(2, dim);
  p.A_(0, 0) = 1.0;
  p.A_(1, 0) = -1.0;
  p.b_ = Vec::Constant(2, -1.0);
  return p;
}

HPolytope HPolytope::stacked(const HPolytope& other) const {
  require_same_dim(dim_, other.dim_, "stacked");
  HPolytope r(dim_);
  r.A_.resize(A_.rows() + other.A_.rows(), dim_);
  r.A_ << A_, other.A_;
  r.b_.resize(b_.size() + other.b_.size());
  r.b_ << b_, other.b_;
  return r;
}

HPolytope HPolytope::with_row(const Vec& a, double offset) const {
  Mat A(1, dim_);
  A.row(0) = a.transpose();
  Vec b(1);
  b[0] = offset;
  return stacked(HPolytope(std::move(A), std::move(b)));
}

// --- PolyUnion -------------------------------------------------------------

PolyUnion::PolyUnion(int dim, std::vector<HPolytope> parts)
    : dim_(dim), parts_(std::move(parts)) {
  for (const auto& p : parts_) require_same_dim(dim_, p.dim(), "PolyUnion");
}

PolyUnion::PolyUnion(HPolytope p) : dim_(p.dim()) { parts_.push_back(std::move(p)); }

std::size_t PolyUnion::facet_count() const {
  std::size_t n = 0;
  for (const auto& p : parts_) n += static_cast<std::size_t>(p.rows());
  return n;
}

void PolyUnion::add(HPolytope p) {
  require_same_dim(dim_, p.dim(), "PolyUnion::add");
  parts_.push_back(std::move(p));
}

void PolyUnion::append(const PolyUnion& other) {
  require_same_dim(dim_, other.dim_, "PolyUnion::append");
  parts_.insert(parts_.end(), other.parts_.begin(), other.parts_.end());
}

// --- Box -------------------------------------------------------------------

bool Box::overlaps(const Box& o, double tol) const {
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (lo[i] > o.hi[i] + tol || o.lo[i] > hi[i] + tol) return false;
  return true;
}

bool Box::contains(const Box& o, double tol) const {
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (o.lo[i] < lo[i] - tol || o.hi[i] > hi[i] + tol) return false;
  return true;
}

bool Box::contains(const Vec& p, double tol) const {
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
  return true;
}

// --- queries ---------------------------------------------------------------

Membership contains(const HPolytope& P, const Vec& point, double tol) {
  require_same_dim(P.dim(), static_cast<int>(point.size()), "contains");
  if (P.is_universe()) return {true, kInf};
  const double margin = (P.b() - P.A() * point).minCoeff();
  return {margin >= -tol, margin};
}

Membership contains(const PolyUnion& P, const Vec& point, double tol) {
  require_same_dim(P.dim(), static_cast<int>(point.size()), "contains");
  Membership best{false, -kInf};
  for (const auto& part : P.parts()) {
    const Membership m = contains(part, point, tol);
    if (m.margin > best.margin) best.margin = m.margin;
  }
  best.inside = !P.no_parts() && best.margin >= -tol;
  return best;
}

ChebyshevBall chebyshev_ball(const HPolytope& P) {
  return chebyshev_impl(P.A(), P.b(), P.dim());
}

bool is_empty(const HPolytope& P, double tol) {
  if (P.is_universe()) return false;
  return chebyshev_ball(P).radius < tol;
}

bool is_empty(const PolyUnion& P, double tol) {
  return std::all_of(P.parts().begin(), P.parts().end(),
                     [tol](const HPolytope& p) { return is_empty(p, tol); });
}

double support(const HPolytope& P, const Vec& direction) {
  require_same_dim(P.dim(), static_cast<int>(direction.size()), "support");
  const lp::Result r = lp::maximize(P.A(), P.b(), direction);
  switch (r.status) {
    case lp::Status::optimal: return r.value;
    case lp::Status::unbounded: return kInf;
    case lp::Status::infeasible: return -kInf;
  }
  return -kInf;
}

Box bounding_box(const HPolytope& P) {
  const int d = P.dim();
  Box bb{Vec(d), Vec(d)};
  for (int i = 0; i < d; ++i) {
    Vec e = Vec::Zero(d);
    e[i] = 1.0;
    bb.hi[i] = support(P, e);
    e[i] = -1.0;
    bb.lo[i] = -support(P, e);
  }
  return bb;
}

// --- reductions and constructions -----------------------------------------

HPolytope reduce(const HPolytope& P, double tol) {
  if (P.is_universe()) return P;
  const int d = P.dim();
  if (chebyshev_ball(P).radius < -tol) return HPolytope::empty(d);

  const Mat& A = P.A();
  const Vec& b = P.b();
  const int m = P.rows();
  std::vector<char> alive(m, 1);
  // Parallel duplicates: keep the tightest offset (first on ties).
  for (int i = 0; i < m; ++i) {
    if (!alive[i]) continue;
    for (int j = i + 1; j < m; ++j) {
      if (!alive[j]) continue;
      if ((A.row(i) - A.row(j)).lpNorm<Eigen::Infinity>() < 1e-12) {
        if (b[j] < b[i]) {
          alive[i] = 0;
          break;
        }
        alive[j] = 0;
      }
    }
  }
  std::vector<int> idx;
  for (int i = 0; i < m; ++i)
    if (alive[i]) idx.push_back(i);

  // Redundancy LPs: row j is dropped if the remaining rows (with row j relaxed
  // by one unit to keep the LP bounded) already imply it within tol.
  for (std::size_t k = 0; k < idx.size();) {
    if (idx.size() == 1) break;
    const int j = idx[k];
    Mat L(static_cast<Eigen::Index>(idx.size()), d);
    Vec r(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t q = 0; q < idx.size(); ++q) {
      L.row(static_cast<Eigen::Index>(q)) = A.row(idx[q]);
      r[static_cast<Eigen::Index>(q)] = b[idx[q]] + (q == k ? 1.0 : 0.0);
    }
    const lp::Result res = lp::maximize(L, r, A.row(j).transpose());
    if (res.status == lp::Status::optimal && res.value <= b[j] + tol) {
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      ++k;
    }
  }
  Mat Ar(static_cast<Eigen::Index>(idx.size()), d);
  Vec br(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t q = 0; q < idx.size(); ++q) {
    Ar.row(static_cast<Eigen::Index>(q)) = A.row(idx[q]);
    br[static_cast<Eigen::Index>(q)] = b[idx[q]];
  }
  if (idx.empty()) return HPolytope(d);
  return HPolytope(std::move(Ar), std::move(br));
}

HPolytope intersect(const HPolytope& P, const HPolytope& Q) {
  return reduce(P.stacked(Q), default_tol());
}

HPolytope affine_preimage(const HPolytope& P, const Mat& M, const Vec& c) {
  if (M.rows() != P.dim() || c.size() != P.dim())
    throw std::invalid_argument("affine_preimage: dimension mismatch");
  if (P.is_universe()) return HPolytope(static_cast<int>(M.cols()));
  return reduce(HPolytope(P.A() * M, P.b() - P.A() * c), default_tol());
}

HPolytope robust_eliminate(const HPolytope& P, std::span<const int> elim_dims,
                           const HPolytope& U) {
  const int d = P.dim();
  const int e = static_cast<int>(elim_dims.size());
  if (U.dim() != e) throw std::invalid_argument("robust_eliminate: U dimension mismatch");
  std::vector<char> is_elim(d, 0);
  for (int k : elim_dims) {
    if (k < 0 || k >= d) throw std::invalid_argument("robust_eliminate: bad elim dim");
    is_elim[k] = 1;
  }
  std::vector<int> keep;
  for (int i = 0; i < d; ++i)
    if (!is_elim[i]) keep.push_back(i);
  if (keep.empty()) throw std::invalid_argument("robust_eliminate: nothing kept");
  const Box ub = bounding_box(U);
  if (!ub.lo.allFinite() || !ub.hi.allFinite())
    throw std::invalid_argument("robust_eliminate: U must be bounded and nonempty");

  const int kd = static_cast<int>(keep.size());
  Mat A(P.rows(), kd);
  Vec b(P.rows());
  for (int j = 0; j < P.rows(); ++j) {
    Vec ae(e);
    for (int q = 0; q < e; ++q) ae[q] = P.A()(j, elim_dims[q]);
    const double h = ae.lpNorm<Eigen::Infinity>() < kZeroRow ? 0.0 : support(U, ae);
    for (int q = 0; q < kd; ++q) A(j, q) = P.A()(j, keep[q]);
    b[j] = P.b()[j] - h;
  }
  return reduce(HPolytope(std::move(A), std::move(b)), default_tol());
}

HPolytope project_out(const HPolytope& P, std::span<const int> elim_dims) {
  const double tol = default_tol();
  std::vector<int> dims(elim_dims.begin(), elim_dims.end());
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  for (int k : dims)
    if (k < 0 || k >= P.dim()) throw std::invalid_argument("project_out: bad dim");
  if (static_cast<int>(dims.size()) >= P.dim())
    throw std::invalid_argument("project_out: nothing kept");

  HPolytope cur = reduce(P, tol);
  for (auto it = dims.rbegin(); it != dims.rend(); ++it) {
    const int k = *it;
    const int d = cur.dim();
    if (cur.is_universe()) {
      cur = HPolytope(d - 1);
      continue;
    }
    const Mat& A = cur.A();
    const Vec& b = cur.b();
    std::vector<int> pos, neg, zero;
    for (int i = 0; i < A.rows(); ++i) {
      if (A(i, k) > kZeroRow) pos.push_back(i);
      else if (A(i, k) < -kZeroRow) neg.push_back(i);
      else zero.push_back(i);
    }
    const std::size_t rows = zero.size() + pos.size() * neg.size();
    Mat An(static_cast<Eigen::Index>(rows), d);
    Vec bn(static_cast<Eigen::Index>(rows));
    Eigen::Index r = 0;
    for (int i : zero) {
      An.row(r) = A.row(i);
      bn[r++] = b[i];
    }
    for (int p : pos) {
      for (int n : neg) {
        const double wp = -A(n, k);
        const double wn = A(p, k);
        An.row(r) = wp * A.row(p) + wn * A.row(n);
        bn[r++] = wp * b[p] + wn * b[n];
      }
    }
    Mat Ad(rows, d - 1);
    if (k > 0) Ad.leftCols(k) = An.leftCols(k);
    if (k < d - 1) Ad.rightCols(d - 1 - k) = An.rightCols(d - 1 - k);
    if (rows == 0) {
      cur = HPolytope(d - 1);
    } else {
      cur = reduce(HPolytope(std::move(Ad), std::move(bn)), tol);
    }
  }
  return cur;
}

bool is_subset(const HPolytope& P, const HPolytope& Q, double tol) {
  require_same_dim(P.dim(), Q.dim(), "is_subset");
  if (Q.is_universe()) return true;
  if (chebyshev_ball(P).radius < -tol) return true;
  for (int j = 0; j < Q.rows(); ++j) {
    if (support(P, Q.A().row(j).transpose()) > Q.b()[j] + tol) return false;
  }
  return true;
}

PolyUnion region_diff(const HPolytope& A, const PolyUnion& B, double tol) {
  require_same_dim(A.dim(), B.dim(), "region_diff");
  PolyUnion out(A.dim());
  if (chebyshev_ball(A).radius < tol) return out;
  std::vector<Indexed> bs;
  bs.reserve(B.size());
  for (const auto& q : B.parts()) {
    if (chebyshev_ball(q).radius < tol) continue;
    bs.push_back(indexed(q));
  }
  std::vector<Indexed> cur{indexed(A)};
  for (const auto& q : bs) {
    std::vector<Indexed> next;
    for (const auto& piece : cur) diff_one(piece, q, tol, next);
    cur.swap(next);
    if (cur.empty()) break;
  }
  for (auto& piece : cur) out.add(std::move(piece.poly));
  return out;
}

PolyUnion region_diff(const PolyUnion& A, const PolyUnion& B, double tol) {
  require_same_dim(A.dim(), B.dim(), "region_diff");
  PolyUnion out(A.dim());
  for (const auto& a : A.parts()) out.append(region_diff(a, B, tol));
  return out;
}

PolyUnion region_diff(const PolyUnion& A, const PolyUnion& B) {
  return region_diff(A, B, default_tol());
}

bool union_subset(const PolyUnion& A, const PolyUnion& B, double tol) {
  require_same_dim(A.dim(), B.dim(), "union_subset");
  std::vector<Indexed> bs;
  for (const auto& q : B.parts()) bs.push_back(indexed(q));
  for (const auto& a : A.parts()) {
    if (chebyshev_ball(a).radius < tol) continue;
    const Box abox = bounding_box(a);
    bool covered = false;
    for (const auto& q : bs) {
      if (q.box.contains(abox, tol) && is_subset(a, q.poly, tol)) {
        covered = true;
        break;
      }
    }
    if (covered) continue;
    if (region_diff(a, B, tol).size() > 0) return false;
  }
  return true;
}

HPolytope embed(const HPolytope& P, int new_dim, std::span<const int> coord_map) {
  if (static_cast<int>(coord_map.size()) != P.dim())
    throw std::invalid_argument("embed: coordinate map size mismatch");
  if (P.is_universe()) return HPolytope(new_dim);
  Mat A = Mat::Zero(P.rows(), new_dim);
  for (int i = 0; i < P.dim(); ++i) {
    if (coord_map[i] < 0 || coord_map[i] >= new_dim)
      throw std::invalid_argument("embed: coordinate out of range");
    A.col(coord_map[i]) = P.A().col(i);
  }
  return HPolytope(std::move(A), P.b());
}

HPolytope product(const HPolytope& P, const HPolytope& Q) {
  const int d = P.dim() + Q.dim();
  std::vector<int> mp(P.dim()), mq(Q.dim());
  std::iota(mp.begin(), mp.end(), 0);
  std::iota(mq.begin(), mq.end(), P.dim());
  return embed(P, d, mp).stacked(embed(Q, d, mq));
}

PolyUnion prune(const PolyUnion& U, double tol) {
  std::vector<Indexed> parts;
  for (const auto& p : U.parts()) {
    if (chebyshev_ball(p).radius < tol) continue;
    parts.push_back(indexed(p));
  }
  const std::size_t n = parts.size();
  std::vector<char> dead(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || dead[j]) continue;
      if (!parts[j].box.contains(parts[i].box, tol)) continue;
      if (!is_subset(parts[i].poly, parts[j].poly, tol)) continue;
      // Mutual containment keeps the earlier part.
      if (j > i && parts[i].box.contains(parts[j].box, tol) &&
          is_subset(parts[j].poly, parts[i].poly, tol))
        continue;
      dead[i] = 1;
      break;
    }
  }
  PolyUnion out(U.dim());
  for (std::size_t i = 0; i < n; ++i)
    if (!dead[i]) out.add(std::move(parts[i].poly));
  return out;
}

PolyUnion intersect(const PolyUnion& A, const PolyUnion& B, double tol) {
  require_same_dim(A.dim(), B.dim(), "intersect");
  std::vector<Indexed> bs;
  for (const auto& q : B.parts()) bs.push_back(indexed(q));
  PolyUnion out(A.dim());
  for (const auto& a : A.parts()) {
    const Indexed ia = indexed(a);
    bool whole = false;
    for (const auto& q : bs) {
      if (q.box.contains(ia.box, tol) && is_subset(a, q.poly, tol)) {
        whole = true;
        break;
      }
    }
    if (whole) {
      out.add(a);
      continue;
    }
    for (const auto& q : bs) {
      if (!ia.box.overlaps(q.box, tol)) continue;
      HPolytope both = a.stacked(q.poly);
      if (chebyshev_ball(both).radius < tol) continue;
      out.add(reduce(both, tol));
    }
  }
  return prune(out, tol);
}

PolyUnion embed(const PolyUnion& U, int new_dim, std::span<const int> coord_map) {
  PolyUnion out(new_dim);
  for (const auto& p : U.parts()) out.add(embed(p, new_dim, coord_map));
  return out;
}

std::size_t count_vertices(const HPolytope& P, double tol) {
  const int d = P.dim();
  const int m = P.rows();
  if (m < d) return 0;
  std::vector<Vec> verts;
  std::vector<int> pick(d);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    Mat S(d, d);
    Vec r(d);
    for (int i = 0; i < d; ++i) {
      S.row(i) = P.A().row(pick[i]);
      r[i] = P.b()[pick[i]];
    }
    Eigen::FullPivLU<Mat> lu(S);
    if (lu.rank() == d) {
      const Vec v = lu.solve(r);
      if (((P.A() * v) - P.b()).maxCoeff() <= tol) {
        const bool dup = std::any_of(verts.begin(), verts.end(), [&](const Vec& w) {
          return (w - v).lpNorm<Eigen::Infinity>() <= 1e3 * tol;
        });
        if (!dup) verts.push_back(v);
      }
    }
    int i = d - 1;
    while (i >= 0 && pick[i] == m - d + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int q = i + 1; q < d; ++q) pick[q] = pick[q - 1] + 1;
  }
  return verts.size();
}

}  // namespace rpimon
