#pragma once

// Randomized property checks for the geometry core. Each check returns the
// number of failing cases so both the unit suite and the acceptance runner
// can drive them with their own case counts.

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "rpimon/lp.hpp"
#include "rpimon/polytope.hpp"

namespace rpimon::props {

struct Outcome {
  int cases = 0;
  int failures = 0;
};

inline Vec random_vec(std::mt19937& rng, int d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

inline HPolytope random_box(std::mt19937& rng, int d) {
  Vec lo = random_vec(rng, d, -2.0, 1.0);
  Vec ext = random_vec(rng, d, 0.3, 2.0);
  return HPolytope::box(lo, lo + ext);
}

// Bounded polytope: a box cut by a few random halfspaces through points near
// its center, plus optional duplicated and dominated rows.
inline HPolytope random_polytope(std::mt19937& rng, int d, int cuts, bool clutter) {
  HPolytope P = random_box(rng, d);
  const Box bb = bounding_box(P);
  const Vec mid = 0.5 * (bb.lo + bb.hi);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> off(0.05, 0.6);
  for (int k = 0; k < cuts; ++k) {
    Vec a(d);
    for (int i = 0; i < d; ++i) a[i] = n01(rng);
    a.normalize();
    const double reach = 0.5 * (bb.hi - bb.lo).cwiseAbs().dot(a.cwiseAbs());
    P = P.with_row(a, a.dot(mid) + off(rng) * reach);
  }
  if (clutter) {
    P = P.with_row(P.A().row(0).transpose(), P.b()[0]);
    P = P.with_row(P.A().row(1).transpose(), P.b()[1] + 0.5);
    Vec a(d);
    for (int i = 0; i < d; ++i) a[i] = n01(rng);
    a.normalize();
    P = P.with_row(a, support(P, a) + 0.25);
  }
  return P;
}

// Rejection sample from a polytope's bounding box; returns false on failure.
inline bool sample_inside(std::mt19937& rng, const HPolytope& P, const Box& bb, Vec& out,
                          double margin = 0.0, int tries = 400) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < tries; ++t) {
    Vec p(P.dim());
    for (int i = 0; i < P.dim(); ++i) p[i] = bb.lo[i] + u(rng) * (bb.hi[i] - bb.lo[i]);
    if (contains(P, p, 0.0).margin > margin) {
      out = p;
      return true;
    }
  }
  return false;
}

inline std::vector<Vec> box_vertices(const Box& b) {
  const int d = static_cast<int>(b.lo.size());
  std::vector<Vec> out;
  for (int mask = 0; mask < (1 << d); ++mask) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = (mask >> i & 1) ? b.hi[i] : b.lo[i];
    out.push_back(v);
  }
  return out;
}

inline Outcome contains_reduce_consistency(int cases, unsigned seed, int points = 30) {
  std::mt19937 rng(seed);
  Outcome o;
  for (int c = 0; c < cases; ++c) {
    const int d = 1 + c % 4;
    const HPolytope P = random_polytope(rng, d, c % 4, true);
    const HPolytope R = reduce(P, 1e-7);
    const Box bb = bounding_box(P);
    bool ok = R.rows() <= P.rows();
    for (int k = 0; k < points; ++k) {
      const Vec p = random_vec(rng, d, -3.0, 3.0);
      if (contains(P, p, 1e-6).inside != contains(R, p, 1e-6).inside) ok = false;
    }
    // idempotence
    if (!(reduce(R, 1e-7) == R)) ok = false;
    (void)bb;
    ++o.cases;
    if (!ok) ++o.failures;
  }
  return o;
}

inline Outcome robust_eliminate_soundness(int cases, unsigned seed, int points = 500) {
  std::mt19937 rng(seed);
  Outcome o;
  for (int c = 0; c < cases; ++c) {
    const int keep = 1 + c % 2;
    const int elim = 1 + (c / 2) % 2;
    const int d = keep + elim;
    const HPolytope P = random_polytope(rng, d, 2 + c % 3, false);
    Vec ulo = random_vec(rng, elim, -0.4, 0.0);
    Vec uhi = ulo + random_vec(rng, elim, 0.0, 0.5);
    const HPolytope U = HPolytope::box(ulo, uhi);
    std::vector<int> dims;
    for (int i = keep; i < d; ++i) dims.push_back(i);
    const HPolytope R = robust_eliminate(P, dims, U);
    ++o.cases;
    if (is_empty(R, 1e-9)) continue;
    const Box rb = bounding_box(R);
    const auto verts = box_vertices(bounding_box(U));
    bool ok = true;
    for (int k = 0; k < points && ok; ++k) {
      Vec eta;
      if (!sample_inside(rng, R, rb, eta)) break;
      for (const Vec& uv : verts) {
        Vec full(d);
        full << eta, uv;
        if (!contains(P, full, 1e-7).inside) ok = false;
      }
    }
    if (!ok) ++o.failures;
  }
  return o;
}

inline Outcome projection_sound_and_tight(int cases, unsigned seed, int points = 40) {
  std::mt19937 rng(seed);
  Outcome o;
  for (int c = 0; c < cases; ++c) {
    const int d = 2 + c % 3;
    const int drop = 1 + (c / 3) % (d - 1);
    const HPolytope P = random_polytope(rng, d, 1 + c % 4, c % 2 == 0);
    std::vector<int> dims;
    for (int i = d - drop; i < d; ++i) dims.push_back(i);
    const HPolytope R = project_out(P, dims);
    const int kd = d - drop;
    bool ok = R.dim() == kd;
    const Box pb = bounding_box(P);
    for (int k = 0; k < points && ok; ++k) {
      Vec p;
      if (!sample_inside(rng, P, pb, p)) break;
      if (!contains(R, p.head(kd), 1e-7).inside) ok = false;
    }
    // Chebyshev center of the projection lifts back into P.
    const ChebyshevBall cb = chebyshev_ball(R);
    if (ok && cb.radius > 0) {
      Mat A = P.A().rightCols(drop);
      Vec b = P.b() - P.A().leftCols(kd) * cb.center;
      const auto lift = lp::feasible_point(A, b.array() + 1e-7);
      if (lift.status != lp::Status::optimal) ok = false;
    }
    ++o.cases;
    if (!ok) ++o.failures;
  }
  return o;
}

inline PolyUnion random_union(std::mt19937& rng, int d, int parts) {
  PolyUnion u(d);
  for (int k = 0; k < parts; ++k)
    u.add(k % 2 ? random_box(rng, d) : random_polytope(rng, d, 1 + k % 2, false));
  return u;
}

inline Outcome region_diff_partition(int cases, unsigned seed, int points = 60) {
  std::mt19937 rng(seed);
  Outcome o;
  const double eps = 1e-6;
  for (int c = 0; c < cases; ++c) {
    const int d = 1 + c % 3;
    const PolyUnion A = random_union(rng, d, 1 + c % 3);
    const PolyUnion B = random_union(rng, d, 1 + (c / 3) % 3);
    const PolyUnion D = region_diff(A, B);
    bool ok = true;
    for (int k = 0; k < points; ++k) {
      const Vec p = random_vec(rng, d, -2.5, 3.5);
      const double ma = contains(A, p, 0).margin;
      const double mb = B.no_parts() ? -1e9 : contains(B, p, 0).margin;
      const double md = D.no_parts() ? -1e9 : contains(D, p, 0).margin;
      if (ma > eps && mb < -eps && md < -eps) ok = false;
      if (md > eps && (ma < -eps || mb > eps)) ok = false;
    }
    ++o.cases;
    if (!ok) ++o.failures;
  }
  return o;
}

inline Outcome union_subset_preorder(int cases, unsigned seed) {
  std::mt19937 rng(seed);
  Outcome o;
  for (int c = 0; c < cases; ++c) {
    const int d = 1 + c % 2;
    // Nested-ish triple: A from shrunk pieces of B, B from pieces of C.
    const PolyUnion Cu = random_union(rng, d, 2);
    PolyUnion Bu(d), Au(d);
    for (const auto& p : Cu.parts()) {
      const Box bb = bounding_box(p);
      const Vec mid = 0.5 * (bb.lo + bb.hi);
      const Vec half = 0.5 * (bb.hi - bb.lo);
      Bu.add(intersect(p, HPolytope::box(mid - 0.8 * half, mid + 0.8 * half)));
      Au.add(intersect(p, HPolytope::box(mid - 0.4 * half, mid + 0.4 * half)));
    }
    const PolyUnion X = random_union(rng, d, 2);
    const double tol = 1e-7;
    bool ok = union_subset(Au, Au, tol) && union_subset(X, X, tol);
    const bool ab = union_subset(Au, Bu, tol);
    const bool bc = union_subset(Bu, Cu, tol);
    if (ab && bc && !union_subset(Au, Cu, tol)) ok = false;
    const bool ax = union_subset(Au, X, tol), xc = union_subset(X, Cu, tol);
    if (ax && xc && !union_subset(Au, Cu, tol)) ok = false;
    const bool xb = union_subset(X, Bu, tol);
    if (xb && bc && !union_subset(X, Cu, tol)) ok = false;
    ++o.cases;
    if (!ok) ++o.failures;
  }
  return o;
}

}  // namespace rpimon::props
