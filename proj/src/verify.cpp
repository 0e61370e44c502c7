#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "rpimon/lp.hpp"
#include "rpimon/verify.hpp"

namespace rpimon {

using nlohmann::json;

namespace {

constexpr double kCellTol = 1e-9;

// Vertices of a planar polytope by pairwise facet intersection.
std::vector<Vec> planar_vertices(const HPolytope& P) {
  std::vector<Vec> out;
  for (int i = 0; i < P.rows(); ++i)
    for (int j = i + 1; j < P.rows(); ++j) {
      Eigen::Matrix2d M;
      M << P.A().row(i), P.A().row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = M.partialPivLu().solve(Eigen::Vector2d(P.b()[i], P.b()[j]));
      const Vec p = v;
      if (!contains(P, p, 1e-9).inside) continue;
      if (std::none_of(out.begin(), out.end(), [&](const Vec& q) { return (q - p).norm() < 1e-9; }))
        out.push_back(p);
    }
  return out;
}

std::vector<Vec> input_candidates(const HPolytope& U, int grid) {
  std::vector<Vec> out = planar_vertices(U);
  const Box b = bounding_box(U);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      Vec u(2);
      const double si = grid == 1 ? 0.5 : static_cast<double>(i) / (grid - 1);
      const double sj = grid == 1 ? 0.5 : static_cast<double>(j) / (grid - 1);
      u << b.lo[0] + si * (b.hi[0] - b.lo[0]), b.lo[1] + sj * (b.hi[1] - b.lo[1]);
      if (contains(U, u, 1e-12).inside) out.push_back(u);
    }
  return out;
}

Vec state(const Vec& x, const Vec& z, const Vec& u) {
  Vec s(x.size() + z.size() + u.size());
  s << x, z, u;
  return s;
}

// Is there an input u in U with (xz, u) in P (within tol)?
bool slice_feasible(const HPolytope& P, const Vec& xz, const HPolytope& U, double tol) {
  const int k = static_cast<int>(xz.size());
  Mat A(P.rows() + U.rows(), 2);
  Vec b(P.rows() + U.rows());
  A.topRows(P.rows()) = P.A().rightCols(2);
  b.head(P.rows()) = P.b() - P.A().leftCols(k) * xz + Vec::Constant(P.rows(), tol);
  A.bottomRows(U.rows()) = U.A();
  b.tail(U.rows()) = U.b();
  return lp::feasible_point(A, b).status == lp::Status::optimal;
}

// Infinity-norm distance from a point to a planar polytope (one LP).
double linf_distance(const Vec& x, const HPolytope& cell) {
  Mat A(cell.rows() + 4, 3);
  Vec b(cell.rows() + 4);
  A.setZero();
  A.topLeftCorner(cell.rows(), 2) = cell.A();
  b.head(cell.rows()) = cell.b();
  for (int i = 0; i < 2; ++i) {
    A(cell.rows() + 2 * i, i) = 1;
    A(cell.rows() + 2 * i, 2) = -1;
    b[cell.rows() + 2 * i] = x[i];
    A(cell.rows() + 2 * i + 1, i) = -1;
    A(cell.rows() + 2 * i + 1, 2) = -1;
    b[cell.rows() + 2 * i + 1] = -x[i];
  }
  Vec c = Vec::Zero(3);
  c[2] = -1;
  const lp::Result r = lp::maximize(A, b, c);
  return r.status == lp::Status::optimal ? -r.value : std::numeric_limits<double>::infinity();
}

// Largest viable z on the lattice origin + s*Z^2 under grid inputs, by value
// iteration from the top. Values below a floor are rounded down to zero,
// which keeps the result below the true lattice kernel.
class LatticeKernel {
 public:
  LatticeKernel(const Scenario& sc, int part_id, double spacing, int inputs)
      : sc_(sc), id_(part_id), s_(spacing), zc_(sc.part(part_id).z_crit) {
    const int half = (inputs - 1) / 2;
    for (int a = -half; a <= half; ++a)
      for (int b = -half; b <= half; ++b) {
        Vec u(2);
        u << a * s_ / sc.Ts, b * s_ / sc.Ts;
        if (contains(sc.U, u, 1e-12).inside) moves_.push_back({a, b});
      }
    box_ = sc.domain_box();
  }

  bool converged() const { return converged_; }

  // W at the lattice point x (x itself anchors the lattice).
  double value_at(const Vec& x) {
    Vec origin(2);
    std::array<long, 2> at{};
    for (int i = 0; i < 2; ++i) {
      const double n = std::floor((x[i] - box_.lo[i]) / s_ + 1e-9);
      origin[i] = x[i] - n * s_;
      at[i] = static_cast<long>(n);
    }
    const std::pair<long, long> key{std::lround(origin[0] * 1e8), std::lround(origin[1] * 1e8)};
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, solve(origin)).first;
    const Grid& g = it->second;
    if (at[0] < 0 || at[0] >= g.nx || at[1] < 0 || at[1] >= g.ny) return -1.0;
    return g.w[at[0] * g.ny + at[1]];
  }

 private:
  struct Grid {
    long nx = 0, ny = 0;
    std::vector<double> w;  // negative = outside the domain
  };

  Grid solve(const Vec& origin) {
    Grid g;
    g.nx = static_cast<long>(std::floor((box_.hi[0] - origin[0]) / s_ + 1e-9)) + 1;
    g.ny = static_cast<long>(std::floor((box_.hi[1] - origin[1]) / s_ + 1e-9)) + 1;
    const PolyUnion dom = sc_.domain_x();
    std::vector<double> gamma(g.nx * g.ny, -1.0);
    g.w.assign(g.nx * g.ny, -1.0);
    for (long i = 0; i < g.nx; ++i)
      for (long j = 0; j < g.ny; ++j) {
        Vec p(2);
        p << origin[0] + i * s_, origin[1] + j * s_;
        if (!contains(dom, p, kCellTol).inside) continue;
        gamma[i * g.ny + j] = sc_.factor_at(id_, p, kCellTol, false);
        g.w[i * g.ny + j] = zc_;
      }
    const double floor = 1e-12 * zc_;
    for (int it = 0; it < 5000; ++it) {
      std::vector<double> next = g.w;
      for (long i = 0; i < g.nx; ++i)
        for (long j = 0; j < g.ny; ++j) {
          const long k = i * g.ny + j;
          if (g.w[k] < 0) continue;
          double best = -1.0;
          for (const auto& m : moves_) {
            const long a = i + m.first, b = j + m.second;
            if (a < 0 || a >= g.nx || b < 0 || b >= g.ny) continue;
            best = std::max(best, g.w[a * g.ny + b]);
          }
          double v = best < 0 ? -1.0 : std::min(zc_, best / gamma[k]);
          if (v >= 0 && v < floor) v = 0.0;
          next[k] = v;
        }
      if (next == g.w) return g;
      g.w.swap(next);
    }
    converged_ = false;
    std::fill(g.w.begin(), g.w.end(), -1.0);
    return g;
  }

  const Scenario& sc_;
  int id_;
  double s_;
  double zc_;
  Box box_;
  std::vector<std::pair<int, int>> moves_;
  std::map<std::pair<long, long>, Grid> cache_;
  bool converged_ = true;
};

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

ClosureReport verify_one_step_closure(const InvariantSet& inv, const Scenario& sc, int samples,
                                      std::uint64_t seed, int input_grid) {
  if (inv.set.no_parts()) throw InputError("closure check needs a nonempty invariant");
  ClosureReport r;
  r.seed = seed;
  r.membership_tol = std::max(inv.options.tol, default_tol());
  const Frame& f = inv.frame;
  const int nz = f.nz();
  const std::vector<Vec> cands = input_candidates(sc.U, input_grid);
  const PolyUnion dom = sc.domain_x();

  std::vector<std::pair<const HPolytope*, Box>> parts;
  for (const auto& p : inv.set.parts()) parts.emplace_back(&p, bounding_box(p));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int attempt = 0; r.samples < samples && attempt < 20 * samples; ++attempt) {
    const auto& [P, bb] = parts[pick(rng)];
    Vec xi(f.dim());
    bool found = false;
    for (int t = 0; t < 1000 && !found; ++t) {
      for (int i = 0; i < f.dim(); ++i) xi[i] = bb.lo[i] + unit(rng) * (bb.hi[i] - bb.lo[i]);
      found = contains(*P, xi, 0.0).inside;
    }
    if (!found) {
      ++r.skipped;
      continue;
    }
    ++r.samples;
    const Vec x = xi.head(2), z = xi.segment(2, nz), u = xi.tail(2);
    Vec xz(2 + nz);
    xz.head(2) = x + sc.Ts * u;
    for (int k = 0; k < nz; ++k) xz[2 + k] = sc.factor_at(f.part_ids[k], x, kCellTol, true) * z[k];

    bool ok;
    if (inv.quant == Quantifier::exists) {
      ok = std::any_of(cands.begin(), cands.end(), [&](const Vec& c) {
        return contains(inv.set, state(xz.head(2), xz.tail(nz), c), r.membership_tol).inside;
      });
      if (!ok)
        ok = std::any_of(inv.set.parts().begin(), inv.set.parts().end(),
                         [&](const HPolytope& p) { return slice_feasible(p, xz, sc.U, r.membership_tol); });
    } else {
      ok = true;
      for (const Vec& c : cands) {
        if (inv.quant == Quantifier::forall_admissible &&
            !contains(dom, Vec(xz.head(2) + sc.Ts * c), kCellTol).inside)
          continue;
        if (!contains(inv.set, state(xz.head(2), xz.tail(nz), c), r.membership_tol).inside) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      ++r.passed;
    } else if (r.counterexamples.size() < 10) {
      r.counterexamples.emplace_back(xi, xz);
    }
  }
  return r;
}

struct MaximalityOracle::Impl {
  Impl(const InvariantSet& inv, const Scenario& sc, const MaximalityOptions& o)
      : inv(inv),
        sc(sc),
        o(o),
        id(inv.frame.part_ids.at(0)),
        dom(sc.domain_x()),
        reach(sc.Ts * sc.u_max()),
        kernel(sc, id, 2.0 * reach / (o.lattice_inputs - 1), o.lattice_inputs) {
    const Part& part = sc.part(id);
    zc = part.z_crit;
    b = inv.vertices.empty() || inv.vertices.front().b_upper ? part.b_max : part.b_min;
    memb = std::max(inv.options.tol, default_tol());
    for (int c : sc.traversable)
      if (sc.observes(id, c)) observed.push_back(sc.cells[c].region);
  }

  const InvariantSet& inv;
  const Scenario& sc;
  MaximalityOptions o;
  int id;
  PolyUnion dom;
  double reach;
  LatticeKernel kernel;
  double zc = 0, b = 0, memb = 0;
  std::vector<HPolytope> observed;
};

MaximalityOracle::MaximalityOracle(const InvariantSet& inv, const Scenario& sc, const MaximalityOptions& o) {
  if (inv.frame.nz() != 1) throw InputError("maximality oracle supports single-part invariants only");
  if (inv.quant != Quantifier::exists) throw InputError("maximality oracle expects an exists-invariant");
  if (!(o.x_step > 0) || !(o.z_step > 0) || o.u_grid < 1 || o.horizon < 0 || o.lattice_inputs < 2)
    throw InputError("maximality: invalid grid options");
  impl_ = std::make_unique<Impl>(inv, sc, o);
}

MaximalityOracle::~MaximalityOracle() = default;

bool MaximalityOracle::lattice_converged() const { return impl_->kernel.converged(); }

StateClass MaximalityOracle::classify(const Vec& xi) {
  Impl& m = *impl_;
  if (contains(m.inv.set, xi, m.memb).inside) return StateClass::inside;
  if (m.o.horizon < 1) return StateClass::uncertified;
  const Vec x = xi.head(2), u = xi.tail(2);
  const double z = xi[2];
  const Vec xn = x + m.sc.Ts * u;
  const double zn = m.sc.factor_at(m.id, x, kCellTol, false) * z;
  if (!contains(m.dom, xn, kCellTol).inside || zn > m.zc) return StateClass::certified;
  if (zn <= m.kernel.value_at(xn)) return StateClass::contradiction;
  // Steps before any observed cell can be reached grow z by b.
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& c : m.observed) dist = std::min(dist, linf_distance(xn, c));
  const double first_obs = std::isfinite(dist) ? 1.0 + std::ceil(dist / m.reach - 1e-12) : m.o.horizon + 1.0;
  double zk = zn;
  for (int k = 1; k < m.o.horizon && k < first_obs; ++k) {
    zk *= m.b;
    if (zk > m.zc) return StateClass::certified;
  }
  return StateClass::uncertified;
}

MaximalityReport verify_maximality(const InvariantSet& inv, const Scenario& sc, const MaximalityOptions& o) {
  MaximalityOracle oracle(inv, sc, o);
  MaximalityReport r;
  const int id = inv.frame.part_ids[0];
  const double zc = sc.part(id).z_crit;
  const PolyUnion dom = sc.domain_x();
  const Box xb = sc.domain_box();
  std::vector<Vec> us;
  for (const Vec& c : input_candidates(sc.U, o.u_grid))
    if (std::none_of(us.begin(), us.end(), [&](const Vec& q) { return (q - c).norm() < 1e-12; })) us.push_back(c);

  for (double x0 = xb.lo[0]; x0 <= xb.hi[0] + 1e-9; x0 += o.x_step)
    for (double x1 = xb.lo[1]; x1 <= xb.hi[1] + 1e-9; x1 += o.x_step) {
      Vec x(2);
      x << x0, x1;
      if (!contains(dom, x, kCellTol).inside) continue;
      for (double z = 0.0; z <= zc + 1e-9; z += o.z_step)
        for (const Vec& u : us) {
          ++r.grid_states;
          const Vec xi = state(x, Vec::Constant(1, z), u);
          switch (oracle.classify(xi)) {
            case StateClass::inside: continue;
            case StateClass::certified: ++r.certified; break;
            case StateClass::uncertified: ++r.uncertified; break;
            case StateClass::contradiction:
              ++r.contradictions;
              if (r.contradiction_states.size() < 10) r.contradiction_states.push_back(xi);
              break;
          }
          ++r.excluded;
        }
    }
  r.lattice_converged = oracle.lattice_converged();
  return r;
}

json to_json(const ClosureReport& r) {
  json ces = json::array();
  for (const auto& [s, n] : r.counterexamples) ces.push_back({{"state", vec_json(s)}, {"successor", vec_json(n)}});
  return json{{"samples", r.samples},   {"passed", r.passed},
              {"fraction", r.fraction()}, {"skipped", r.skipped},
              {"seed", r.seed},         {"membership_tol", r.membership_tol},
              {"counterexamples", std::move(ces)}};
}

json to_json(const MaximalityReport& r) {
  json cs = json::array();
  for (const auto& s : r.contradiction_states) cs.push_back(vec_json(s));
  return json{{"grid_states", r.grid_states},
              {"excluded", r.excluded},
              {"certified", r.certified},
              {"uncertified", r.uncertified},
              {"uncertified_fraction", r.uncertified_fraction()},
              {"contradictions", r.contradictions},
              {"lattice_converged", r.lattice_converged},
              {"contradiction_states", std::move(cs)}};
}

}  // namespace rpimon
