#include "rpimon/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "rpimon/lp.hpp"

namespace rpimon {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> u_dims(const Frame& f) { return {f.u_index(), f.u_index() + 1}; }

// Rows bounding every z coordinate to [0, z_crit] in a space of dimension d.
HPolytope z_box(const Scenario& sc, const Frame& f, int d) {
  Mat A = Mat::Zero(2 * f.nz(), d);
  Vec b = Vec::Zero(2 * f.nz());
  for (int k = 0; k < f.nz(); ++k) {
    A(2 * k, f.z_index(k)) = -1.0;
    A(2 * k + 1, f.z_index(k)) = 1.0;
    b[2 * k + 1] = sc.part(f.part_ids[k]).z_crit;
  }
  return HPolytope(std::move(A), std::move(b));
}

HPolytope cell_domain(const Scenario& sc, const Frame& f, const HPolytope& cell) {
  const int d = f.dim();
  const std::array<int, 2> xm{0, 1};
  const std::array<int, 2> um{f.u_index(), f.u_index() + 1};
  return embed(cell, d, xm).stacked(z_box(sc, f, d)).stacked(embed(sc.U, d, um));
}

// Rows of `target` (planar) imposed on x + Ts*u in the full frame.
HPolytope moved_into(const Scenario& sc, const Frame& f, const HPolytope& target) {
  Mat A = Mat::Zero(target.rows(), f.dim());
  A.leftCols(2) = target.A();
  A.middleCols(f.u_index(), 2) = sc.Ts * target.A();
  return HPolytope(std::move(A), target.b());
}

PolyUnion admissible_cylinder(const Scenario& sc, const Frame& f, bool admissible) {
  const double tol = default_tol();
  PolyUnion out(f.dim());
  for (int c : sc.traversable) {
    const HPolytope base = cell_domain(sc, f, sc.cells[c].region);
    if (!admissible) {
      out.add(base);
      continue;
    }
    for (int t : sc.traversable) {
      const HPolytope p = base.stacked(moved_into(sc, f, sc.cells[t].region));
      if (chebyshev_ball(p).radius < tol) continue;
      out.add(reduce(p, tol));
    }
  }
  return out;
}

bool collapsed(const PolyUnion& S, const Scenario& sc, const Frame& f) {
  for (const auto& p : S.parts())
    for (int k = 0; k < f.nz(); ++k) {
      Vec e = Vec::Zero(f.dim());
      e[f.z_index(k)] = 1.0;
      if (support(p, e) > 1e-3 * sc.part(f.part_ids[k]).z_crit) return false;
    }
  return true;
}

}  // namespace

std::string to_string(Quantifier q) {
  switch (q) {
    case Quantifier::exists: return "exists";
    case Quantifier::forall_admissible: return "forall_admissible";
    case Quantifier::forall_raw: return "forall_raw";
  }
  return "exists";
}

std::string to_string(VertexStrategy v) {
  return v == VertexStrategy::worst_case ? "worst_case" : "all_vertices";
}

Quantifier parse_quantifier(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "exists") return Quantifier::exists;
  if (t == "forall_admissible") return Quantifier::forall_admissible;
  if (t == "forall_raw") return Quantifier::forall_raw;
  throw InputError("unknown quantifier '" + s + "'");
}

VertexStrategy parse_vertex_strategy(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "worst_case") return VertexStrategy::worst_case;
  if (t == "all_vertices") return VertexStrategy::all_vertices;
  throw InputError("unknown vertex strategy '" + s + "'");
}

PolyUnion domain(const Scenario& sc, const Frame& f) {
  PolyUnion D(f.dim());
  for (int c : sc.traversable) D.add(cell_domain(sc, f, sc.cells[c].region));
  return D;
}

PolyUnion state_box(const Scenario& sc, const Frame& f) {
  const int d = 2 + f.nz();
  const std::array<int, 2> xm{0, 1};
  PolyUnion B(d);
  for (int c : sc.traversable) B.add(embed(sc.cells[c].region, d, xm).stacked(z_box(sc, f, d)));
  return B;
}

PolyUnion input_section(const PolyUnion& S, const Scenario& sc, const Frame& f, Quantifier q) {
  const double tol = default_tol();
  const auto ud = u_dims(f);
  PolyUnion out(2 + f.nz());
  if (q == Quantifier::exists) {
    for (const auto& p : S.parts()) {
      if (chebyshev_ball(p).radius < tol) continue;
      out.add(project_out(p, ud));
    }
    return prune(out, tol);
  }
  const PolyUnion cyl = admissible_cylinder(sc, f, q == Quantifier::forall_admissible);
  const PolyUnion bad = region_diff(cyl, S, tol);
  PolyUnion bad_xz(2 + f.nz());
  for (const auto& p : bad.parts()) bad_xz.add(project_out(p, ud));
  return prune(region_diff(state_box(sc, f), prune(bad_xz, tol), tol), tol);
}

PolyUnion pre_mode(const PolyUnion& section, const Mode& m, const Scenario& sc, const Frame& f,
                   bool reduce_parts) {
  const double tol = default_tol();
  const int d = f.dim();
  const int sd = 2 + f.nz();
  if (section.dim() != sd) throw std::invalid_argument("pre_mode: section frame mismatch");
  Mat M = Mat::Zero(sd, d);
  M(0, 0) = M(1, 1) = 1.0;
  M(0, f.u_index()) = M(1, f.u_index() + 1) = sc.Ts;
  for (int k = 0; k < f.nz(); ++k) M(2 + k, f.z_index(k)) = m.factors[k];
  PolyUnion out(d);
  for (const auto& g : m.guard) {
    const HPolytope base = cell_domain(sc, f, g);
    for (const auto& q : section.parts()) {
      const HPolytope p = HPolytope(q.A() * M, q.b()).stacked(base);
      if (chebyshev_ball(p).radius < tol) continue;
      out.add(reduce_parts ? reduce(p, tol) : p);
    }
  }
  return out;
}

InvariantSet rpi_fixed_point(const std::vector<Mode>& ms, const Scenario& sc,
                             const std::vector<int>& part_ids, const SynthOptions& opts,
                             const IterationObserver& observer) {
  if (!(opts.tol > 0)) throw InputError("synthesis tolerance must be positive");
  if (opts.max_iters < 1) throw InputError("max_iters must be at least 1");
  const double gtol = default_tol();
  InvariantSet inv;
  inv.frame = Frame{part_ids};
  inv.quant = opts.quant;
  inv.options = opts;
  inv.fingerprint = sc.fingerprint();
  for (int id : part_ids) sc.part_index(id);

  std::size_t guards = 0;
  for (const auto& m : ms) guards += m.guard.size();
  if (guards != sc.traversable.size()) throw InputError("mode guards do not cover the traversable cells");

  const auto t0 = Clock::now();
  PolyUnion S = domain(sc, inv.frame);
  if (is_empty(S, gtol)) throw InputError("empty synthesis domain");
  if (observer) observer(0, S);
  inv.report.termination = "max_iters";
  for (int ell = 1; ell <= opts.max_iters; ++ell) {
    const auto ti = Clock::now();
    const PolyUnion sec = input_section(S, sc, inv.frame, opts.quant);
    PolyUnion next(inv.frame.dim());
    for (const auto& m : ms) next.append(pre_mode(sec, m, sc, inv.frame, opts.reduce_every_iter));
    next = prune(next, gtol);

    inv.report.iterations.push_back({ell, next.size(), next.facet_count(), seconds_since(ti)});
    inv.iterations = ell;
    if (observer) observer(ell, next);
    const bool same = union_subset(S, next, opts.tol) && union_subset(next, S, opts.tol);
    S = std::move(next);
    if (same) {
      inv.converged = true;
      inv.report.termination = S.no_parts() ? "empty" : "fixed_point";
      break;
    }
  }
  inv.set = std::move(S);
  inv.report.degenerate = inv.set.no_parts() || collapsed(inv.set, sc, inv.frame);
  inv.report.seconds = seconds_since(t0);
  return inv;
}

InvariantSet synthesize(const Scenario& sc, const std::vector<int>& part_ids,
                        const SynthOptions& opts, const IterationObserver& observer) {
  if (opts.vertices == VertexStrategy::worst_case) {
    InvariantSet inv = rpi_fixed_point(modes(sc, part_ids), sc, part_ids, opts, observer);
    inv.vertices = {FactorVertex{}};
    return inv;
  }
  InvariantSet acc;
  bool first = true;
  for (const FactorVertex& v : FactorVertex::all()) {
    InvariantSet inv = rpi_fixed_point(modes(sc, part_ids, v), sc, part_ids, opts,
                                       first ? observer : IterationObserver{});
    if (first) {
      acc = std::move(inv);
      first = false;
      continue;
    }
    acc.set = intersect(acc.set, inv.set, default_tol());
    acc.converged = acc.converged && inv.converged;
    acc.iterations = std::max(acc.iterations, inv.iterations);
    acc.report.seconds += inv.report.seconds;
    if (!inv.converged) acc.report.termination = "max_iters";
  }
  acc.vertices = FactorVertex::all();
  acc.report.degenerate = acc.set.no_parts() || collapsed(acc.set, sc, acc.frame);
  return acc;
}

std::vector<InvariantSet> synthesize_parts(const Scenario& sc, const std::vector<int>& part_ids,
                                           const SynthOptions& opts, int threads) {
  std::vector<InvariantSet> out(part_ids.size());
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(part_ids.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < part_ids.size(); ++i) out[i] = synthesize(sc, {part_ids[i]}, opts);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(part_ids.size());
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < part_ids.size();) {
        try {
          out[i] = synthesize(sc, {part_ids[i]}, opts);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double loiter_z_bound(const PolyUnion& S, const Frame& f, const Vec& x, int k) {
  const int d = f.dim();
  Mat A = Mat::Zero(8, d);
  Vec b = Vec::Zero(8);
  for (int i = 0; i < 2; ++i) {
    A(2 * i, i) = 1;
    A(2 * i + 1, i) = -1;
    b[2 * i] = x[i];
    b[2 * i + 1] = -x[i];
    A(4 + 2 * i, f.u_index() + i) = 1;
    A(5 + 2 * i, f.u_index() + i) = -1;
  }
  const HPolytope still(A, b);
  Vec e = Vec::Zero(d);
  e[f.z_index(k)] = 1.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : S.parts()) best = std::max(best, support(p.stacked(still), e));
  return best;
}

PolyUnion state_section(const InvariantSet& inv, const Scenario& sc) {
  return input_section(inv.set, sc, inv.frame, inv.quant);
}

}  // namespace rpimon
