#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "polytope_properties.hpp"
#include "rpimon/sim.hpp"
#include "rpimon/verify.hpp"

using namespace rpimon;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Suite {
  Scenario sc = load_scenario(std::string(RPIMON_SOURCE_DIR) + "/scenarios/running_example.json");
  SynthOptions exists_opts() const { return SynthOptions{}; }
  SynthOptions forall_opts() const {
    SynthOptions o;
    o.quant = Quantifier::forall_admissible;
    o.tol = 1e-6;
    return o;
  }
  InvariantSet ex_full, fa_full;
  std::vector<InvariantSet> ex_parts, fa_parts;
};

void composition_equivalence(Suite& s) {
  const auto t0 = std::chrono::steady_clock::now();
  s.fa_full = synthesize(s.sc, {1, 2}, s.forall_opts());
  s.fa_parts = synthesize_parts(s.sc, {1, 2}, s.forall_opts());
  const CompositionReport r = check_composition(s.fa_full, s.fa_parts, s.sc, 1e-6);
  const double secs = seconds_since(t0);
  const bool converged = s.fa_full.converged && s.fa_parts[0].converged && s.fa_parts[1].converged;
  verdict(1, converged && r.full_in_conjunction && r.conjunction_in_full && secs < 600,
          "composition equivalence (forall-admissible)",
          std::string("full in conjunction ") + (r.full_in_conjunction ? "yes" : "no") + ", conjunction in full " +
              (r.conjunction_in_full ? "yes" : "no") + ", eps 1e-6, " + fmt("%.1f s", secs));
}

void exists_direction(Suite& s) {
  s.ex_full = synthesize(s.sc, {1, 2}, s.exists_opts());
  s.ex_parts = synthesize_parts(s.sc, {1, 2}, s.exists_opts());
  const CompositionReport r = check_composition(s.ex_full, s.ex_parts, s.sc, 1e-6);
  verdict(2, s.ex_full.converged && r.full_in_conjunction, "exists-mode completeness direction",
          std::string("full in conjunction ") + (r.full_in_conjunction ? "yes" : "no") +
              "; reverse (reported only) " + (r.conjunction_in_full ? "holds" : "gap") + " with " +
              std::to_string(r.witnesses_conj.size()) + " witnesses");
}

void one_step_closure(Suite& s) {
  bool ok = true;
  std::string detail;
  auto run = [&](const InvariantSet& inv, const std::string& name) {
    if (!inv.converged || inv.set.no_parts()) return;
    const ClosureReport r = verify_one_step_closure(inv, s.sc, 1000, 2024);
    ok = ok && r.samples == 1000 && r.passed == 1000 && r.counterexamples.empty();
    detail += name + " " + std::to_string(r.passed) + "/" + std::to_string(r.samples) + "; ";
  };
  run(s.ex_parts[0], "exists p1");
  run(s.ex_parts[1], "exists p2");
  run(s.ex_full, "exists full");
  run(s.fa_parts[0], "forall p1");
  run(s.fa_parts[1], "forall p2");
  run(s.fa_full, "forall full");
  verdict(3, ok, "one-step closure", detail + "seed 2024");
}

void maximality(Suite& s) {
  MaximalityOptions o;
  o.x_step = 0.25;
  o.z_step = 0.25;
  o.horizon = 20;
  const MaximalityReport r = verify_maximality(s.ex_parts[0], s.sc, o);
  verdict(4, r.contradictions == 0 && r.excluded > 0, "maximality spot-check (part 1, H = 20)",
          std::to_string(r.excluded) + " excluded grid states, " + std::to_string(r.contradictions) +
              " contradictions, uncertified fraction " + fmt("%.4f", r.uncertified_fraction()) +
              (r.lattice_converged ? "" : ", lattice kernel not converged"));
}

void degeneracy_law(Suite& s) {
  const Frame f{{1}};
  const Vec center = chebyshev_ball(s.sc.cells[s.sc.cell_index("corridor")].region).center;
  SynthOptions o = s.forall_opts();
  o.max_iters = 20;
  std::vector<double> bound;
  synthesize(s.sc, {1}, o, [&](int, const PolyUnion& S) { bound.push_back(loiter_z_bound(S, f, center, 0)); });
  const Part& p = s.sc.part(1);
  double worst = 0;
  bool decay_ok = bound.size() == 21;
  for (int l = 0; l < static_cast<int>(bound.size()); ++l) {
    const double expect = p.z_crit * std::pow(p.b_max, -l);
    const double rel = std::abs(bound[l] - expect) / expect;
    worst = std::max(worst, std::isfinite(rel) ? rel : INFINITY);
  }
  decay_ok = decay_ok && worst <= 1e-9;

  const Box X = bounding_box(s.sc.workspace);
  const int limit = static_cast<int>(std::ceil((X.hi[0] - X.lo[0]) / (s.sc.Ts * s.sc.u_max()) - 1e-12));
  SynthOptions raw;
  raw.quant = Quantifier::forall_raw;
  int first_empty = -1;
  synthesize(s.sc, {1}, raw, [&](int l, const PolyUnion& S) {
    if (first_empty < 0 && is_empty(S, default_tol())) first_empty = l;
  });
  const bool raw_ok = first_empty >= 0 && first_empty <= limit;
  verdict(5, decay_ok && raw_ok, "forall-mode degeneracy law",
          "max relative error " + fmt("%.2e", worst) + " over l <= 20; forall-raw empty at iteration " +
              std::to_string(first_empty) + " (bound " + std::to_string(limit) + ")");
}

void monitoring(Suite& s) {
  MonitorOptions mo;
  mo.hysteresis_m = 3;
  mo.anticipate = true;
  const Monitor mon(s.ex_parts, s.sc, mo);
  bool ok = true;
  double min_lead = INFINITY;
  int healthy_alerts = 0, healthy_false = 0;
  for (FactorMode fm : {FactorMode::sampled, FactorMode::worst_case})
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto faulty = simulate(s.sc, PolicyParams{}, {parse_fault("loiter@50:corridor")}, 300, seed, fm);
      const AlertReport r = run_trace(mon, faulty.trace, mo);
      for (int id : s.sc.part_ids()) {
        const bool starved = r.baseline_crossing_t.count(id) > 0;
        const bool lead = r.lead_time.count(id) && r.lead_time.at(id) > 0;
        ok = ok && starved && lead;
        if (r.lead_time.count(id)) min_lead = std::min(min_lead, r.lead_time.at(id));
      }
      const auto healthy = simulate(s.sc, PolicyParams{}, {}, 300, seed, fm);
      const AlertReport h = run_trace(mon, healthy.trace, mo);
      healthy_alerts += static_cast<int>(h.events.size());
      healthy_false += h.false_alerts;
    }
  ok = ok && healthy_alerts == 0 && healthy_false == 0;
  verdict(6, ok, "monitoring behaviour (3 seeds, sampled and worst-case factors)",
          "minimum lead time " + fmt("%.1f s", min_lead) + " over both starved parts; healthy patrol " +
              std::to_string(healthy_alerts) + " alerts, " + std::to_string(healthy_false) + " false alerts");
}

void performance(Suite& s) {
  MonitorOptions mo;
  mo.latency_repeats = 5;
  const Monitor comp(s.ex_parts, s.sc, mo);
  const Monitor full({s.ex_full}, s.sc, mo);
  std::vector<Sample> trace = simulate(s.sc, PolicyParams{}, {}, 300, 1).trace;
  const auto loiter = simulate(s.sc, PolicyParams{}, {parse_fault("loiter@50:corridor")}, 300, 1).trace;
  for (auto smp : loiter) {
    smp.k += 1000;
    trace.push_back(smp);
  }
  const double c = run_trace(comp, trace, mo).latency.median_us;
  const double f = run_trace(full, trace, mo).latency.median_us;
  double per_part = 0;
  for (const auto& inv : s.ex_parts) per_part += inv.report.seconds;
  const double full_s = s.ex_full.report.seconds;
  verdict(7, c < f && c < 1000.0 && per_part < full_s, "performance trend",
          "median check " + fmt("%.2f us", c) + " compositional vs " + fmt("%.2f us", f) + " full (" +
              std::to_string(comp.facet_count()) + " vs " + std::to_string(full.facet_count()) +
              " facets); synthesis " + fmt("%.3f s", per_part) + " per-part total vs " + fmt("%.3f s", full_s) +
              " full");
}

void geometry_suites() {
  using namespace rpimon::props;
  const int n = 1000;
  const Outcome a = contains_reduce_consistency(n, 101);
  const Outcome b = robust_eliminate_soundness(n, 102, 100);
  const Outcome c = projection_sound_and_tight(n, 103);
  const Outcome d = region_diff_partition(n, 104);
  const bool ok = a.failures + b.failures + c.failures + d.failures == 0 &&
                  std::min({a.cases, b.cases, c.cases, d.cases}) >= n;
  auto part = [](const char* name, const Outcome& o) {
    return std::string(name) + " " + std::to_string(o.failures) + "/" + std::to_string(o.cases);
  };
  verdict(8, ok, "geometry property suites (failures/cases)",
          part("contains-reduce", a) + ", " + part("robust-eliminate", b) + ", " + part("projection", c) + ", " +
              part("region-diff", d));
}

}  // namespace

int main() {
  Suite s;
  composition_equivalence(s);
  exists_direction(s);
  one_step_closure(s);
  maximality(s);
  degeneracy_law(s);
  monitoring(s);
  performance(s);
  geometry_suites();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
