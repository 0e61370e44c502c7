#include "rpimon/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "rpimon/monitor.hpp"
#include "rpimon/sim.hpp"
#include "rpimon/verify.hpp"

namespace rpimon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kFailed = 2;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

fs::path ensure_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec || !fs::is_directory(d)) throw InputError("cannot create output directory '" + d + "'");
  return fs::path(d);
}

void ensure_parent(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  if (!p.empty()) ensure_dir(p.string());
}

std::vector<int> parse_ids(const std::string& s, const Scenario& sc) {
  if (s == "all") return sc.part_ids();
  std::vector<int> ids;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int id = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      sc.part(id);
      ids.push_back(id);
    } catch (const std::logic_error&) {
      throw InputError("--parts: '" + tok + "' is not a part id");
    }
  }
  if (ids.empty()) throw InputError("--parts: no part ids given");
  return ids;
}

// A file, or a directory holding invariant_part*.json (else invariant_full.json).
std::vector<InvariantSet> load_invariants(const std::vector<std::string>& paths) {
  std::vector<InvariantSet> out;
  for (const auto& path : paths) {
    if (!fs::is_directory(path)) {
      out.push_back(load_invariant(path));
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      const std::string n = e.path().filename().string();
      if (n.rfind("invariant_part", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
    }
    if (files.empty() && fs::exists(fs::path(path) / "invariant_full.json"))
      files.push_back(fs::path(path) / "invariant_full.json");
    if (files.empty()) throw InputError("no invariant files in '" + path + "'");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(load_invariant(f.string()));
  }
  return out;
}

void require_fingerprint(const std::vector<InvariantSet>& invs, const Scenario& sc) {
  const std::string fp = sc.fingerprint();
  for (const auto& inv : invs)
    if (inv.fingerprint != fp)
      throw InputError("invariant fingerprint " + inv.fingerprint.substr(0, 12) +
                       " does not match scenario fingerprint " + fp.substr(0, 12));
}

json run_stats(const InvariantSet& inv, const std::string& file) {
  return json{{"file", file},
              {"part_ids", inv.frame.part_ids},
              {"iterations", inv.iterations},
              {"converged", inv.converged},
              {"termination", inv.report.termination},
              {"degenerate", inv.report.degenerate},
              {"polytopes", inv.set.size()},
              {"facets", inv.set.facet_count()}};
}

std::string ids_label(const std::vector<int>& ids) {
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}

struct SynthArgs {
  std::string scenario, parts = "all", mode = "compositional", quant = "exists", vertices = "worst-case", out;
  double tol = 1e-7;
  int max_iters = 200;
  bool no_reduce = false;
};

int cmd_synth(const SynthArgs& a, int threads, std::ostream& out, std::ostream& err) {
  const Scenario sc = load_scenario(a.scenario);
  const std::vector<int> ids = parse_ids(a.parts, sc);
  if (a.mode != "compositional" && a.mode != "full") throw InputError("--mode must be compositional or full");
  SynthOptions o;
  o.tol = a.tol;
  o.max_iters = a.max_iters;
  o.quant = parse_quantifier(a.quant);
  o.vertices = parse_vertex_strategy(a.vertices);
  o.reduce_every_iter = !a.no_reduce;
  const fs::path dir = ensure_dir(a.out);

  std::vector<std::pair<InvariantSet, std::string>> runs;
  if (a.mode == "compositional") {
    for (auto& inv : synthesize_parts(sc, ids, o, threads)) {
      const std::string f = "invariant_part" + std::to_string(inv.frame.part_ids[0]) + ".json";
      runs.emplace_back(std::move(inv), f);
    }
  } else {
    runs.emplace_back(synthesize(sc, ids, o), "invariant_full.json");
  }

  json stats = json::array(), seconds = json::array();
  double total = 0;
  bool converged = true;
  for (const auto& [inv, f] : runs) {
    save_invariant(inv, (dir / f).string());
    stats.push_back(run_stats(inv, f));
    seconds.push_back(inv.report.seconds);
    total += inv.report.seconds;
    converged = converged && inv.converged;
    out << "parts " << ids_label(inv.frame.part_ids) << ": " << inv.iterations << " iterations, "
        << inv.set.size() << " polytopes, " << inv.set.facet_count() << " facets, "
        << (inv.converged ? "converged" : "not converged") << (inv.report.degenerate ? " (degenerate)" : "")
        << ", " << std::fixed << std::setprecision(3) << inv.report.seconds << " s\n";
    out.unsetf(std::ios::floatfield);
  }
  write_json(dir / "synth_report.json",
             json{{"command", "synth"},
                  {"scenario_fingerprint", sc.fingerprint()},
                  {"mode", a.mode},
                  {"quantifier", to_string(o.quant)},
                  {"vertex_strategy", to_string(o.vertices)},
                  {"tol", o.tol},
                  {"max_iters", o.max_iters},
                  {"converged", converged},
                  {"runs", stats},
                  {"timing", {{"run_seconds", seconds}, {"total_seconds", total}}}});
  if (!converged) {
    err << "error: synthesis did not converge within " << o.max_iters << " iterations\n";
    return kFailed;
  }
  return kOk;
}

struct SimArgs {
  std::string scenario, factor_mode = "worst-case", policy, out;
  int steps = 300;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> faults;
};

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  const Scenario sc = load_scenario(a.scenario);
  const PolicyParams params = a.policy.empty() ? PolicyParams{} : policy_from_json(read_json(a.policy));
  std::vector<FaultSpec> faults;
  for (const auto& f : a.faults) faults.push_back(parse_fault(f));
  const FactorMode mode = parse_factor_mode(a.factor_mode);
  const fs::path dir = ensure_dir(a.out);
  for (std::uint64_t seed : a.seeds) {
    const SimResult r = simulate(sc, params, faults, a.steps, seed, mode);
    const std::string tag = "seed" + std::to_string(seed);
    std::ofstream tr(dir / ("trace_" + tag + ".jsonl")), gt(dir / ("truth_" + tag + ".jsonl"));
    if (!tr || !gt) throw InputError("cannot write traces to '" + a.out + "'");
    write_trace(tr, r.trace);
    write_truth(gt, r.truth);
    double zmax = 0;
    for (const auto& s : r.trace) zmax = std::max(zmax, s.z.maxCoeff());
    out << "seed " << seed << ": " << r.trace.size() << " samples, max recorded z " << zmax << '\n';
  }
  return kOk;
}

struct MonitorArgs {
  std::string scenario, trace, out, csv, u_mode = "use-measured";
  std::vector<std::string> invariants;
  MonitorOptions o;
};

int cmd_monitor(MonitorArgs a, std::ostream& out) {
  const Scenario sc = load_scenario(a.scenario);
  const auto invs = load_invariants(a.invariants);
  require_fingerprint(invs, sc);
  a.o.u_mode = parse_input_mode(a.u_mode);
  const auto trace = load_trace(a.trace);
  if (trace.empty()) throw InputError("trace '" + a.trace + "' is empty");
  const Monitor mon(invs, sc, a.o);
  const AlertReport r = run_trace(mon, trace, a.o);
  json j = to_json(r);
  j["command"] = "monitor";
  j["trace"] = a.trace;
  j["facets"] = mon.facet_count();
  j["options"] = {{"hysteresis", a.o.hysteresis_m}, {"eta", a.o.margin_eta}, {"anticipate", a.o.anticipate},
                  {"u_mode", to_string(a.o.u_mode)}, {"grace_window", a.o.grace_window}};
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_json(a.out, j);
  }
  if (!a.csv.empty()) {
    ensure_parent(a.csv);
    std::ofstream c(a.csv);
    if (!c) throw InputError("cannot write '" + a.csv + "'");
    write_metrics_csv(c, r);
  }
  out << r.events.size() << " alerts, " << r.false_alerts << " false alerts over " << trace.size() << " samples\n";
  for (const auto& [id, lt] : r.lead_time) out << "part " << id << ": lead time " << lt << " s\n";
  for (const auto& [id, t] : r.baseline_crossing_t)
    if (!r.lead_time.count(id)) out << "part " << id << ": threshold crossed at " << t << " s without a prior alert\n";
  out << "median check latency " << r.latency.median_us << " us\n";
  return kOk;
}

struct VerifyArgs {
  std::string scenario, out, full;
  std::vector<std::string> invariants;
  int samples = 1000, input_grid = 5;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  MaximalityOptions m;
};

void maybe_write(const std::string& path, const json& j) {
  if (path.empty()) return;
  ensure_parent(path);
  write_json(path, j);
}

int cmd_closure(const VerifyArgs& a, std::ostream& out) {
  const Scenario sc = load_scenario(a.scenario);
  const auto invs = load_invariants(a.invariants);
  require_fingerprint(invs, sc);
  json reports = json::array();
  bool ok = true;
  for (const auto& inv : invs) {
    const ClosureReport r = verify_one_step_closure(inv, sc, a.samples, a.seed, a.input_grid);
    json j = to_json(r);
    j["part_ids"] = inv.frame.part_ids;
    reports.push_back(j);
    ok = ok && r.samples > 0 && r.passed == r.samples;
    out << "parts " << ids_label(inv.frame.part_ids) << ": " << r.passed << "/" << r.samples << " closed\n";
  }
  maybe_write(a.out, json{{"command", "verify closure"}, {"passed", ok}, {"reports", reports}});
  return ok ? kOk : kFailed;
}

int cmd_maximality(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const Scenario sc = load_scenario(a.scenario);
  const auto invs = load_invariants(a.invariants);
  require_fingerprint(invs, sc);
  if (a.m.horizon == 0) err << "warning: horizon 0 certifies nothing; every excluded state is uncertified\n";
  json reports = json::array();
  bool ok = true;
  for (const auto& inv : invs) {
    const MaximalityReport r = verify_maximality(inv, sc, a.m);
    json j = to_json(r);
    j["part_ids"] = inv.frame.part_ids;
    reports.push_back(j);
    ok = ok && r.contradictions == 0;
    out << "parts " << ids_label(inv.frame.part_ids) << ": " << r.excluded << " excluded grid states, "
        << r.certified << " certified, " << r.uncertified << " uncertified, " << r.contradictions
        << " contradictions\n";
  }
  maybe_write(a.out, json{{"command", "verify maximality"}, {"passed", ok}, {"reports", reports}});
  return ok ? kOk : kFailed;
}

int cmd_composition(const VerifyArgs& a, std::ostream& out) {
  const Scenario sc = load_scenario(a.scenario);
  if (a.full.empty()) throw InputError("--full is required");
  const InvariantSet full = load_invariant(a.full);
  const auto parts = load_invariants(a.invariants);
  require_fingerprint(parts, sc);
  require_fingerprint({full}, sc);
  const CompositionReport r = check_composition(full, parts, sc, a.tol);
  out << "full in conjunction: " << (r.full_in_conjunction ? "yes" : "no")
      << "; conjunction in full: " << (r.conjunction_in_full ? "yes" : "no")
      << (r.reverse_asserted ? "" : " (reported only)") << '\n';
  json j = to_json(r);
  j["command"] = "verify composition";
  maybe_write(a.out, j);
  return r.passed() ? kOk : kFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compositional invariant synthesis and monitoring for patrol coverage", "rpimon"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Synthesize invariant sets");
  synth->add_option("--scenario", sa.scenario)->required()->check(CLI::ExistingFile);
  synth->add_option("--parts", sa.parts, "Comma-separated part ids or 'all'");
  synth->add_option("--mode", sa.mode, "compositional or full");
  synth->add_option("--quant", sa.quant, "exists, forall-admissible or forall-raw");
  synth->add_option("--vertices", sa.vertices, "worst-case or all-vertices");
  synth->add_option("--tol", sa.tol)->check(CLI::PositiveNumber);
  synth->add_option("--max-iters", sa.max_iters)->check(CLI::PositiveNumber);
  synth->add_flag("--no-reduce", sa.no_reduce, "Skip redundancy removal inside iterations");
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--threads", threads)->check(CLI::PositiveNumber);

  SimArgs ma;
  auto* sim = app.add_subcommand("simulate", "Simulate the patrol and write traces");
  sim->add_option("--scenario", ma.scenario)->required()->check(CLI::ExistingFile);
  sim->add_option("--steps", ma.steps)->check(CLI::PositiveNumber);
  sim->add_option("--seed", ma.seeds, "One or more seeds")->delimiter(',');
  sim->add_option("--fault", ma.faults, "kind@step[:args], repeatable");
  sim->add_option("--factor-mode", ma.factor_mode, "worst-case, sampled or adaptive");
  sim->add_option("--policy", ma.policy, "Policy parameter JSON")->check(CLI::ExistingFile);
  sim->add_option("--out", ma.out)->required();

  MonitorArgs mo;
  auto* mon = app.add_subcommand("monitor", "Monitor a trace against invariants");
  mon->add_option("--scenario", mo.scenario)->required()->check(CLI::ExistingFile);
  mon->add_option("--invariants", mo.invariants, "Invariant files or directories")->required();
  mon->add_option("--trace", mo.trace)->required()->check(CLI::ExistingFile);
  mon->add_option("--hysteresis", mo.o.hysteresis_m)->check(CLI::PositiveNumber);
  mon->add_option("--eta", mo.o.margin_eta)->check(CLI::NonNegativeNumber);
  mon->add_flag("--anticipate", mo.o.anticipate);
  mon->add_option("--u-mode", mo.u_mode, "use-measured or quantify-offline");
  mon->add_option("--grace", mo.o.grace_window, "False-alert grace window in samples")->check(CLI::NonNegativeNumber);
  mon->add_option("--repeats", mo.o.latency_repeats, "Timing repeats per sample")->check(CLI::PositiveNumber);
  mon->add_option("--out", mo.out, "Alert report JSON");
  mon->add_option("--csv", mo.csv, "Per-step metrics CSV");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Check synthesized invariants");
  ver->require_subcommand(1);
  auto common = [&](CLI::App* c) {
    c->add_option("--scenario", va.scenario)->required()->check(CLI::ExistingFile);
    c->add_option("--out", va.out, "Report JSON");
  };
  auto* clo = ver->add_subcommand("closure", "Sampled one-step closure");
  common(clo);
  clo->add_option("--invariants", va.invariants)->required();
  clo->add_option("--samples", va.samples)->check(CLI::PositiveNumber);
  clo->add_option("--seed", va.seed);
  clo->add_option("--input-grid", va.input_grid)->check(CLI::PositiveNumber);
  auto* mx = ver->add_subcommand("maximality", "Grid search for excluded viable states");
  common(mx);
  mx->add_option("--invariants", va.invariants)->required();
  mx->add_option("--x-step", va.m.x_step)->check(CLI::PositiveNumber);
  mx->add_option("--z-step", va.m.z_step)->check(CLI::PositiveNumber);
  mx->add_option("--u-grid", va.m.u_grid)->check(CLI::PositiveNumber);
  mx->add_option("--horizon", va.m.horizon)->check(CLI::NonNegativeNumber);
  mx->add_option("--lattice-inputs", va.m.lattice_inputs)->check(CLI::Range(2, 101));
  auto* comp = ver->add_subcommand("composition", "Full invariant against the per-part conjunction");
  common(comp);
  comp->add_option("--full", va.full)->required()->check(CLI::ExistingFile);
  comp->add_option("--parts", va.invariants, "Per-part invariant files or directories")->required();
  comp->add_option("--tol", va.tol)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  try {
    if (*synth) return cmd_synth(sa, threads, out, err);
    if (*sim) return cmd_simulate(ma, out);
    if (*mon) return cmd_monitor(mo, out);
    if (*clo) return cmd_closure(va, out);
    if (*mx) return cmd_maximality(va, out, err);
    if (*comp) return cmd_composition(va, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace rpimon
