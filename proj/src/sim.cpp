#include "rpimon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace rpimon {

using nlohmann::json;

namespace {

constexpr double kCellTol = 1e-9;

Vec part_center(const Part& p) {
  const HPolytope* best = nullptr;
  double r = -1;
  for (const auto& q : p.obs.parts()) {
    const double rq = chebyshev_ball(q).radius;
    if (rq > r) {
      r = rq;
      best = &q;
    }
  }
  return chebyshev_ball(*best).center;
}

// Cells (over the whole partition) containing x, lowest index first.
std::vector<int> cells_containing(const Scenario& sc, const Vec& x) {
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(sc.cells.size()); ++c)
    if (contains(sc.cells[c].region, x, kCellTol).inside) out.push_back(c);
  return out;
}

Vec clamp_to_workspace(const Scenario& sc, const Vec& x) {
  if (contains(sc.workspace, x, 0.0).inside) return x;
  const Box b = bounding_box(sc.workspace);
  return x.cwiseMax(b.lo).cwiseMin(b.hi);
}

std::string mode_label(const Scenario& sc, int cell) {
  std::string s;
  for (std::size_t i = 0; i < sc.parts.size(); ++i) {
    if (i) s += ',';
    s += sc.observed[cell][i] ? "obs" : "unobs";
  }
  return s;
}

Vec steer(const Scenario& sc, const PolicyParams& p, const Vec& x, const Vec& goal) {
  const Vec d = goal - x;
  if (d.lpNorm<Eigen::Infinity>() <= p.waypoint_tol) return Vec::Zero(2);
  return scale_into(sc.U, Vec(p.gain * d / sc.Ts));
}

}  // namespace

double PolicyParams::target_level(int part_id) const {
  const auto it = z_tar.find(part_id);
  return it == z_tar.end() ? default_z_tar : it->second;
}

std::string to_string(FaultKind k) {
  switch (k) {
    case FaultKind::loiter: return "loiter";
    case FaultKind::freeze: return "freeze";
    case FaultKind::spoof_z: return "spoof_z";
  }
  return "loiter";
}

std::string to_string(FactorMode m) {
  switch (m) {
    case FactorMode::worst_case: return "worst_case";
    case FactorMode::sampled: return "sampled";
    case FactorMode::adaptive: return "adaptive";
  }
  return "worst_case";
}

FactorMode parse_factor_mode(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "worst_case") return FactorMode::worst_case;
  if (t == "sampled") return FactorMode::sampled;
  if (t == "adaptive") return FactorMode::adaptive;
  throw InputError("unknown factor mode '" + s + "'");
}

FaultSpec parse_fault(const std::string& s) {
  const auto at = s.find('@');
  if (at == std::string::npos) throw InputError("fault '" + s + "': expected kind@step");
  std::vector<std::string> fields;
  std::string rest = s.substr(at + 1);
  for (std::size_t pos = 0;;) {
    const auto c = rest.find(':', pos);
    fields.push_back(rest.substr(pos, c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  FaultSpec f;
  std::string kind = s.substr(0, at);
  std::replace(kind.begin(), kind.end(), '-', '_');
  if (kind == "loiter") f.kind = FaultKind::loiter;
  else if (kind == "freeze") f.kind = FaultKind::freeze;
  else if (kind == "spoof_z") f.kind = FaultKind::spoof_z;
  else throw InputError("fault '" + s + "': unknown kind '" + kind + "'");
  try {
    std::size_t used = 0;
    f.activation = std::stol(fields[0], &used);
    if (used != fields[0].size()) throw std::invalid_argument("trailing");
    if (f.kind == FaultKind::loiter && fields.size() > 1) f.cell = fields[1];
    if (f.kind == FaultKind::spoof_z) {
      if (fields.size() < 2) throw InputError("fault '" + s + "': spoof_z needs an offset");
      f.offset = std::stod(fields[1]);
      if (fields.size() > 2) f.part_id = std::stoi(fields[2]);
    }
  } catch (const std::logic_error&) {
    throw InputError("fault '" + s + "': malformed numbers");
  }
  if (f.activation < 0) throw InputError("fault '" + s + "': activation must be nonnegative");
  return f;
}

Vec scale_into(const HPolytope& U, const Vec& u) {
  if (contains(U, u, 0.0).inside) return u;
  double t = 1.0;
  bool radial = true;
  for (int r = 0; r < U.rows(); ++r) {
    if (U.b()[r] < 0) radial = false;
    const double au = U.A().row(r).dot(u);
    if (au > 0) t = std::min(t, U.b()[r] / au);
  }
  if (radial) return t * u;
  const Box b = bounding_box(U);
  return u.cwiseMax(b.lo).cwiseMin(b.hi);
}

double adapt_decay(long c_prev, long c_now, double a_min, double a_max, double r_max) {
  if (!(r_max > 1)) throw InputError("adapt_decay: r_max must exceed 1");
  if (c_prev <= 0) {
    std::clog << "warning: adapt_decay called with a nonpositive previous count; using a_min\n";
    return a_min;
  }
  const double r = static_cast<double>(c_now) / static_cast<double>(c_prev);
  const double a = a_min + (std::min(r, r_max) - 1.0) / (r_max - 1.0) * (a_max - a_min);
  return std::clamp(a, a_min, a_max);
}

Vec policy_decide(SimState& s, const Scenario& sc, const PolicyParams& p) {
  if (s.target != 0) {
    const int i = sc.part_index(s.target);
    const Vec c = part_center(sc.part(s.target));
    const bool arrived = (c - s.x).lpNorm<Eigen::Infinity>() <= p.waypoint_tol;
    if (arrived && s.z[i] < p.target_level(s.target)) {
      s.released_at[s.target] = s.t;
      s.target = 0;
    } else {
      return steer(sc, p, s.x, c);
    }
  }
  // The band only applies while parked in an observation region; elsewhere
  // holding still starves every part.
  bool parked = false;
  for (const auto& part : sc.parts) parked = parked || contains(part.obs, s.x, kCellTol).inside;
  int pick = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 2 && pick == 0; ++pass) {
    for (std::size_t i = 0; i < sc.parts.size(); ++i) {
      const int id = sc.parts[i].id;
      if (pass == 0) {
        const auto rel = s.released_at.find(id);
        if (rel != s.released_at.end() && s.t - rel->second < p.tau_min) continue;
      }
      if (parked && s.z[i] < p.target_level(id) + p.band) continue;
      if (s.z[i] > best || (s.z[i] == best && id < pick)) {
        best = s.z[i];
        pick = id;
      }
    }
    if (parked) break;
  }
  s.target = pick;
  if (pick == 0) return Vec::Zero(2);
  return steer(sc, p, s.x, part_center(sc.part(pick)));
}

SimResult simulate(const Scenario& sc, const PolicyParams& params, const std::vector<FaultSpec>& faults,
                   int steps, std::uint64_t seed, FactorMode mode) {
  if (steps < 1) throw InputError("simulate: steps must be at least 1");
  if (!sc.x_init) throw InputError("simulate: scenario has no x_init");
  if (!(params.band >= 0) || !(params.tau_min >= 0) || !(params.gain > 0) || !(params.gain <= 1))
    throw InputError("simulate: invalid policy parameters");
  for (const auto& p : sc.parts) {
    const double zt = params.target_level(p.id);
    if (!(zt >= 0) || !(zt < p.z_crit)) throw InputError("simulate: z_tar must lie in [0, z_crit)");
  }
  for (const auto& [cell, n] : params.objects) {
    sc.cell_index(cell);
    if (n < 0) throw InputError("simulate: object counts must be nonnegative");
  }
  for (const auto& f : faults)
    if (f.kind == FaultKind::loiter && !f.cell.empty()) sc.cell_index(f.cell);

  const int n = static_cast<int>(sc.parts.size());
  std::mt19937_64 rng(seed);
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) {
    const Part& p = sc.parts[i];
    b[i] = mode == FactorMode::sampled ? std::uniform_real_distribution<double>(p.b_min, p.b_max)(rng) : p.b_max;
  }

  SimState s;
  s.x = *sc.x_init;
  s.z.resize(n);
  for (int i = 0; i < n; ++i) {
    s.z[i] = sc.parts[i].z_init;
    s.detections[sc.parts[i].id] = 1;
  }
  std::optional<Vec> loiter_goal;

  SimResult out;
  for (long k = 0; k <= steps; ++k) {
    s.k = k;
    s.t = static_cast<double>(k) * sc.Ts;
    const auto cs = cells_containing(sc, s.x);
    if (cs.empty()) throw std::logic_error("simulate: robot at " + std::to_string(s.x[0]) + "," +
                                           std::to_string(s.x[1]) + " lies in no cell");
    // On a boundary, the cell with the most unobserved parts (the worst case).
    int cell = cs.front();
    auto unseen = [&](int c) { return std::count(sc.observed[c].begin(), sc.observed[c].end(), 0); };
    for (int c : cs)
      if (unseen(c) > unseen(cell)) cell = c;

    // Motion first so the recorded sample carries the input applied at k.
    const FaultSpec* motion = nullptr;
    bool any_active = false;
    for (const auto& f : faults) {
      if (k < f.activation) continue;
      any_active = true;
      if (f.kind != FaultKind::spoof_z && (!motion || f.activation >= motion->activation)) motion = &f;
    }
    Vec u;
    if (!motion) {
      u = policy_decide(s, sc, params);
    } else if (motion->kind == FaultKind::freeze) {
      u = Vec::Zero(2);
    } else {
      if (!loiter_goal) {
        const int lc = motion->cell.empty() ? cell : sc.cell_index(motion->cell);
        loiter_goal = chebyshev_ball(sc.cells[lc].region).center;
      }
      u = steer(sc, params, s.x, *loiter_goal);
    }

    // Detections on entering a cell with placed objects.
    std::map<int, long> prev = s.detections;
    if (cell != s.last_cell) {
      const auto it = params.objects.find(sc.cells[cell].name);
      if (it != params.objects.end() && it->second > 0)
        for (int i = 0; i < n; ++i)
          if (sc.observed[cell][i]) s.detections[sc.parts[i].id] += it->second;
      s.last_cell = cell;
    }

    TruthRecord tr;
    tr.k = k;
    tr.cell = sc.cells[cell].name;
    tr.mode = mode_label(sc, cell);
    tr.fault_active = any_active;
    tr.z_true = s.z;
    tr.factors.resize(n);
    for (int i = 0; i < n; ++i) {
      const Part& p = sc.parts[i];
      if (!sc.observed[cell][i]) {
        tr.factors[i] = b[i];
      } else if (mode == FactorMode::worst_case) {
        tr.factors[i] = p.a_max;
      } else if (mode == FactorMode::sampled) {
        tr.factors[i] = std::uniform_real_distribution<double>(p.a_min, p.a_max)(rng);
      } else {
        tr.factors[i] = adapt_decay(prev[p.id], s.detections[p.id], p.a_min, p.a_max, params.r_max);
      }
    }

    Sample smp;
    smp.k = k;
    smp.t = s.t;
    smp.x = s.x;
    smp.z = s.z;
    smp.u = u;
    for (const auto& f : faults) {
      if (f.kind != FaultKind::spoof_z || k < f.activation) continue;
      for (int i = 0; i < n; ++i)
        if (f.part_id == 0 || f.part_id == sc.parts[i].id) smp.z[i] = std::max(0.0, smp.z[i] + f.offset);
    }
    out.trace.push_back(std::move(smp));
    out.truth.push_back(std::move(tr));
    if (k == steps) break;

    const auto& g = out.truth.back().factors;
    for (int i = 0; i < n; ++i) s.z[i] = g[i] * s.z[i];
    s.x = clamp_to_workspace(sc, Vec(s.x + sc.Ts * u));
  }
  return out;
}

json to_json(const TruthRecord& r) {
  return json{{"k", r.k},
              {"cell", r.cell},
              {"mode", r.mode},
              {"factors", r.factors},
              {"fault_active", r.fault_active},
              {"z_true", std::vector<double>(r.z_true.data(), r.z_true.data() + r.z_true.size())}};
}

void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth) {
  for (const auto& r : truth) out << to_json(r).dump() << '\n';
}

PolicyParams policy_from_json(const json& j) {
  PolicyParams p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw InputError("policy: expected an object");
  try {
    if (j.contains("z_tar")) {
      const json& zt = j.at("z_tar");
      if (zt.is_number()) {
        p.default_z_tar = zt.get<double>();
      } else {
        for (const auto& [id, v] : zt.items()) p.z_tar[std::stoi(id)] = v.get<double>();
      }
    }
    p.band = j.value("band", p.band);
    p.tau_min = j.value("tau_min", p.tau_min);
    p.waypoint_tol = j.value("waypoint_tol", p.waypoint_tol);
    p.gain = j.value("gain", p.gain);
    p.r_max = j.value("r_max", p.r_max);
    if (j.contains("objects"))
      for (const auto& [cell, v] : j.at("objects").items()) p.objects[cell] = v.get<int>();
  } catch (const std::logic_error& e) {
    throw InputError(std::string("policy: ") + e.what());
  }
  return p;
}

}  // namespace rpimon
