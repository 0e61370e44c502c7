#include "rpimon/monitor.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>

namespace rpimon {

using nlohmann::json;

namespace {

constexpr double kCellTol = 1e-9;

Vec to_vec(const json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string("trace: '") + what + "' must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t n = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + n, v.end());
  if (v.size() % 2) return v[n];
  const double hi = v[n];
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + n));
}

}  // namespace

std::string to_string(AlertKind k) {
  switch (k) {
    case AlertKind::none: return "none";
    case AlertKind::violation: return "violation";
    case AlertKind::imminent: return "imminent";
  }
  return "none";
}

std::string to_string(InputMode m) { return m == InputMode::use_measured ? "use_measured" : "quantify_offline"; }

InputMode parse_input_mode(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "use_measured") return InputMode::use_measured;
  if (t == "quantify_offline") return InputMode::quantify_offline;
  throw InputError("unknown input mode '" + s + "'");
}

double Monitor::Compiled::margin(const double* q, int dim) const {
  const Eigen::Map<const Vec> p(q, dim);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Min facet slack of part i, abandoned once it cannot beat `floor`.
  auto slack = [&](std::size_t i, double floor) {
    const HPolytope& P = parts[i];
    double m = kInf;
    for (int r = 0; r < P.rows() && m > floor; ++r) m = std::min(m, P.b()[r] - P.A().row(r).dot(p));
    return m;
  };
  auto in_box = [&](std::size_t i) {
    for (int d = 0; d < dim; ++d)
      if (q[d] < boxes[i].lo[d] - 1e-12 || q[d] > boxes[i].hi[d] + 1e-12) return false;
    return true;
  };
  double best = -kInf;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!in_box(i)) continue;
    best = std::max(best, slack(i, best));
    if (best >= 0) return best;
  }
  // Outside every candidate: the margin is the largest (negative) slack overall.
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (!in_box(i)) best = std::max(best, slack(i, best));
  return best;
}

Monitor::Monitor(std::vector<InvariantSet> invariants, const Scenario& sc, const MonitorOptions& opts)
    : sc_(sc), opts_(opts), ids_(sc.part_ids()), u_set_(sc.U), u_box_(bounding_box(sc.U)),
      u_center_(chebyshev_ball(sc.U).center) {
  if (invariants.empty()) throw InputError("monitor: no invariants");
  if (opts.hysteresis_m < 1) throw InputError("monitor: hysteresis must be at least 1");
  if (!(opts.margin_eta >= 0)) throw InputError("monitor: margin eta must be nonnegative");
  if (opts.grace_window < 0 || opts.latency_repeats < 1) throw InputError("monitor: invalid options");
  const std::string fp = sc.fingerprint();
  std::set<int> covered;
  for (auto& inv : invariants) {
    if (inv.fingerprint != fp) throw InputError("monitor: invariant fingerprint does not match the scenario");
    if (inv.set.dim() != inv.frame.dim()) throw InputError("monitor: invariant frame mismatch");
    Entry e;
    e.frame = inv.frame;
    for (int id : inv.frame.part_ids) {
      e.z_slots.push_back(sc.part_index(id));
      covered.insert(id);
    }
    auto compile = [&](const PolyUnion& U) {
      Compiled c;
      for (const auto& p : U.parts())
        if (chebyshev_ball(p).radius >= 0) c.parts.push_back(p);
      std::stable_sort(c.parts.begin(), c.parts.end(),
                       [](const HPolytope& a, const HPolytope& b) { return a.rows() < b.rows(); });
      for (const auto& p : c.parts) c.boxes.push_back(bounding_box(p));
      return c;
    };
    e.full = compile(inv.set);
    if (opts.u_mode == InputMode::quantify_offline || opts.anticipate)
      e.section = compile(inv.set.no_parts() ? PolyUnion(2 + inv.frame.nz()) : state_section(inv, sc));
    entries_.push_back(std::move(e));
  }
  if (covered.size() != ids_.size()) throw InputError("monitor: invariants do not cover every scenario part");
}

std::size_t Monitor::facet_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    for (const auto& p : e.full.parts) n += static_cast<std::size_t>(p.rows());
  return n;
}

Vec Monitor::clamp_input(const Vec& u, bool& clamped) const {
  clamped = false;
  if (contains(u_set_, u, 1e-12).inside) return u;
  clamped = true;
  Vec v = u.cwiseMax(u_box_.lo).cwiseMin(u_box_.hi);
  if (contains(u_set_, v, 1e-12).inside) return v;
  double lo = 0.0, hi = 1.0;  // fraction of the way from the centre to v
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (contains(u_set_, Vec(u_center_ + mid * (v - u_center_)), 0.0).inside ? lo : hi) = mid;
  }
  return u_center_ + lo * (v - u_center_);
}

Verdict Monitor::check(const Sample& s) const {
  const int n = static_cast<int>(ids_.size());
  if (s.x.size() != 2) throw InputError("sample " + std::to_string(s.k) + ": x must have 2 entries");
  if (s.z.size() != n) throw InputError("sample " + std::to_string(s.k) + ": z must have one entry per part");
  if (opts_.u_mode == InputMode::use_measured && !s.u)
    throw InputError("sample " + std::to_string(s.k) + ": u is required in use_measured mode");
  Verdict v;
  v.part_ids = ids_;
  v.h.assign(n, 1);
  v.margins.assign(n, std::numeric_limits<double>::infinity());
  std::vector<char> imm(n, 0);
  std::vector<double> xi;
  xi.reserve(16);

  std::optional<Vec> u;
  if (s.u) {
    if (s.u->size() != 2) throw InputError("sample " + std::to_string(s.k) + ": u must have 2 entries");
    u = clamp_input(*s.u, v.clamped);
  }
  const double thresh = opts_.margin_eta - default_tol();
  const bool located = opts_.anticipate && !sc_.cells_at(s.x, kCellTol).empty();

  for (const auto& e : entries_) {
    const int nz = e.frame.nz();
    xi.assign({s.x[0], s.x[1]});
    for (int k = 0; k < nz; ++k) xi.push_back(s.z[e.z_slots[k]]);
    double m;
    if (opts_.u_mode == InputMode::use_measured) {
      xi.push_back((*u)[0]);
      xi.push_back((*u)[1]);
      m = e.full.margin(xi.data(), e.frame.dim());
    } else {
      m = e.section.margin(xi.data(), 2 + nz);
    }
    const bool inside = m >= thresh;
    bool next_out = false;
    if (inside && opts_.anticipate && u && located) {
      xi.resize(2 + nz);
      xi[0] = s.x[0] + sc_.Ts * (*u)[0];
      xi[1] = s.x[1] + sc_.Ts * (*u)[1];
      for (int k = 0; k < nz; ++k) xi[2 + k] *= sc_.factor_at(e.frame.part_ids[k], s.x, kCellTol, true);
      next_out = e.section.margin(xi.data(), 2 + nz) < thresh;
    }
    for (int k = 0; k < nz; ++k) {
      const int slot = e.z_slots[k];
      v.margins[slot] = std::min(v.margins[slot], m);
      if (!inside) v.h[slot] = 0;
      if (next_out) imm[slot] = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!v.h[i]) v.offending.push_back(ids_[i]);
    else if (imm[i]) v.imminent.push_back(ids_[i]);
  }
  v.healthy = v.offending.empty();
  v.alert_kind = !v.healthy ? AlertKind::violation : !v.imminent.empty() ? AlertKind::imminent : AlertKind::none;
  return v;
}

Verdict check_sample(const Monitor& m, const Sample& s) { return m.check(s); }

AlertReport run_trace(const Monitor& mon, const std::vector<Sample>& trace, const MonitorOptions& opts) {
  using Clock = std::chrono::steady_clock;
  const Scenario& sc = mon.scenario();
  AlertReport r;
  r.part_ids = mon.part_ids();
  const int n = static_cast<int>(r.part_ids.size());
  std::vector<double> zc(n);
  for (int i = 0; i < n; ++i) zc[i] = sc.part(r.part_ids[i]).z_crit;
  std::vector<int> run(n, 0);
  std::vector<std::vector<char>> above;  // per sample, z_i >= z_crit
  std::vector<std::size_t> event_at;
  std::vector<double> lat;
  lat.reserve(trace.size());

  for (std::size_t j = 0; j < trace.size(); ++j) {
    const Sample& s = trace[j];
    if (j > 0 && s.k <= trace[j - 1].k) throw InputError("trace: step indices must be strictly increasing");
    // Batches of repeats keep the clock overhead out of sub-microsecond checks.
    Verdict v;
    const auto t0 = Clock::now();
    for (int rep = 0; rep < opts.latency_repeats; ++rep) v = mon.check(s);
    lat.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count() / opts.latency_repeats);
    if (v.clamped) {
      if (r.clamped_inputs == 0)
        std::clog << "warning: measured input at step " << s.k << " lies outside U; clamped\n";
      ++r.clamped_inputs;
    }

    StepRecord rec{s.k, s.t, v.margins, v.healthy, v.alert_kind, false, false};
    AlertEvent ev;
    ev.k = s.k;
    ev.t = s.t;
    ev.margin = std::numeric_limits<double>::infinity();
    bool any_violation = false;
    bool in_alert = false;
    std::vector<char> up(n, 0);
    for (int i = 0; i < n; ++i) {
      const int id = r.part_ids[i];
      const bool bad = !v.h[i];
      const bool flagged = bad || std::find(v.imminent.begin(), v.imminent.end(), id) != v.imminent.end();
      run[i] = flagged ? run[i] + 1 : 0;
      in_alert = in_alert || run[i] >= opts.hysteresis_m;
      if (run[i] == opts.hysteresis_m) {
        ev.parts.push_back(id);
        ev.margin = std::min(ev.margin, v.margins[i]);
        any_violation = any_violation || bad;
        r.first_alert_t.emplace(id, s.t);
      }
      if (s.z[i] >= zc[i]) {
        up[i] = 1;
        rec.baseline = true;
        r.baseline_crossing_t.emplace(id, s.t);
      }
    }
    above.push_back(std::move(up));
    r.alert_steps += in_alert;
    if (!ev.parts.empty()) {
      ev.kind = any_violation ? AlertKind::violation : AlertKind::imminent;
      rec.alert = true;
      event_at.push_back(j);
      r.events.push_back(std::move(ev));
    }
    r.steps.push_back(std::move(rec));
  }

  for (std::size_t e = 0; e < r.events.size(); ++e) {
    const std::size_t j0 = event_at[e];
    const std::size_t j1 = std::min(trace.size(), j0 + static_cast<std::size_t>(opts.grace_window) + 1);
    bool confirmed = false;
    for (int id : r.events[e].parts) {
      const int i = static_cast<int>(std::find(r.part_ids.begin(), r.part_ids.end(), id) - r.part_ids.begin());
      for (std::size_t j = j0; j < j1 && !confirmed; ++j) confirmed = above[j][i];
    }
    if (!confirmed) ++r.false_alerts;
  }
  for (const auto& [id, tb] : r.baseline_crossing_t) {
    const auto it = r.first_alert_t.find(id);
    if (it != r.first_alert_t.end()) r.lead_time[id] = tb - it->second;
  }

  r.latency.samples = lat.size();
  if (!lat.empty()) {
    r.latency.median_us = median(lat);
    r.latency.mean_us = std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(lat.size());
    r.latency.max_us = *std::max_element(lat.begin(), lat.end());
  }
  return r;
}

AlertReport run_trace(const std::vector<InvariantSet>& invariants, const std::vector<Sample>& trace,
                      const MonitorOptions& opts, const Scenario& sc) {
  const Monitor mon(invariants, sc, opts);
  return run_trace(mon, trace, opts);
}

Sample sample_from_json(const json& j) {
  if (!j.is_object()) throw InputError("trace: each line must be a JSON object");
  for (const char* key : {"k", "x", "z"})
    if (!j.contains(key)) throw InputError(std::string("trace: missing '") + key + "'");
  Sample s;
  s.k = j.at("k").get<long>();
  s.t = j.value("t", static_cast<double>(s.k));
  s.x = to_vec(j.at("x"), "x");
  s.z = to_vec(j.at("z"), "z");
  if (j.contains("u") && !j.at("u").is_null()) s.u = to_vec(j.at("u"), "u");
  if (s.z.size() && s.z.minCoeff() < 0)
    throw InputError("trace: negative z at step " + std::to_string(s.k));
  return s;
}

json to_json(const Sample& s) {
  json j{{"k", s.k}, {"t", s.t}, {"x", vec_json(s.x)}, {"z", vec_json(s.z)}};
  if (s.u) j["u"] = vec_json(*s.u);
  return j;
}

std::vector<Sample> read_trace(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sample> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace '" + path + "'");
  return read_trace(in);
}

void write_trace(std::ostream& out, const std::vector<Sample>& trace) {
  for (const auto& s : trace) out << to_json(s).dump() << '\n';
}

json to_json(const Verdict& v) {
  json h = json::array();
  for (char c : v.h) h.push_back(static_cast<bool>(c));
  return json{{"part_ids", v.part_ids}, {"h", h},        {"margins", v.margins},
              {"healthy", v.healthy},   {"alert_kind", to_string(v.alert_kind)},
              {"offending", v.offending}, {"imminent", v.imminent}};
}

json to_json(const AlertReport& r) {
  auto by_part = [](const std::map<int, double>& m) {
    json o = json::object();
    for (const auto& [id, t] : m) o[std::to_string(id)] = t;
    return o;
  };
  json events = json::array();
  for (const auto& e : r.events)
    events.push_back({{"k", e.k}, {"t", e.t}, {"kind", to_string(e.kind)}, {"parts", e.parts}, {"margin", e.margin}});
  return json{{"part_ids", r.part_ids},
              {"alerts", r.events.size()},
              {"alert_steps", r.alert_steps},
              {"events", events},
              {"first_alert_t", by_part(r.first_alert_t)},
              {"baseline_crossing_t", by_part(r.baseline_crossing_t)},
              {"lead_time", by_part(r.lead_time)},
              {"false_alerts", r.false_alerts},
              {"clamped_inputs", r.clamped_inputs},
              {"steps", r.steps.size()},
              {"timing", {{"latency_samples", r.latency.samples},
                          {"latency_median_us", r.latency.median_us},
                          {"latency_mean_us", r.latency.mean_us},
                          {"latency_max_us", r.latency.max_us}}}};
}

void write_metrics_csv(std::ostream& out, const AlertReport& r) {
  out << "step,t";
  for (int id : r.part_ids) out << ",margin_" << id;
  out << ",healthy,kind,alert,baseline\n";
  out.precision(17);
  for (const auto& s : r.steps) {
    out << s.k << ',' << s.t;
    for (double m : s.margins) out << ',' << m;
    out << ',' << s.healthy << ',' << to_string(s.kind) << ',' << s.alert << ',' << s.baseline << '\n';
  }
}

}  // namespace rpimon
