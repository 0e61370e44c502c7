#include "rpimon/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace rpimon {

using nlohmann::json;

namespace {

constexpr double kCheckTol = 1e-6;

std::string fmt_point(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

Vec vec_from(const json& j, int expect, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != expect)
    throw InputError(what + ": expected an array of " + std::to_string(expect) + " numbers");
  Vec v(expect);
  for (int i = 0; i < expect; ++i) v[i] = j[i].get<double>();
  return v;
}

HPolytope polytope_2d(const json& j, const std::string& what) {
  HPolytope p;
  try {
    p = polytope_from_json(j, 2);
  } catch (const std::exception& e) {
    throw InputError(what + ": " + e.what());
  }
  if (p.dim() != 2) throw InputError(what + ": expected a planar set");
  return p;
}

PolyUnion obs_from_json(const json& pj, const std::string& what) {
  if (pj.contains("square")) {
    const json& sq = pj.at("square");
    const Vec c = vec_from(sq.at("center"), 2, what + ".square.center");
    const double h = sq.at("half_side").get<double>();
    if (!(h > 0)) throw InputError(what + ".square.half_side must be positive");
    return PolyUnion(HPolytope::box(c.array() - h, c.array() + h));
  }
  if (!pj.contains("obs")) throw InputError(what + ": needs \"square\" or \"obs\"");
  const json& o = pj.at("obs");
  PolyUnion u(2);
  if (o.is_array()) {
    for (const auto& p : o) u.add(polytope_2d(p, what + ".obs"));
  } else if (o.contains("parts")) {
    try {
      u = poly_union_from_json(o);
    } catch (const std::exception& e) {
      throw InputError(what + ".obs: " + e.what());
    }
    if (u.dim() != 2) throw InputError(what + ".obs: expected a planar set");
  } else {
    u.add(polytope_2d(o, what + ".obs"));
  }
  if (u.no_parts()) throw InputError(what + ".obs is empty");
  return u;
}

void interval(const json& pj, const char* key, double& lo, double& hi, const std::string& what) {
  if (pj.contains(key)) {
    const json& iv = pj.at(key);
    if (!iv.is_array() || iv.size() != 2) throw InputError(what + "." + key + ": expected [min, max]");
    lo = iv[0].get<double>();
    hi = iv[1].get<double>();
    return;
  }
  const std::string k(key);
  if (!pj.contains(k + "_min") || !pj.contains(k + "_max"))
    throw InputError(what + ": missing factor interval \"" + k + "\"");
  lo = pj.at(k + "_min").get<double>();
  hi = pj.at(k + "_max").get<double>();
}

bool axis_aligned(const HPolytope& p) {
  for (int i = 0; i < p.rows(); ++i) {
    int nz = 0;
    for (int j = 0; j < p.dim(); ++j)
      if (std::abs(p.A()(i, j)) > 1e-12) ++nz;
    if (nz != 1) return false;
  }
  return true;
}

void sorted_unique(std::vector<double>& v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x > out.back() + tol) out.push_back(x);
  v = std::move(out);
}

std::string sha256_hex(const std::string& s) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(s.data(), s.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void validate_partition(const Scenario& sc) {
  PolyUnion all(2);
  for (const auto& c : sc.cells) {
    if (chebyshev_ball(c.region).radius < kCheckTol)
      throw InputError("cell '" + c.name + "' is empty or degenerate");
    all.add(c.region);
  }
  const PolyUnion X(sc.workspace);
  const PolyUnion gap = region_diff(X, all, kCheckTol);
  for (const auto& g : gap.parts()) {
    const ChebyshevBall cb = chebyshev_ball(g);
    if (cb.radius >= kCheckTol)
      throw InputError("cells leave a coverage gap near " + fmt_point(cb.center));
  }
  if (!union_subset(all, X, kCheckTol)) throw InputError("cells extend outside the workspace");
  for (std::size_t i = 0; i < sc.cells.size(); ++i)
    for (std::size_t j = i + 1; j < sc.cells.size(); ++j) {
      const HPolytope both = sc.cells[i].region.stacked(sc.cells[j].region);
      if (chebyshev_ball(both).radius >= kCheckTol)
        throw InputError("cells '" + sc.cells[i].name + "' and '" + sc.cells[j].name + "' overlap");
    }
}

}  // namespace

// --- Scenario ---------------------------------------------------------------

int Scenario::part_index(int id) const {
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].id == id) return static_cast<int>(i);
  throw InputError("unknown part id " + std::to_string(id));
}

const Part& Scenario::part(int id) const { return parts[part_index(id)]; }

std::vector<int> Scenario::part_ids() const {
  std::vector<int> ids;
  for (const auto& p : parts) ids.push_back(p.id);
  return ids;
}

bool Scenario::observes(int part_id, int cell) const {
  return observed.at(cell).at(part_index(part_id)) != 0;
}

PolyUnion Scenario::domain_x() const {
  PolyUnion u(2);
  for (int c : traversable) u.add(cells[c].region);
  return u;
}

Box Scenario::domain_box() const {
  Box out{Vec::Constant(2, std::numeric_limits<double>::infinity()),
          Vec::Constant(2, -std::numeric_limits<double>::infinity())};
  for (int c : traversable) {
    const Box b = bounding_box(cells[c].region);
    out.lo = out.lo.cwiseMin(b.lo);
    out.hi = out.hi.cwiseMax(b.hi);
  }
  return out;
}

std::vector<int> Scenario::cells_at(const Vec& x, double tol) const {
  std::vector<int> out;
  for (int c : traversable)
    if (contains(cells[c].region, x, tol).inside) out.push_back(c);
  return out;
}

int Scenario::cell_index(const std::string& cell_name) const {
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].name == cell_name) return static_cast<int>(i);
  throw InputError("unknown cell '" + cell_name + "'");
}

double Scenario::u_max() const {
  const Box b = bounding_box(U);
  return std::max(b.lo.cwiseAbs().maxCoeff(), b.hi.cwiseAbs().maxCoeff());
}

double Scenario::factor(int part_id, int cell, FactorVertex v) const {
  const Part& p = part(part_id);
  if (observes(part_id, cell)) return v.a_upper ? p.a_max : p.a_min;
  return v.b_upper ? p.b_max : p.b_min;
}

double Scenario::factor_at(int part_id, const Vec& x, double tol, bool pessimistic,
                           FactorVertex v) const {
  const auto cs = cells_at(x, tol);
  if (cs.empty()) throw InputError("position " + fmt_point(x) + " lies in no traversable cell");
  double g = factor(part_id, cs.front(), v);
  for (int c : cs) g = pessimistic ? std::max(g, factor(part_id, c, v)) : std::min(g, factor(part_id, c, v));
  return g;
}

json Scenario::canonical() const {
  json j;
  j["workspace"] = to_json(workspace);
  j["Ts"] = Ts;
  j["U"] = to_json(U);
  json ps = json::array();
  for (const auto& p : parts)
    ps.push_back({{"id", p.id},
                  {"name", p.name},
                  {"obs", to_json(p.obs)},
                  {"a", {p.a_min, p.a_max}},
                  {"b", {p.b_min, p.b_max}},
                  {"z_crit", p.z_crit},
                  {"z_init", p.z_init}});
  j["parts"] = std::move(ps);
  json cs = json::array();
  for (const auto& c : cells) cs.push_back({{"name", c.name}, {"region", to_json(c.region)}});
  j["cells"] = std::move(cs);
  json tr = json::array();
  for (int c : traversable) tr.push_back(cells[c].name);
  j["traversable"] = std::move(tr);
  j["x_init"] = x_init ? json{(*x_init)[0], (*x_init)[1]} : json(nullptr);
  return j;
}

std::string Scenario::fingerprint() const { return sha256_hex(canonical().dump()); }

std::vector<std::string> Frame::labels() const {
  std::vector<std::string> out{"x1", "x2"};
  for (int id : part_ids) out.push_back("z" + std::to_string(id));
  out.push_back("u1");
  out.push_back("u2");
  return out;
}

std::string Mode::label() const {
  std::string s;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (i) s += ",";
    s += observed[i] ? "obs" : "unobs";
  }
  return s;
}

// --- construction -----------------------------------------------------------

std::vector<HPolytope> slab_decomposition(const Box& X, const std::vector<Box>& obs, double tol) {
  std::vector<double> ys{X.lo[1], X.hi[1]};
  for (const auto& o : obs) {
    if (o.lo[1] > X.lo[1] + tol && o.lo[1] < X.hi[1] - tol) ys.push_back(o.lo[1]);
    if (o.hi[1] > X.lo[1] + tol && o.hi[1] < X.hi[1] - tol) ys.push_back(o.hi[1]);
  }
  sorted_unique(ys, tol);
  std::vector<HPolytope> out;
  for (std::size_t s = 0; s + 1 < ys.size(); ++s) {
    const double y0 = ys[s], y1 = ys[s + 1];
    std::vector<double> xs{X.lo[0], X.hi[0]};
    for (const auto& o : obs) {
      if (!(o.lo[1] < y1 - tol && o.hi[1] > y0 + tol)) continue;
      if (o.lo[0] > X.lo[0] + tol && o.lo[0] < X.hi[0] - tol) xs.push_back(o.lo[0]);
      if (o.hi[0] > X.lo[0] + tol && o.hi[0] < X.hi[0] - tol) xs.push_back(o.hi[0]);
    }
    sorted_unique(xs, tol);
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      Vec lo(2), hi(2);
      lo << xs[k], y0;
      hi << xs[k + 1], y1;
      out.push_back(HPolytope::box(lo, hi));
    }
  }
  return out;
}

Scenario build_scenario(const json& cfg) {
  Scenario sc;
  try {
    sc.name = cfg.value("name", std::string("scenario"));
    if (!cfg.contains("workspace")) throw InputError("scenario: missing \"workspace\"");
    sc.workspace = polytope_2d(cfg.at("workspace"), "workspace");
    if (chebyshev_ball(sc.workspace).radius < kCheckTol) throw InputError("workspace is empty");
    const Box wb = bounding_box(sc.workspace);
    if (!wb.lo.allFinite() || !wb.hi.allFinite()) throw InputError("workspace must be bounded");

    sc.Ts = cfg.value("Ts", 1.0);
    if (!(sc.Ts > 0) || !std::isfinite(sc.Ts)) throw InputError("Ts must be positive");

    if (!cfg.contains("U")) throw InputError("scenario: missing \"U\"");
    sc.U = polytope_2d(cfg.at("U"), "U");
    const Box ub = bounding_box(sc.U);
    if (!ub.lo.allFinite() || !ub.hi.allFinite()) throw InputError("U must be bounded");
    if (chebyshev_ball(sc.U).radius < -1e-12) throw InputError("U is empty");
    if (!contains(sc.U, Vec::Zero(2), kCheckTol).inside) sc.notes.push_back("U does not contain the origin");

    if (!cfg.contains("parts") || !cfg.at("parts").is_array() || cfg.at("parts").empty())
      throw InputError("scenario: \"parts\" must be a nonempty array");
    std::set<int> ids;
    const PolyUnion X(sc.workspace);
    for (const auto& pj : cfg.at("parts")) {
      Part p;
      p.id = pj.at("id").get<int>();
      const std::string what = "part " + std::to_string(p.id);
      if (!ids.insert(p.id).second) throw InputError("duplicate " + what);
      p.name = pj.value("name", "part" + std::to_string(p.id));
      p.obs = obs_from_json(pj, what);
      interval(pj, "a", p.a_min, p.a_max, what);
      interval(pj, "b", p.b_min, p.b_max, what);
      if (!(0 < p.a_min && p.a_min <= p.a_max && p.a_max < 1))
        throw InputError(what + ": decay factors need 0 < a_min <= a_max < 1");
      if (!(1 < p.b_min && p.b_min <= p.b_max && std::isfinite(p.b_max)))
        throw InputError(what + ": growth factors need 1 < b_min <= b_max");
      if (!pj.contains("z_crit")) throw InputError(what + ": missing z_crit");
      p.z_crit = pj.at("z_crit").get<double>();
      if (!(p.z_crit > 0) || !std::isfinite(p.z_crit)) throw InputError(what + ": z_crit must be positive");
      p.z_init = pj.value("z_init", 0.0);
      if (!(p.z_init >= 0)) throw InputError(what + ": z_init must be nonnegative");
      if (!union_subset(p.obs, X, kCheckTol)) throw InputError(what + ": observation region leaves the workspace");
      sc.parts.push_back(std::move(p));
    }

    const bool auto_cells = !cfg.contains("cells") ||
                            (cfg.at("cells").is_string() && cfg.at("cells").get<std::string>() == "auto");
    if (auto_cells) {
      if (!axis_aligned(sc.workspace)) throw InputError("automatic cells need a box workspace");
      std::vector<Box> boxes;
      for (const auto& p : sc.parts)
        for (const auto& o : p.obs.parts()) {
          if (!axis_aligned(o))
            throw InputError("automatic cells need axis-aligned observation boxes (part " +
                             std::to_string(p.id) + ")");
          boxes.push_back(bounding_box(o));
        }
      int k = 0;
      for (auto& c : slab_decomposition(wb, boxes, kCheckTol))
        sc.cells.push_back({"c" + std::to_string(k++), std::move(c)});
    } else {
      if (!cfg.at("cells").is_array()) throw InputError("\"cells\" must be \"auto\" or an array");
      std::set<std::string> names;
      int k = 0;
      for (const auto& cj : cfg.at("cells")) {
        Cell c;
        c.name = cj.value("name", "c" + std::to_string(k));
        if (!names.insert(c.name).second) throw InputError("duplicate cell name '" + c.name + "'");
        c.region = polytope_2d(cj.contains("region") ? cj.at("region") : cj, "cell " + c.name);
        sc.cells.push_back(std::move(c));
        ++k;
      }
    }
    validate_partition(sc);

    sc.observed.assign(sc.cells.size(), std::vector<char>(sc.parts.size(), 0));
    for (std::size_t c = 0; c < sc.cells.size(); ++c)
      for (std::size_t i = 0; i < sc.parts.size(); ++i) {
        const PolyUnion cell(sc.cells[c].region);
        if (union_subset(cell, sc.parts[i].obs, kCheckTol)) {
          sc.observed[c][i] = 1;
          continue;
        }
        for (const auto& o : sc.parts[i].obs.parts())
          if (chebyshev_ball(sc.cells[c].region.stacked(o)).radius >= kCheckTol)
            throw InputError("cell '" + sc.cells[c].name + "' is partly inside the observation region of part " +
                             std::to_string(sc.parts[i].id));
      }

    if (cfg.contains("traversable")) {
      std::set<int> tr;
      for (const auto& n : cfg.at("traversable")) tr.insert(sc.cell_index(n.get<std::string>()));
      if (tr.empty()) throw InputError("\"traversable\" is empty");
      sc.traversable.assign(tr.begin(), tr.end());
    } else {
      for (std::size_t c = 0; c < sc.cells.size(); ++c) sc.traversable.push_back(static_cast<int>(c));
    }

    if (cfg.contains("x_init") && !cfg.at("x_init").is_null()) {
      sc.x_init = vec_from(cfg.at("x_init"), 2, "x_init");
      if (sc.cells_at(*sc.x_init, kCheckTol).empty()) throw InputError("x_init lies in no traversable cell");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario: ") + e.what());
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return build_scenario(j);
}

// --- queries ----------------------------------------------------------------

std::vector<HPolytope> unobserved_cells(const Scenario& sc, int part_id, bool exclusive) {
  const int pi = sc.part_index(part_id);
  std::vector<HPolytope> out;
  for (int c : sc.traversable) {
    if (sc.observed[c][pi]) continue;
    if (exclusive && std::any_of(sc.observed[c].begin(), sc.observed[c].end(), [](char o) { return o; }))
      continue;
    out.push_back(sc.cells[c].region);
  }
  return out;
}

std::vector<Mode> modes(const Scenario& sc, const std::vector<int>& part_ids, FactorVertex v) {
  if (part_ids.empty()) throw InputError("modes: empty part subset");
  std::set<int> seen;
  std::vector<int> idx;
  for (int id : part_ids) {
    if (!seen.insert(id).second) throw InputError("modes: duplicate part id " + std::to_string(id));
    idx.push_back(sc.part_index(id));
  }
  std::vector<Mode> out;
  std::map<std::vector<char>, std::size_t> by_label;
  for (int c : sc.traversable) {
    std::vector<char> lab;
    for (int i : idx) lab.push_back(sc.observed[c][i]);
    auto it = by_label.find(lab);
    if (it == by_label.end()) {
      Mode m;
      m.observed = lab;
      for (int id : part_ids) m.factors.push_back(sc.factor(id, c, v));
      it = by_label.emplace(lab, out.size()).first;
      out.push_back(std::move(m));
    }
    out[it->second].cells.push_back(c);
    out[it->second].guard.push_back(sc.cells[c].region);
  }
  return out;
}

const Mode* mode_at(const std::vector<Mode>& ms, const Vec& x, double tol) {
  for (const auto& m : ms)
    for (const auto& g : m.guard)
      if (contains(g, x, tol).inside) return &m;
  return nullptr;
}

JointState successor(const JointState& s, const Vec& next_u, const Mode& m, const Scenario& sc) {
  if (s.x.size() != 2 || s.u.size() != 2 || next_u.size() != 2)
    throw InputError("successor: position and inputs must be planar");
  if (s.z.size() != static_cast<Eigen::Index>(m.factors.size()))
    throw InputError("successor: z has " + std::to_string(s.z.size()) + " entries, mode has " +
                     std::to_string(m.factors.size()) + " factors");
  const bool in_guard =
      std::any_of(m.guard.begin(), m.guard.end(), [&](const HPolytope& g) { return contains(g, s.x, kCheckTol).inside; });
  if (!in_guard) {
    const auto cs = sc.cells_at(s.x, kCheckTol);
    std::string where = cs.empty() ? "no traversable cell" : "cell '" + sc.cells[cs.front()].name + "'";
    throw InputError("successor: x=" + fmt_point(s.x) + " lies in " + where + ", outside the guard of mode " +
                     m.label());
  }
  JointState n;
  n.x = s.x + sc.Ts * s.u;
  n.z = s.z;
  for (int i = 0; i < n.z.size(); ++i) n.z[i] = m.factors[i] * s.z[i];
  n.u = next_u;
  return n;
}

}  // namespace rpimon
