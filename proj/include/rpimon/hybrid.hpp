#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpimon/errors.hpp"
#include "rpimon/polytope.hpp"

namespace rpimon {

struct Part {
  int id = 0;
  std::string name;
  PolyUnion obs;  // observation region in the workspace
  double a_min = 0.0, a_max = 0.0;
  double b_min = 0.0, b_max = 0.0;
  double z_crit = 0.0;
  double z_init = 0.0;
};

struct Cell {
  std::string name;
  HPolytope region;
};

// Which endpoint of each factor interval a model uses. The default is the
// worst case (a_max, b_max).
struct FactorVertex {
  bool a_upper = true;
  bool b_upper = true;
  static std::vector<FactorVertex> all() {
    return {{true, true}, {true, false}, {false, true}, {false, false}};
  }
  bool operator==(const FactorVertex&) const = default;
};

class Scenario {
 public:
  std::string name;
  HPolytope workspace;
  std::vector<Cell> cells;       // partition of the workspace
  std::vector<int> traversable;  // indices into cells that the robot may occupy
  std::vector<Part> parts;
  HPolytope U;
  double Ts = 1.0;
  std::optional<Vec> x_init;
  std::vector<std::string> notes;  // validation remarks that are not errors
  std::vector<std::vector<char>> observed;  // [cell][part index]

  int part_index(int id) const;
  const Part& part(int id) const;
  std::vector<int> part_ids() const;
  bool observes(int part_id, int cell) const;

  // Union of the traversable cells.
  PolyUnion domain_x() const;
  Box domain_box() const;
  // Traversable cells containing x within tol.
  std::vector<int> cells_at(const Vec& x, double tol) const;
  int cell_index(const std::string& cell_name) const;
  double u_max() const;  // max |u|_inf over U

  double factor(int part_id, int cell, FactorVertex v = {}) const;
  // Factor at a position over all traversable cells containing it; the
  // largest when `pessimistic`, otherwise the smallest. Throws when x lies in
  // no traversable cell.
  double factor_at(int part_id, const Vec& x, double tol, bool pessimistic = true,
                   FactorVertex v = {}) const;

  nlohmann::json canonical() const;
  std::string fingerprint() const;  // SHA-256 of the canonical JSON, hex
};

// Coordinate frame of a subsystem: (x1, x2, z_i for i in part_ids, u1, u2).
struct Frame {
  std::vector<int> part_ids;
  int nz() const { return static_cast<int>(part_ids.size()); }
  int dim() const { return 4 + nz(); }
  int z_index(int k) const { return 2 + k; }
  int u_index() const { return 2 + nz(); }
  std::vector<std::string> labels() const;
  bool operator==(const Frame&) const = default;
};

// Mode of a subsystem: the cells sharing one vector of observation labels.
struct Mode {
  std::vector<int> cells;
  std::vector<HPolytope> guard;
  std::vector<double> factors;  // one per part of the subsystem
  std::vector<char> observed;
  std::string label() const;
};

struct JointState {
  Vec x;
  Vec z;
  Vec u;
};

Scenario build_scenario(const nlohmann::json& config);
Scenario load_scenario(const std::string& path);

// Axis-aligned decomposition of a box against a set of boxes (y-slabs split
// at the x-breakpoints of the boxes they cross).
std::vector<HPolytope> slab_decomposition(const Box& X, const std::vector<Box>& obs, double tol);

// Traversable cells not contained in the part's observation region. With
// `exclusive`, cells observed by any other part are dropped as well.
std::vector<HPolytope> unobserved_cells(const Scenario& sc, int part_id, bool exclusive = false);

std::vector<Mode> modes(const Scenario& sc, const std::vector<int>& part_ids, FactorVertex v = {});
// Mode whose guard contains x (first match); nullptr when none.
const Mode* mode_at(const std::vector<Mode>& ms, const Vec& x, double tol);

JointState successor(const JointState& s, const Vec& next_u, const Mode& m, const Scenario& sc);

}  // namespace rpimon
