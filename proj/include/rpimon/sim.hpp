#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpimon/monitor.hpp"

namespace rpimon {

struct PolicyParams {
  std::map<int, double> z_tar;  // per part; parts not listed use default_z_tar
  double default_z_tar = 1.0;
  double band = 0.2;
  double tau_min = 5.0;  // seconds
  double waypoint_tol = 0.05;
  double gain = 1.0;  // proportional step, fraction of the remaining distance per Ts
  double r_max = 2.0;
  std::map<std::string, int> objects;  // placed objects per cell name

  double target_level(int part_id) const;
};

enum class FaultKind { loiter, freeze, spoof_z };

struct FaultSpec {
  FaultKind kind = FaultKind::loiter;
  long activation = 0;
  std::string cell;      // loiter target cell; empty = the cell the robot is in
  double offset = 0.0;   // spoof_z
  int part_id = 0;       // spoof_z target; 0 = every part
};

enum class FactorMode { worst_case, sampled, adaptive };

std::string to_string(FaultKind k);
std::string to_string(FactorMode m);
FactorMode parse_factor_mode(const std::string& s);
// "loiter@50", "loiter@50:corridor", "freeze@20", "spoof_z@30:-1.5", "spoof_z@30:-1.5:2".
FaultSpec parse_fault(const std::string& s);

struct SimState {
  long k = 0;
  double t = 0.0;
  Vec x;
  Vec z;  // true values, scenario part order
  int target = 0;  // part id, 0 = none
  std::map<int, double> released_at;
  std::map<int, long> detections;  // C_i
  int last_cell = -1;
};

struct TruthRecord {
  long k = 0;
  std::string cell;
  std::string mode;  // obs/unobs label per part
  std::vector<double> factors;
  bool fault_active = false;
  Vec z_true;
};

struct SimResult {
  std::vector<Sample> trace;
  std::vector<TruthRecord> truth;
};

// Greedy patrol input; updates the target bookkeeping in `s`.
Vec policy_decide(SimState& s, const Scenario& sc, const PolicyParams& p);

double adapt_decay(long c_prev, long c_now, double a_min, double a_max, double r_max);

// Largest step along u that stays in U.
Vec scale_into(const HPolytope& U, const Vec& u);

SimResult simulate(const Scenario& sc, const PolicyParams& params, const std::vector<FaultSpec>& faults,
                   int steps, std::uint64_t seed, FactorMode mode = FactorMode::worst_case);

nlohmann::json to_json(const TruthRecord& r);
void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth);

PolicyParams policy_from_json(const nlohmann::json& j);

}  // namespace rpimon
