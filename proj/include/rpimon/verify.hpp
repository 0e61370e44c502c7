#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "rpimon/synthesis.hpp"

namespace rpimon {

struct CompositionReport {
  bool full_in_conjunction = false;  // full ⊆ Ŝ
  bool conjunction_in_full = false;  // Ŝ ⊆ full
  bool reverse_asserted = true;      // false under exists semantics
  std::vector<Vec> witnesses_full;   // points of full \ Ŝ
  std::vector<Vec> witnesses_conj;   // points of Ŝ \ full
  bool passed() const {
    return full_in_conjunction && (conjunction_in_full || !reverse_asserted);
  }
};

// Lifts a per-part invariant into a frame containing its parts.
PolyUnion lift(const InvariantSet& inv, const Frame& target);
// D ∩ ⋂ lift(S_i) in the frame of `full`.
PolyUnion conjunction(const std::vector<InvariantSet>& parts, const Frame& target, const Scenario& sc);

CompositionReport check_composition(const InvariantSet& full, const std::vector<InvariantSet>& parts,
                                    const Scenario& sc, double tol);

struct ClosureReport {
  int samples = 0;
  int passed = 0;
  int skipped = 0;  // parts where rejection sampling found no interior point
  std::uint64_t seed = 0;
  double membership_tol = 0.0;
  std::vector<std::pair<Vec, Vec>> counterexamples;  // (state, successor x,z)
  double fraction() const { return samples ? static_cast<double>(passed) / samples : 0.0; }
};

ClosureReport verify_one_step_closure(const InvariantSet& inv, const Scenario& sc, int samples,
                                      std::uint64_t seed, int input_grid = 5);

struct MaximalityReport {
  int grid_states = 0;   // states of the grid inside D
  int excluded = 0;      // of those, outside the invariant
  int certified = 0;     // excluded and provably leaving D within the horizon
  int uncertified = 0;
  int contradictions = 0;  // excluded but a surviving input strategy exists
  bool lattice_converged = true;
  std::vector<Vec> contradiction_states;
  double uncertified_fraction() const { return excluded ? static_cast<double>(uncertified) / excluded : 0.0; }
};

struct MaximalityOptions {
  double x_step = 0.25;
  double z_step = 0.25;
  int u_grid = 5;     // grid points per input axis for the scanned states
  int horizon = 20;
  int lattice_inputs = 5;  // per axis, for the surviving-strategy search
};

enum class StateClass { inside, certified, uncertified, contradiction };

// Classifies single (x, z, u) states of the grid scan; the lattice kernel is
// cached across calls.
class MaximalityOracle {
 public:
  MaximalityOracle(const InvariantSet& inv, const Scenario& sc, const MaximalityOptions& opts = {});
  ~MaximalityOracle();
  StateClass classify(const Vec& state);
  bool lattice_converged() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

MaximalityReport verify_maximality(const InvariantSet& inv, const Scenario& sc,
                                   const MaximalityOptions& opts = {});

nlohmann::json to_json(const CompositionReport& r);
nlohmann::json to_json(const ClosureReport& r);
nlohmann::json to_json(const MaximalityReport& r);

}  // namespace rpimon
