#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpimon/hybrid.hpp"
#include "rpimon/polytope.hpp"

namespace rpimon {

enum class Quantifier { exists, forall_admissible, forall_raw };
enum class VertexStrategy { worst_case, all_vertices };

std::string to_string(Quantifier q);
std::string to_string(VertexStrategy v);
Quantifier parse_quantifier(const std::string& s);  // accepts '-' or '_'
VertexStrategy parse_vertex_strategy(const std::string& s);

struct SynthOptions {
  double tol = 1e-7;  // fixed-point tolerance
  int max_iters = 200;
  Quantifier quant = Quantifier::exists;
  VertexStrategy vertices = VertexStrategy::worst_case;
  bool reduce_every_iter = true;
};

struct IterationStats {
  int iteration = 0;
  std::size_t polytopes = 0;
  std::size_t facets = 0;
  double seconds = 0.0;
};

struct SynthesisReport {
  std::vector<IterationStats> iterations;
  std::string termination;  // fixed_point | empty | max_iters
  bool degenerate = false;  // empty, or collapsed onto the z = 0 slice
  double seconds = 0.0;
};

struct InvariantSet {
  Frame frame;
  PolyUnion set;
  Quantifier quant = Quantifier::exists;
  std::vector<FactorVertex> vertices;
  int iterations = 0;
  bool converged = false;
  std::string fingerprint;
  SynthOptions options;
  SynthesisReport report;
};

// D = (traversable cells) x prod [0, z_crit] x U in the frame.
PolyUnion domain(const Scenario& sc, const Frame& f);
// B = (traversable cells) x prod [0, z_crit] in the (x, z) frame.
PolyUnion state_box(const Scenario& sc, const Frame& f);

PolyUnion input_section(const PolyUnion& S, const Scenario& sc, const Frame& f, Quantifier q);
PolyUnion pre_mode(const PolyUnion& section, const Mode& m, const Scenario& sc, const Frame& f,
                   bool reduce_parts = true);

// Called with (iteration, iterate) for the initial domain and every iterate.
using IterationObserver = std::function<void(int, const PolyUnion&)>;

InvariantSet rpi_fixed_point(const std::vector<Mode>& ms, const Scenario& sc,
                             const std::vector<int>& part_ids, const SynthOptions& opts,
                             const IterationObserver& observer = {});

// Runs the fixed point for the configured vertex strategy; all_vertices
// intersects the four vertex-wise invariants.
InvariantSet synthesize(const Scenario& sc, const std::vector<int>& part_ids,
                        const SynthOptions& opts, const IterationObserver& observer = {});
// Independent per-part syntheses on up to `threads` workers, in id order.
std::vector<InvariantSet> synthesize_parts(const Scenario& sc, const std::vector<int>& part_ids,
                                           const SynthOptions& opts, int threads = 1);

// Largest z_k over the iterate at position x with u = 0.
double loiter_z_bound(const PolyUnion& S, const Frame& f, const Vec& x, int k);

// (x, z) section of an invariant under its own quantifier, for monitoring
// without measured inputs.
PolyUnion state_section(const InvariantSet& inv, const Scenario& sc);

nlohmann::json to_json(const InvariantSet& inv);
InvariantSet invariant_from_json(const nlohmann::json& j);
InvariantSet load_invariant(const std::string& path);
void save_invariant(const InvariantSet& inv, const std::string& path);

}  // namespace rpimon
