#include <algorithm>

#include "rpimon/verify.hpp"

namespace rpimon {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxWitnesses = 5;

std::vector<Vec> witnesses(const PolyUnion& A, const PolyUnion& B, double tol) {
  std::vector<Vec> out;
  const PolyUnion diff = region_diff(A, B, tol);
  for (const auto& p : diff.parts()) {
    const ChebyshevBall cb = chebyshev_ball(p);
    if (cb.radius < tol) continue;
    out.push_back(cb.center);
    if (out.size() >= kMaxWitnesses) break;
  }
  return out;
}

json points(const std::vector<Vec>& ps) {
  json out = json::array();
  for (const auto& p : ps) out.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  return out;
}

}  // namespace

PolyUnion lift(const InvariantSet& inv, const Frame& target) {
  std::vector<int> map{0, 1};
  for (int id : inv.frame.part_ids) {
    const auto it = std::find(target.part_ids.begin(), target.part_ids.end(), id);
    if (it == target.part_ids.end())
      throw InputError("lift: part " + std::to_string(id) + " is not in the target frame");
    map.push_back(target.z_index(static_cast<int>(it - target.part_ids.begin())));
  }
  map.push_back(target.u_index());
  map.push_back(target.u_index() + 1);
  return embed(inv.set, target.dim(), map);
}

PolyUnion conjunction(const std::vector<InvariantSet>& parts, const Frame& target, const Scenario& sc) {
  const double tol = default_tol();
  PolyUnion acc = domain(sc, target);
  for (const auto& p : parts) acc = intersect(acc, lift(p, target), tol);
  return acc;
}

CompositionReport check_composition(const InvariantSet& full, const std::vector<InvariantSet>& parts,
                                    const Scenario& sc, double tol) {
  if (parts.empty()) throw InputError("check_composition: no per-part invariants");
  std::vector<int> covered;
  for (const auto& p : parts) {
    if (p.fingerprint != full.fingerprint || full.fingerprint != sc.fingerprint())
      throw InputError("check_composition: invariants come from different scenarios");
    if (p.set.dim() != p.frame.dim()) throw InputError("check_composition: frame mismatch");
    covered.insert(covered.end(), p.frame.part_ids.begin(), p.frame.part_ids.end());
  }
  std::sort(covered.begin(), covered.end());
  std::vector<int> want = full.frame.part_ids;
  std::sort(want.begin(), want.end());
  if (covered != want) throw InputError("check_composition: per-part invariants do not cover the full frame");

  CompositionReport r;
  r.reverse_asserted = full.quant != Quantifier::exists;
  r.full_in_conjunction = true;
  for (const auto& p : parts) {
    const PolyUnion lifted = lift(p, full.frame);
    if (!union_subset(full.set, lifted, tol)) {
      r.full_in_conjunction = false;
      for (auto& w : witnesses(full.set, lifted, tol))
        if (r.witnesses_full.size() < kMaxWitnesses) r.witnesses_full.push_back(std::move(w));
    }
  }
  const PolyUnion conj = conjunction(parts, full.frame, sc);
  r.conjunction_in_full = union_subset(conj, full.set, tol);
  if (!r.conjunction_in_full) r.witnesses_conj = witnesses(conj, full.set, tol);
  return r;
}

json to_json(const CompositionReport& r) {
  return json{{"full_in_conjunction", r.full_in_conjunction},
              {"conjunction_in_full", r.conjunction_in_full},
              {"reverse_asserted", r.reverse_asserted},
              {"passed", r.passed()},
              {"witnesses_full", points(r.witnesses_full)},
              {"witnesses_conjunction", points(r.witnesses_conj)}};
}

}  // namespace rpimon
