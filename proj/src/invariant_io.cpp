#include <fstream>

#include "rpimon/synthesis.hpp"

namespace rpimon {

using nlohmann::json;

namespace {

json vertex_json(const FactorVertex& v) {
  return json{{"a", v.a_upper ? "max" : "min"}, {"b", v.b_upper ? "max" : "min"}};
}

FactorVertex vertex_from(const json& j) {
  return FactorVertex{j.at("a").get<std::string>() == "max", j.at("b").get<std::string>() == "max"};
}

}  // namespace

json to_json(const InvariantSet& inv) {
  json j;
  j["frame"] = inv.frame.labels();
  j["part_ids"] = inv.frame.part_ids;
  j["set"] = to_json(inv.set);
  j["quantifier"] = to_string(inv.quant);
  json vs = json::array();
  for (const auto& v : inv.vertices) vs.push_back(vertex_json(v));
  j["vertices"] = std::move(vs);
  j["iterations"] = inv.iterations;
  j["converged"] = inv.converged;
  j["scenario_fingerprint"] = inv.fingerprint;
  j["options"] = {{"tol", inv.options.tol},
                  {"max_iters", inv.options.max_iters},
                  {"input_quant", to_string(inv.options.quant)},
                  {"vertex_strategy", to_string(inv.options.vertices)},
                  {"reduce_every_iter", inv.options.reduce_every_iter}};
  json its = json::array();
  json secs = json::array();
  for (const auto& s : inv.report.iterations) {
    its.push_back({{"iteration", s.iteration}, {"polytopes", s.polytopes}, {"facets", s.facets}});
    secs.push_back(s.seconds);
  }
  j["report"] = {{"iterations", std::move(its)},
                 {"termination", inv.report.termination},
                 {"degenerate", inv.report.degenerate}};
  j["timing"] = {{"total_seconds", inv.report.seconds}, {"iteration_seconds", std::move(secs)}};
  return j;
}

InvariantSet invariant_from_json(const json& j) {
  InvariantSet inv;
  try {
    inv.frame.part_ids = j.at("part_ids").get<std::vector<int>>();
    if (j.at("frame").get<std::vector<std::string>>() != inv.frame.labels())
      throw InputError("invariant: frame labels do not match part ids");
    inv.set = poly_union_from_json(j.at("set"));
    if (inv.set.dim() != inv.frame.dim()) throw InputError("invariant: set dimension does not match frame");
    inv.quant = parse_quantifier(j.at("quantifier").get<std::string>());
    for (const auto& v : j.at("vertices")) inv.vertices.push_back(vertex_from(v));
    inv.iterations = j.at("iterations").get<int>();
    inv.converged = j.at("converged").get<bool>();
    inv.fingerprint = j.at("scenario_fingerprint").get<std::string>();
    const json& o = j.at("options");
    inv.options.tol = o.at("tol").get<double>();
    inv.options.max_iters = o.at("max_iters").get<int>();
    inv.options.quant = parse_quantifier(o.at("input_quant").get<std::string>());
    inv.options.vertices = parse_vertex_strategy(o.at("vertex_strategy").get<std::string>());
    inv.options.reduce_every_iter = o.value("reduce_every_iter", true);
    if (j.contains("report")) {
      const json& r = j.at("report");
      const json secs = j.contains("timing") ? j.at("timing").value("iteration_seconds", json::array()) : json::array();
      std::size_t i = 0;
      for (const auto& s : r.at("iterations")) {
        IterationStats st{s.at("iteration").get<int>(), s.at("polytopes").get<std::size_t>(),
                          s.at("facets").get<std::size_t>(), i < secs.size() ? secs[i].get<double>() : 0.0};
        inv.report.iterations.push_back(st);
        ++i;
      }
      inv.report.termination = r.value("termination", std::string());
      inv.report.degenerate = r.value("degenerate", false);
    }
    if (j.contains("timing")) inv.report.seconds = j.at("timing").value("total_seconds", 0.0);
  } catch (const json::exception& e) {
    throw InputError(std::string("invariant: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("invariant: ") + e.what());
  }
  return inv;
}

InvariantSet load_invariant(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open invariant file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return invariant_from_json(j);
}

void save_invariant(const InvariantSet& inv, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << to_json(inv).dump(1) << "\n";
}

}  // namespace rpimon
