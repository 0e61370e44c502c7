#include <stdexcept>

#include "rpimon/polytope.hpp"

namespace rpimon {

using nlohmann::json;

namespace {

json part_json(const HPolytope& P) {
  json rows = json::array();
  for (int i = 0; i < P.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < P.dim(); ++j) row.push_back(P.A()(i, j));
    rows.push_back(std::move(row));
  }
  json b = json::array();
  for (int i = 0; i < P.rows(); ++i) b.push_back(P.b()[i]);
  return json{{"A", std::move(rows)}, {"b", std::move(b)}};
}

Vec vec_from(const json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

json to_json(const PolyUnion& U) {
  json parts = json::array();
  for (const auto& p : U.parts()) parts.push_back(part_json(p));
  return json{{"dim", U.dim()}, {"parts", std::move(parts)}};
}

json to_json(const HPolytope& P) { return to_json(PolyUnion(P)); }

HPolytope polytope_from_json(const json& j, int dim_hint) {
  if (j.contains("box")) {
    const json& bx = j.at("box");
    if (!bx.is_array() || bx.size() != 2) throw std::invalid_argument("box: expected [lo, hi]");
    const Vec lo = vec_from(bx[0]);
    const Vec hi = vec_from(bx[1]);
    if ((hi.array() < lo.array()).any()) throw std::invalid_argument("box: hi < lo");
    return HPolytope::box(lo, hi);
  }
  if (j.contains("parts")) {
    const PolyUnion u = poly_union_from_json(j);
    if (u.size() != 1) throw std::invalid_argument("expected exactly one polytope part");
    return u.parts().front();
  }
  const json& A = j.at("A");
  const json& b = j.at("b");
  if (A.size() != b.size()) throw std::invalid_argument("polytope: A/b size mismatch");
  int d = dim_hint;
  if (!A.empty()) d = static_cast<int>(A[0].size());
  if (j.contains("dim")) d = j.at("dim").get<int>();
  if (d <= 0) throw std::invalid_argument("polytope: unknown dimension");
  if (A.empty()) return HPolytope(d);
  Mat M(static_cast<Eigen::Index>(A.size()), d);
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (static_cast<int>(A[i].size()) != d) throw std::invalid_argument("polytope: ragged A");
    for (int k = 0; k < d; ++k) M(static_cast<Eigen::Index>(i), k) = A[i][k].get<double>();
  }
  return HPolytope(std::move(M), vec_from(b));
}

PolyUnion poly_union_from_json(const json& j) {
  const int d = j.at("dim").get<int>();
  PolyUnion u(d);
  for (const auto& p : j.at("parts")) u.add(polytope_from_json(p, d));
  return u;
}

}  // namespace rpimon
