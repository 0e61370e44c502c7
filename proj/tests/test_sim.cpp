#include <doctest.h>

#include <random>
#include <sstream>

#include "rpimon/sim.hpp"

using namespace rpimon;

namespace {

const Scenario& running() {
  static const Scenario sc = load_scenario(std::string(RPIMON_SOURCE_DIR) + "/scenarios/running_example.json");
  return sc;
}

SimState at(double x1, double x2, double z1, double z2) {
  SimState s;
  s.x = Vec(2);
  s.x << x1, x2;
  s.z = Vec(2);
  s.z << z1, z2;
  return s;
}

std::string dump(const SimResult& r) {
  std::stringstream ss;
  write_trace(ss, r.trace);
  write_truth(ss, r.truth);
  return ss.str();
}

}  // namespace

TEST_CASE("greedy target is the largest z") {
  SimState s = at(2.5, 1.5, 3, 1);
  const Vec u = policy_decide(s, running(), PolicyParams{});
  CHECK(s.target == 1);
  CHECK(u[0] < 0);
  CHECK(u.lpNorm<Eigen::Infinity>() <= 0.6 + 1e-12);
  CHECK(u[1] == doctest::Approx(0.0));
}

TEST_CASE("dwell completes below the target level") {
  SimState s = at(1.0, 1.5, 0.5, 3);
  s.target = 1;
  const Vec u = policy_decide(s, running(), PolicyParams{});
  CHECK(s.target == 2);
  CHECK(s.released_at.at(1) == 0.0);
  CHECK(u[0] > 0);
}

TEST_CASE("ties go to the lower id") {
  SimState s = at(2.5, 1.5, 2, 2);
  policy_decide(s, running(), PolicyParams{});
  CHECK(s.target == 1);
}

TEST_CASE("parked robot holds inside the band") {
  SimState s = at(1.0, 1.5, 0.5, 1.1);
  const Vec u = policy_decide(s, running(), PolicyParams{});
  CHECK(s.target == 0);
  CHECK(u.isZero());
}

TEST_CASE("decay adaptation") {
  CHECK(adapt_decay(4, 4, 0.65, 0.8, 2) == doctest::Approx(0.65));
  CHECK(adapt_decay(4, 9, 0.65, 0.8, 2) == doctest::Approx(0.8));
  CHECK(adapt_decay(2, 3, 0.65, 0.8, 2) == doctest::Approx(0.725));
  CHECK(adapt_decay(0, 3, 0.65, 0.8, 2) == doctest::Approx(0.65));
  CHECK_THROWS_AS(adapt_decay(1, 1, 0.65, 0.8, 1.0), InputError);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> c(1, 50);
  for (int i = 0; i < 1000; ++i) {
    const long p = c(rng), a = c(rng), b = c(rng);
    const double lo = adapt_decay(p, std::min(a, b), 0.65, 0.8, 2.5);
    const double hi = adapt_decay(p, std::max(a, b), 0.65, 0.8, 2.5);
    CHECK(lo <= hi);
    CHECK(lo >= 0.65);
    CHECK(hi <= 0.8);
  }
}

TEST_CASE("healthy worst-case patrol keeps every z below critical") {
  const SimResult r = simulate(running(), PolicyParams{}, {}, 300, 1);
  CHECK(r.trace.size() == 301);
  for (const auto& s : r.trace)
    for (int i = 0; i < 2; ++i) CHECK(s.z[i] <= 4.0);
}

TEST_CASE("loitering in the corridor grows both parts by b") {
  const SimResult r = simulate(running(), PolicyParams{}, {parse_fault("loiter@50:corridor")}, 100, 1);
  int pinned = 0;
  for (std::size_t k = 50; k + 1 < r.trace.size(); ++k) {
    CHECK(r.truth[k].fault_active);
    if (r.truth[k].cell != "corridor") continue;
    ++pinned;
    for (int i = 0; i < 2; ++i) CHECK(r.trace[k + 1].z[i] == 1.15 * r.trace[k].z[i]);
  }
  CHECK(pinned > 40);
  CHECK_FALSE(r.truth[49].fault_active);
}

TEST_CASE("one frozen step") {
  const SimResult r = simulate(running(), PolicyParams{}, {parse_fault("freeze@0")}, 1, 1);
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace[1].x == r.trace[0].x);
  CHECK(r.trace[0].u->isZero());
  for (int i = 0; i < 2; ++i) CHECK(r.trace[1].z[i] == 1.15 * r.trace[0].z[i]);
}

TEST_CASE("runs are reproducible from the seed") {
  for (FactorMode m : {FactorMode::worst_case, FactorMode::sampled, FactorMode::adaptive})
    CHECK(dump(simulate(running(), PolicyParams{}, {}, 200, 9, m)) ==
          dump(simulate(running(), PolicyParams{}, {}, 200, 9, m)));
  CHECK(dump(simulate(running(), PolicyParams{}, {}, 200, 9, FactorMode::sampled)) !=
        dump(simulate(running(), PolicyParams{}, {}, 200, 10, FactorMode::sampled)));
}

TEST_CASE("recorded z follows the drawn factors exactly and matches the cell") {
  const Scenario& sc = running();
  for (FactorMode m : {FactorMode::worst_case, FactorMode::sampled}) {
    const SimResult r = simulate(sc, PolicyParams{}, {parse_fault("loiter@120")}, 200, 4, m);
    for (std::size_t k = 0; k + 1 < r.trace.size(); ++k) {
      const int c = sc.cell_index(r.truth[k].cell);
      CHECK(contains(sc.cells[c].region, r.trace[k].x, 1e-9).inside);
      for (int i = 0; i < 2; ++i) {
        const Part& p = sc.parts[i];
        const double g = r.truth[k].factors[i];
        CHECK(r.trace[k + 1].z[i] == g * r.trace[k].z[i]);
        if (sc.observed[c][i]) {
          CHECK(g >= p.a_min);
          CHECK(g <= p.a_max);
        } else {
          CHECK(g >= p.b_min);
          CHECK(g <= p.b_max);
        }
      }
    }
  }
}

TEST_CASE("sampled runs keep b constant") {
  const SimResult r = simulate(running(), PolicyParams{}, {parse_fault("loiter@10:corridor")}, 60, 2,
                               FactorMode::sampled);
  double b = 0;
  for (std::size_t k = 0; k < r.truth.size(); ++k) {
    if (r.truth[k].cell != "corridor") continue;
    if (b == 0) b = r.truth[k].factors[0];
    CHECK(r.truth[k].factors[0] == b);
  }
  CHECK(b > 1.0);
}

TEST_CASE("spoofed z differs from ground truth") {
  const SimResult r = simulate(running(), PolicyParams{}, {parse_fault("spoof_z@30:-0.5:1")}, 60, 1);
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    if (k < 30) {
      CHECK(r.trace[k].z == r.truth[k].z_true);
    } else {
      CHECK(r.trace[k].z[0] == doctest::Approx(std::max(0.0, r.truth[k].z_true[0] - 0.5)));
      CHECK(r.trace[k].z[1] == r.truth[k].z_true[1]);
    }
  }
}

TEST_CASE("placed objects drive the adaptive decay") {
  PolicyParams p;
  p.objects["obs1"] = 3;
  const SimResult r = simulate(running(), p, {}, 60, 1, FactorMode::adaptive);
  bool slowed = false;
  for (const auto& t : r.truth)
    if (t.cell == "obs1" && t.factors[0] > 0.65) slowed = true;
  CHECK(slowed);
}

TEST_CASE("fault parsing") {
  const FaultSpec l = parse_fault("loiter@50:corridor");
  CHECK(l.kind == FaultKind::loiter);
  CHECK(l.activation == 50);
  CHECK(l.cell == "corridor");
  const FaultSpec s = parse_fault("spoof_z@30:-1.5:2");
  CHECK(s.offset == -1.5);
  CHECK(s.part_id == 2);
  CHECK_THROWS_AS(parse_fault("loiter"), InputError);
  CHECK_THROWS_AS(parse_fault("wobble@3"), InputError);
  CHECK_THROWS_AS(parse_fault("freeze@x"), InputError);
  CHECK_THROWS_AS(parse_fault("spoof_z@3"), InputError);
  CHECK_THROWS_AS(simulate(running(), PolicyParams{}, {parse_fault("loiter@1:nowhere")}, 5, 1), InputError);
}

TEST_CASE("simulation input validation") {
  CHECK_THROWS_AS(simulate(running(), PolicyParams{}, {}, 0, 1), InputError);
  PolicyParams p;
  p.default_z_tar = 4.0;
  CHECK_THROWS_AS(simulate(running(), p, {}, 5, 1), InputError);
}
