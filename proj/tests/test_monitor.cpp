#include <doctest.h>

#include <climits>
#include <random>
#include <sstream>

#include "rpimon/sim.hpp"
#include "rpimon/verify.hpp"

using namespace rpimon;

namespace {

const Scenario& running() {
  static const Scenario sc = load_scenario(std::string(RPIMON_SOURCE_DIR) + "/scenarios/running_example.json");
  return sc;
}

const std::vector<InvariantSet>& parts() {
  static const std::vector<InvariantSet> p = synthesize_parts(running(), {1, 2}, SynthOptions{});
  return p;
}

Sample sample(long k, double x1, double x2, double z1, double z2, std::optional<std::pair<double, double>> u) {
  Sample s;
  s.k = k;
  s.t = static_cast<double>(k);
  s.x = Vec(2);
  s.x << x1, x2;
  s.z = Vec(2);
  s.z << z1, z2;
  if (u) {
    Vec v(2);
    v << u->first, u->second;
    s.u = v;
  }
  return s;
}

std::vector<Sample> loiter_trace() {
  return simulate(running(), PolicyParams{}, {parse_fault("loiter@50:corridor")}, 120, 1).trace;
}

}  // namespace

TEST_CASE("healthy sample") {
  const Monitor m(parts(), running());
  const Verdict v = m.check(sample(0, 1.0, 1.5, 0.5, 0.5, {{0, 0}}));
  CHECK(v.healthy);
  CHECK(v.alert_kind == AlertKind::none);
  CHECK(v.offending.empty());
  CHECK(v.margins[0] > 0);
  CHECK(v.margins[1] > 0);
}

TEST_CASE("z beyond the critical level is a violation") {
  const Monitor m(parts(), running());
  const Verdict v = m.check(sample(0, 1.0, 1.5, 4.1, 0.5, {{0, 0}}));
  CHECK_FALSE(v.healthy);
  CHECK(v.alert_kind == AlertKind::violation);
  CHECK(v.offending == std::vector<int>{1});
  CHECK(v.h[1]);
  CHECK(v.margins[0] < 0);
}

TEST_CASE("input leaving the workspace next step") {
  const Sample s = sample(0, 4.5, 1.5, 0.5, 0.5, {{0.6, 0}});
  MonitorOptions o;
  o.u_mode = InputMode::quantify_offline;
  o.anticipate = true;
  const Verdict soon = Monitor(parts(), running(), o).check(s);
  CHECK(soon.healthy);
  CHECK(soon.alert_kind == AlertKind::imminent);
  CHECK(soon.imminent == std::vector<int>{1, 2});

  const Verdict now = Monitor(parts(), running()).check(s);
  CHECK(now.alert_kind == AlertKind::violation);
}

TEST_CASE("monitor input errors") {
  const Monitor m(parts(), running());
  CHECK_THROWS_AS(m.check(sample(0, 1, 1.5, 0.5, 0.5, std::nullopt)), InputError);
  InvariantSet wrong = parts()[0];
  wrong.fingerprint = "deadbeef";
  CHECK_THROWS_AS(Monitor({wrong, parts()[1]}, running()), InputError);
  CHECK_THROWS_AS(Monitor({parts()[0]}, running()), InputError);
  MonitorOptions o;
  o.hysteresis_m = 0;
  CHECK_THROWS_AS(Monitor(parts(), running(), o), InputError);
}

TEST_CASE("out-of-range inputs are clamped") {
  const Monitor m(parts(), running());
  const Verdict v = m.check(sample(0, 1.0, 1.5, 0.5, 0.5, {{2.0, 0}}));
  CHECK(v.clamped);
  const Verdict same = m.check(sample(0, 1.0, 1.5, 0.5, 0.5, {{0.6, 0}}));
  CHECK(v.margins == same.margins);
}

TEST_CASE("per-part checks agree with the conjunction set") {
  const Scenario& sc = running();
  InvariantSet conj = parts()[0];
  conj.frame = Frame{{1, 2}};
  conj.set = conjunction(parts(), conj.frame, sc);
  const Monitor per(parts(), sc);
  const Monitor joint({conj}, sc);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> x1(0.3, 4.7), x2(0.8, 2.2), z(0, 4.2), u(-0.6, 0.6);
  int disagree = 0, healthy = 0;
  for (int i = 0; i < 2000; ++i) {
    const Sample s = sample(i, x1(rng), x2(rng), z(rng), z(rng), {{u(rng), u(rng)}});
    const bool a = per.check(s).healthy;
    healthy += a;
    disagree += a != joint.check(s).healthy;
  }
  CHECK(disagree == 0);
  CHECK(healthy > 0);
}

TEST_CASE("margin sign convention") {
  MonitorOptions o;
  o.margin_eta = 0.05;
  const Monitor m(parts(), running(), o);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> x1(0.3, 4.7), x2(0.8, 2.2), z(0, 4.2), u(-0.6, 0.6);
  for (int i = 0; i < 500; ++i) {
    const Verdict v = m.check(sample(i, x1(rng), x2(rng), z(rng), z(rng), {{u(rng), u(rng)}}));
    for (std::size_t p = 0; p < 2; ++p) {
      if (v.margins[p] >= 0.05) CHECK(v.h[p]);
      if (v.margins[p] < -1e-7) CHECK_FALSE(v.h[p]);
    }
  }
}

TEST_CASE("hysteresis and eta monotonicity") {
  const auto trace = loiter_trace();
  int prev = INT_MAX;
  for (int m = 1; m <= 5; ++m) {
    MonitorOptions o;
    o.hysteresis_m = m;
    const int n = run_trace(parts(), trace, o, running()).alert_steps;
    CHECK(n <= prev);
    prev = n;
  }
  int last = 0;
  for (double eta : {0.0, 0.05, 0.1, 0.3}) {
    MonitorOptions o;
    o.margin_eta = eta;
    o.anticipate = true;
    const int n = run_trace(parts(), trace, o, running()).alert_steps;
    CHECK(n >= last);
    last = n;
  }
}

TEST_CASE("loiter trace alerts before the threshold baseline") {
  MonitorOptions o;
  o.hysteresis_m = 2;
  const AlertReport r = run_trace(parts(), loiter_trace(), o, running());
  for (int id : {1, 2}) {
    REQUIRE(r.lead_time.count(id));
    CHECK(r.lead_time.at(id) > 0);
  }
  CHECK(r.false_alerts == 0);
}

TEST_CASE("healthy patrol raises nothing") {
  const auto trace = simulate(running(), PolicyParams{}, {}, 300, 1).trace;
  MonitorOptions o;
  o.anticipate = true;
  const AlertReport r = run_trace(parts(), trace, o, running());
  CHECK(r.events.empty());
  CHECK(r.alert_steps == 0);
  CHECK(r.false_alerts == 0);
  CHECK(r.baseline_crossing_t.empty());
}

TEST_CASE("false alerts are counted against the grace window") {
  // Parked at part 2 with part 1 already out of reach, but never critical.
  std::vector<Sample> trace;
  for (int k = 0; k < 40; ++k) trace.push_back(sample(k, 4.0, 1.5, 3.9, 0.5, {{0, 0}}));
  MonitorOptions o;
  const AlertReport r = run_trace(parts(), trace, o, running());
  CHECK(r.events.size() == 1);
  CHECK(r.false_alerts == 1);
  trace.back().z[0] = 4.5;
  o.grace_window = 39;
  CHECK(run_trace(parts(), trace, o, running()).false_alerts == 0);
}

TEST_CASE("single inside sample gives an empty report") {
  const AlertReport r = run_trace(parts(), {sample(0, 1.0, 1.5, 0.5, 0.5, {{0, 0}})}, {}, running());
  CHECK(r.events.empty());
  CHECK(r.lead_time.empty());
  CHECK(r.steps.size() == 1);
}

TEST_CASE("trace indices must increase") {
  const std::vector<Sample> t{sample(3, 1, 1.5, 0.5, 0.5, {{0, 0}}), sample(3, 1, 1.5, 0.5, 0.5, {{0, 0}})};
  CHECK_THROWS_AS(run_trace(parts(), t, {}, running()), InputError);
}

TEST_CASE("trace JSON lines round trip") {
  const auto trace = simulate(running(), PolicyParams{}, {}, 20, 3).trace;
  std::stringstream ss;
  write_trace(ss, trace);
  const auto back = read_trace(ss);
  REQUIRE(back.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(back[i].k == trace[i].k);
    CHECK(back[i].x == trace[i].x);
    CHECK(back[i].z == trace[i].z);
    CHECK(*back[i].u == *trace[i].u);
  }
  std::stringstream bad("{\"k\":0,\"x\":[1,1],\"z\":[-1,0]}\n");
  CHECK_THROWS_AS(read_trace(bad), InputError);
  std::stringstream junk("not json\n");
  CHECK_THROWS_AS(read_trace(junk), InputError);
}

TEST_CASE("metrics CSV has one row per step") {
  const AlertReport r = run_trace(parts(), simulate(running(), PolicyParams{}, {}, 10, 1).trace, {}, running());
  std::stringstream ss;
  write_metrics_csv(ss, r);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "step,t,margin_1,margin_2,healthy,kind,alert,baseline");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 11);
}

TEST_CASE("latency statistics are populated") {
  MonitorOptions o;
  o.latency_repeats = 3;
  const AlertReport r = run_trace(parts(), simulate(running(), PolicyParams{}, {}, 10, 1).trace, o, running());
  CHECK(r.latency.samples == 11);
  CHECK(r.latency.median_us > 0);
  CHECK(r.latency.max_us >= r.latency.median_us);
}
