#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpimon/synthesis.hpp"

namespace rpimon {

struct Sample {
  long k = 0;
  double t = 0.0;
  Vec x;                 // R^2
  Vec z;                 // one entry per scenario part, in scenario order
  std::optional<Vec> u;  // R^2
};

enum class AlertKind { none, violation, imminent };
enum class InputMode { use_measured, quantify_offline };

std::string to_string(AlertKind k);
std::string to_string(InputMode m);
InputMode parse_input_mode(const std::string& s);

struct Verdict {
  std::vector<int> part_ids;  // scenario order
  std::vector<char> h;        // per part
  std::vector<double> margins;
  bool healthy = true;
  AlertKind alert_kind = AlertKind::none;
  std::vector<int> offending;     // h_i false
  std::vector<int> imminent;      // inside now, successor outside
  bool clamped = false;
};

struct MonitorOptions {
  int hysteresis_m = 1;
  double margin_eta = 0.0;
  bool anticipate = false;
  InputMode u_mode = InputMode::use_measured;
  int grace_window = 30;  // samples
  int latency_repeats = 1;
};

struct AlertEvent {
  long k = 0;
  double t = 0.0;
  AlertKind kind = AlertKind::none;
  std::vector<int> parts;
  double margin = 0.0;  // smallest margin over the alerting parts
};

struct StepRecord {
  long k = 0;
  double t = 0.0;
  std::vector<double> margins;
  bool healthy = true;
  AlertKind kind = AlertKind::none;
  bool alert = false;
  bool baseline = false;
};

struct LatencyStats {
  std::size_t samples = 0;
  double median_us = 0.0;
  double mean_us = 0.0;
  double max_us = 0.0;
};

struct AlertReport {
  std::vector<int> part_ids;
  std::vector<AlertEvent> events;  // onsets: a part reaches hysteresis_m consecutive flags
  int alert_steps = 0;             // samples with at least one part in alert
  std::map<int, double> first_alert_t;       // per part
  std::map<int, double> baseline_crossing_t;  // first z_i >= z_crit
  std::map<int, double> lead_time;           // crossing - first alert, when both exist
  int false_alerts = 0;
  int clamped_inputs = 0;
  std::vector<StepRecord> steps;
  LatencyStats latency;
};

// Membership checker for a set of invariants whose frames partition (or
// cover) the scenario parts. Invariants are immutable after construction.
class Monitor {
 public:
  Monitor(std::vector<InvariantSet> invariants, const Scenario& sc, const MonitorOptions& opts = {});
  Verdict check(const Sample& s) const;
  const std::vector<int>& part_ids() const { return ids_; }
  const Scenario& scenario() const { return sc_; }
  std::size_t facet_count() const;

 private:
  struct Compiled {
    std::vector<HPolytope> parts;  // sorted by facet count
    std::vector<Box> boxes;
    double margin(const double* p, int dim) const;
  };
  struct Entry {
    Frame frame;
    std::vector<int> z_slots;  // scenario index per frame z
    Compiled full;             // (x, z, u) set
    Compiled section;          // (x, z) set
  };

  Vec clamp_input(const Vec& u, bool& clamped) const;

  const Scenario& sc_;
  MonitorOptions opts_;
  std::vector<int> ids_;
  std::vector<Entry> entries_;
  HPolytope u_set_;
  Box u_box_;
  Vec u_center_;
};

Verdict check_sample(const Monitor& m, const Sample& s);
AlertReport run_trace(const Monitor& m, const std::vector<Sample>& trace, const MonitorOptions& opts);
AlertReport run_trace(const std::vector<InvariantSet>& invariants, const std::vector<Sample>& trace,
                      const MonitorOptions& opts, const Scenario& sc);

Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Sample& s);
std::vector<Sample> read_trace(std::istream& in);
std::vector<Sample> load_trace(const std::string& path);
void write_trace(std::ostream& out, const std::vector<Sample>& trace);

nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const AlertReport& r);
void write_metrics_csv(std::ostream& out, const AlertReport& r);

}  // namespace rpimon
