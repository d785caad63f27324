#pragma once

// File formats: JSON configs and plans, JSONL samples and trial logs, CSV
// tables, the observation CSV and the gaze model report.
//
// Config objects are flat JSON with one key per field; absent keys keep
// their defaults and unknown keys are rejected.

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gazeattn/experiment.hpp"
#include "gazeattn/gaze_models.hpp"
#include "gazeattn/simulation.hpp"

namespace gazeattn::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      it->get_to(out);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigInvalid, std::string("field '") + key + "': " + e.what());
    }
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, std::string(where) + " must be an object");
  std::set<std::string> k(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!k.count(key)) {
      throw Error(ErrorKind::ConfigInvalid, std::string("unknown key '") + key + "' in " + where);
    }
  }
}

inline json vec2(const geometry::Vec2& v) { return json::array({v.x(), v.y()}); }

inline geometry::Vec2 vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::Protocol, "expected [x, y]");
  return geometry::Vec2(j[0].get<double>(), j[1].get<double>());
}

}  // namespace detail

// --------------------------------------------------------------- configs

inline json to_json(const game::GameConfig& c) {
  return json{{"screen_width", c.screen_width},
              {"screen_height", c.screen_height},
              {"trial_duration", c.trial_duration},
              {"tick_rate", c.tick_rate},
              {"laser_range", c.laser_range},
              {"target_radius", c.target_radius},
              {"task_spawn_interval", c.task_spawn_interval},
              {"distractor_spawn_interval", c.distractor_spawn_interval},
              {"min_speed", c.min_speed},
              {"max_speed", c.max_speed},
              {"lase_reference_time", c.lase.reference_time},
              {"lase_reference_speed", c.lase.reference_speed},
              {"lase_min_time", c.lase.min_time},
              {"lase_max_time", c.lase.max_time},
              {"scenario_fraction", c.scenario_fraction}};
}

inline game::GameConfig game_config_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"screen_width", "screen_height", "trial_duration", "tick_rate",
                          "laser_range", "target_radius", "task_spawn_interval",
                          "distractor_spawn_interval", "min_speed", "max_speed",
                          "lase_reference_time", "lase_reference_speed", "lase_min_time",
                          "lase_max_time", "scenario_fraction"},
                         "game config");
  game::GameConfig c;
  detail::read_field(j, "screen_width", c.screen_width);
  detail::read_field(j, "screen_height", c.screen_height);
  detail::read_field(j, "trial_duration", c.trial_duration);
  detail::read_field(j, "tick_rate", c.tick_rate);
  detail::read_field(j, "laser_range", c.laser_range);
  detail::read_field(j, "target_radius", c.target_radius);
  detail::read_field(j, "task_spawn_interval", c.task_spawn_interval);
  detail::read_field(j, "distractor_spawn_interval", c.distractor_spawn_interval);
  detail::read_field(j, "min_speed", c.min_speed);
  detail::read_field(j, "max_speed", c.max_speed);
  detail::read_field(j, "lase_reference_time", c.lase.reference_time);
  detail::read_field(j, "lase_reference_speed", c.lase.reference_speed);
  detail::read_field(j, "lase_min_time", c.lase.min_time);
  detail::read_field(j, "lase_max_time", c.lase.max_time);
  detail::read_field(j, "scenario_fraction", c.scenario_fraction);
  game::validate(c);
  return c;
}

inline json to_json(const user::UserParams& p) {
  return json{{"reaction_delay", p.reaction_delay},
              {"lookahead_lead", p.lookahead_lead},
              {"lookahead_in_all_modes", p.lookahead_in_all_modes},
              {"handle_speed_limit", p.handle_speed_limit},
              {"hand_lag", p.hand_lag},
              {"onset_glance_probability", p.onset_glance_probability},
              {"glance_duration", p.glance_duration},
              {"assisted_reach", p.assisted_reach},
              {"preemptive_triage", p.preemptive_triage},
              {"aim_jitter", p.aim_jitter},
              {"noise_c1", p.noise_model.c1},
              {"noise_c2", p.noise_model.c2},
              {"noise_sd", p.noise_sd},
              {"eye_distance", p.eye_distance},
              {"dropout_to_untracked", p.dropout.to_untracked},
              {"dropout_to_tracked", p.dropout.to_tracked},
              {"slave_gaze_pull", p.slave_gaze_pull},
              {"seed", p.seed}};
}

inline user::UserParams user_params_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"reaction_delay", "lookahead_lead", "lookahead_in_all_modes",
                          "handle_speed_limit", "hand_lag", "onset_glance_probability",
                          "glance_duration", "assisted_reach", "preemptive_triage", "aim_jitter", "noise_c1", "noise_c2", "noise_sd",
                          "eye_distance", "dropout_to_untracked", "dropout_to_tracked",
                          "slave_gaze_pull", "seed"},
                         "user params");
  user::UserParams p;
  detail::read_field(j, "reaction_delay", p.reaction_delay);
  detail::read_field(j, "lookahead_lead", p.lookahead_lead);
  detail::read_field(j, "lookahead_in_all_modes", p.lookahead_in_all_modes);
  detail::read_field(j, "handle_speed_limit", p.handle_speed_limit);
  detail::read_field(j, "hand_lag", p.hand_lag);
  detail::read_field(j, "onset_glance_probability", p.onset_glance_probability);
  detail::read_field(j, "glance_duration", p.glance_duration);
  detail::read_field(j, "assisted_reach", p.assisted_reach);
  detail::read_field(j, "preemptive_triage", p.preemptive_triage);
  detail::read_field(j, "aim_jitter", p.aim_jitter);
  detail::read_field(j, "noise_c1", p.noise_model.c1);
  detail::read_field(j, "noise_c2", p.noise_model.c2);
  detail::read_field(j, "noise_sd", p.noise_sd);
  detail::read_field(j, "eye_distance", p.eye_distance);
  detail::read_field(j, "dropout_to_untracked", p.dropout.to_untracked);
  detail::read_field(j, "dropout_to_tracked", p.dropout.to_tracked);
  detail::read_field(j, "slave_gaze_pull", p.slave_gaze_pull);
  detail::read_field(j, "seed", p.seed);
  user::validate(p);
  return p;
}

inline json to_json(const attention::AttentionConfig& a, const attention::RobotParams& r) {
  return json{{"association_radius", a.association_radius},
              {"hold_window", a.hold_window},
              {"tip_speed_limit", r.tip_speed_limit},
              {"workspace_radius", r.workspace_radius},
              {"aim_blend", r.aim_blend}};
}

inline void robot_from_json(const json& j, attention::AttentionConfig& a,
                            attention::RobotParams& r) {
  detail::reject_unknown(j,
                         {"association_radius", "hold_window", "tip_speed_limit",
                          "workspace_radius", "aim_blend"},
                         "robot config");
  detail::read_field(j, "association_radius", a.association_radius);
  detail::read_field(j, "hold_window", a.hold_window);
  detail::read_field(j, "tip_speed_limit", r.tip_speed_limit);
  detail::read_field(j, "workspace_radius", r.workspace_radius);
  detail::read_field(j, "aim_blend", r.aim_blend);
}

inline json to_json(const sim::SimulationParams& p) {
  return json{{"game", to_json(p.game)},
              {"user", to_json(p.user)},
              {"robot", to_json(p.attention, p.robot)}};
}

inline sim::SimulationParams simulation_params_from_json(const json& j) {
  detail::reject_unknown(j, {"game", "user", "robot"}, "simulation params");
  sim::SimulationParams p;
  if (j.contains("game")) p.game = game_config_from_json(j.at("game"));
  if (j.contains("user")) p.user = user_params_from_json(j.at("user"));
  if (j.contains("robot")) robot_from_json(j.at("robot"), p.attention, p.robot);
  sim::validate(p);
  return p;
}

inline json to_json(const experiment::ExperimentPlan& plan) {
  json modes = json::array();
  for (auto m : plan.modes) modes.push_back(std::string(to_string(m)));
  json j = to_json(plan.params);
  j["modes"] = modes;
  j["trials_per_mode"] = plan.trials_per_mode;
  j["participants"] = plan.participants;
  j["base_seed"] = plan.base_seed;
  j["threads"] = plan.threads;
  return j;
}

inline experiment::ExperimentPlan plan_from_json(const json& j) {
  detail::reject_unknown(
      j, {"modes", "trials_per_mode", "participants", "base_seed", "threads", "game", "user", "robot"},
      "experiment plan");
  experiment::ExperimentPlan plan;
  if (j.contains("modes")) {
    plan.modes.clear();
    for (const auto& m : j.at("modes")) plan.modes.push_back(parse_mode(m.get<std::string>()));
  }
  detail::read_field(j, "trials_per_mode", plan.trials_per_mode);
  detail::read_field(j, "participants", plan.participants);
  detail::read_field(j, "base_seed", plan.base_seed);
  detail::read_field(j, "threads", plan.threads);
  json rest = json::object();
  for (const char* k : {"game", "user", "robot"}) {
    if (j.contains(k)) rest[k] = j.at(k);
  }
  plan.params = simulation_params_from_json(rest);
  experiment::validate(plan);
  return plan;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, path + ": " + e.what());
  }
}

// ------------------------------------------------------ samples and logs

inline json to_json(const game::TargetSample& s) {
  return json{{"type", "sample"},
              {"speed", s.speed},
              {"mode", std::string(to_string(s.mode))},
              {"completed", s.completed},
              {"trial_id", s.trial_id},
              {"timestamp", s.timestamp},
              {"target_id", s.target_id}};
}

inline game::TargetSample sample_from_json(const json& j) {
  game::TargetSample s;
  s.speed = j.at("speed").get<double>();
  s.mode = parse_mode(j.at("mode").get<std::string>());
  s.completed = j.at("completed").get<bool>();
  s.trial_id = j.at("trial_id").get<std::uint64_t>();
  s.timestamp = j.at("timestamp").get<double>();
  s.target_id = j.value("target_id", game::TargetId{0});
  return s;
}

inline void write_samples_jsonl(std::ostream& out, std::span<const game::TargetSample> samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline std::vector<game::TargetSample> read_samples_jsonl(std::istream& in) {
  std::vector<game::TargetSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.value("type", std::string("sample")) == "sample") out.push_back(sample_from_json(j));
  }
  return out;
}

inline json to_json(const sim::TickRecord& r) {
  json j{{"type", "tick"},
         {"tick", r.tick},
         {"tip", detail::vec2(r.input.tip_point)},
         {"trigger", r.input.trigger},
         {"override", r.input.laser_override},
         {"locked", r.input.locked_target ? json(*r.input.locked_target) : json(nullptr)},
         {"handle", detail::vec2(r.handle_point)},
         {"tracked", r.tracked}};
  j["gaze"] = r.gaze_point ? detail::vec2(*r.gaze_point) : json(nullptr);
  return j;
}

inline sim::TickRecord tick_record_from_json(const json& j) {
  sim::TickRecord r;
  r.tick = j.at("tick").get<std::int64_t>();
  r.input.tip_point = detail::vec2(j.at("tip"));
  r.input.trigger = j.at("trigger").get<bool>();
  r.input.laser_override = j.at("override").get<bool>();
  if (!j.at("locked").is_null()) r.input.locked_target = j.at("locked").get<game::TargetId>();
  if (j.contains("handle")) r.handle_point = detail::vec2(j.at("handle"));
  if (j.contains("gaze") && !j.at("gaze").is_null()) r.gaze_point = detail::vec2(j.at("gaze"));
  r.tracked = j.value("tracked", false);
  return r;
}

/// Trial log: a header line, then tick and sample lines in tick order.
inline void write_trial_log(std::ostream& out, const sim::TrialResult& t,
                            const game::GameConfig& cfg) {
  out << json{{"type", "trial"},
              {"schema", kSchemaVersion},
              {"trial_id", t.spec.trial_id},
              {"mode", std::string(to_string(t.spec.mode))},
              {"participant", t.spec.participant},
              {"repetition", t.spec.repetition},
              {"game_seed", t.spec.game_seed},
              {"user_seed", t.spec.user_seed},
              {"game", to_json(cfg)}}
             .dump()
      << '\n';
  std::size_t next_sample = 0;
  for (const auto& rec : t.log) {
    out << to_json(rec).dump() << '\n';
    while (next_sample < t.samples.size() &&
           std::llround(t.samples[next_sample].timestamp * cfg.tick_rate) <= rec.tick) {
      out << to_json(t.samples[next_sample++]).dump() << '\n';
    }
  }
  for (; next_sample < t.samples.size(); ++next_sample) {
    out << to_json(t.samples[next_sample]).dump() << '\n';
  }
}

struct ParsedTrialLog {
  sim::TrialSpec spec;
  game::GameConfig game;
  std::vector<sim::TickRecord> ticks;
  std::vector<game::TargetSample> samples;
};

inline ParsedTrialLog read_trial_log(std::istream& in) {
  ParsedTrialLog log;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "trial") {
      header = true;
      log.spec.trial_id = j.at("trial_id").get<std::uint64_t>();
      log.spec.mode = parse_mode(j.at("mode").get<std::string>());
      log.spec.participant = j.value("participant", 0);
      log.spec.repetition = j.value("repetition", 0);
      log.spec.game_seed = j.at("game_seed").get<std::uint64_t>();
      log.spec.user_seed = j.value("user_seed", std::uint64_t{0});
      log.game = game_config_from_json(j.at("game"));
    } else if (type == "tick") {
      log.ticks.push_back(tick_record_from_json(j));
    } else if (type == "sample") {
      log.samples.push_back(sample_from_json(j));
    }
  }
  if (!header) throw Error(ErrorKind::Protocol, "trial log has no header line");
  return log;
}

// -------------------------------------------------------------- tables

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// mode,range,mean_performance,n,standard_error
inline void write_report_csv(std::ostream& out, const experiment::StatsReport& rep) {
  out << "mode,range,mean_performance,n,standard_error\n";
  const auto& ranges = experiment::speed_ranges();
  for (std::size_t m = 0; m < rep.modes.size(); ++m) {
    for (std::size_t r = 0; r < 3; ++r) {
      const auto& c = rep.cells[m][r];
      out << to_string(rep.modes[m]) << ',' << ranges[r].label << ',' << format_number(c.mean)
          << ',' << c.n << ',' << format_number(c.standard_error) << '\n';
    }
  }
}

/// Square matrix of Bonferroni-corrected p-values for one range.
inline void write_pvalues_csv(std::ostream& out, const experiment::StatsReport& rep,
                              std::size_t range) {
  out << "mode";
  for (auto m : rep.modes) out << ',' << to_string(m);
  out << '\n';
  const auto& p = rep.comparisons[range].corrected_p;
  for (std::size_t i = 0; i < rep.modes.size(); ++i) {
    out << to_string(rep.modes[i]);
    for (std::size_t j = 0; j < rep.modes.size(); ++j) out << ',' << format_number(p[i][j]);
    out << '\n';
  }
}

// -------------------------------------------------------- model report

inline json to_json(const gaze_models::GazeModelReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"schema", kSchemaVersion},
         {"counts",
          {{"looking_tracked", r.counts.looking_tracked},
           {"looking_untracked", r.counts.looking_untracked},
           {"pointing_tracked", r.counts.pointing_tracked},
           {"pointing_untracked", r.counts.pointing_untracked}}},
         {"folds", r.folds},
         {"seed", r.seed}};
  j["linear"] = nullptr;
  if (r.linear) {
    j["linear"] = {{"c1", r.linear->c1},
                   {"c2", r.linear->c2},
                   {"slope_p_value", r.linear->fit.slope_p_value},
                   {"r_squared", r.linear->fit.r_squared},
                   {"n", r.linear->fit.n},
                   {"discarded_fraction", r.linear_discarded_fraction}};
  }
  j["trackability"] = nullptr;
  if (r.logistic) {
    json t{{"beta0", r.logistic->beta0},
           {"beta1", r.logistic->beta1},
           {"log_likelihood", r.logistic->log_likelihood},
           {"iterations", r.logistic->iterations},
           {"converged", r.logistic->converged}};
    if (r.cv) {
      t["decision_point"] = r.cv->decision_point;
      t["cv_accuracy"] = r.cv->accuracy;
      t["refit_accuracy"] = r.cv->refit_accuracy;
    }
    t["trackable_limit_deg"] = opt(r.trackable_limit);
    t["cone_angle_deg"] = r.trackable_limit ? json(2.0 * *r.trackable_limit) : json(nullptr);
    t["error_at_limit_deg"] = opt(r.error_at_limit);
    j["trackability"] = t;
  }
  j["pointing"] = nullptr;
  if (r.pointing) {
    j["pointing"] = {{"mean", r.pointing->mean},
                     {"ci_low", r.pointing->ci_low},
                     {"ci_high", r.pointing->ci_high},
                     {"n", r.pointing->n},
                     {"discarded_fraction", r.pointing_discarded_fraction}};
  }
  j["warnings"] = r.warnings;
  return j;
}

// ------------------------------------------------------ gaze observations

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "TRUE" || s == "True") return true;
  if (s == "false" || s == "0" || s == "FALSE" || s == "False") return false;
  throw Error(ErrorKind::ConfigInvalid, "not a boolean: '" + s + "'");
}

/// CSV with header `delta_phi_deg,error_deg,tracked,phase`.
inline std::vector<gaze_models::GazeObservation> read_observations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "delta_phi_deg,error_deg,tracked,phase") {
    throw Error(ErrorKind::ConfigInvalid,
                "observation CSV must start with delta_phi_deg,error_deg,tracked,phase");
  }
  std::vector<gaze_models::GazeObservation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
    if (f.size() == 3) f.emplace_back();
    if (f.size() != 4) {
      throw Error(ErrorKind::ConfigInvalid, "line " + std::to_string(lineno) + ": expected 4 fields");
    }
    try {
      gaze_models::GazeObservation o;
      o.gaze_shift = std::stod(f[0]);
      o.tracked = parse_bool(f[2]);
      if (!f[1].empty()) o.angular_error = std::stod(f[1]);
      if (o.tracked && !o.angular_error) {
        throw Error(ErrorKind::ConfigInvalid, "tracked observation without error_deg");
      }
      if (!o.tracked) o.angular_error.reset();
      if (f[3] == "looking") {
        o.phase = gaze_models::Phase::Looking;
      } else if (f[3] == "pointing") {
        o.phase = gaze_models::Phase::Pointing;
      } else {
        throw Error(ErrorKind::ConfigInvalid, "phase must be looking or pointing");
      }
      if (!std::isfinite(o.gaze_shift) || o.gaze_shift < 0.0) {
        throw Error(ErrorKind::ConfigInvalid, "delta_phi_deg must be finite and >= 0");
      }
      out.push_back(o);
    } catch (const std::logic_error& e) {
      throw Error(ErrorKind::ConfigInvalid, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_observations_csv(std::ostream& out,
                                   std::span<const gaze_models::GazeObservation> obs) {
  out << "delta_phi_deg,error_deg,tracked,phase\n" << std::setprecision(17);
  for (const auto& o : obs) {
    out << o.gaze_shift << ',';
    if (o.angular_error) out << *o.angular_error;
    out << ',' << (o.tracked ? "true" : "false") << ','
        << (o.phase == gaze_models::Phase::Looking ? "looking" : "pointing") << '\n';
  }
}

}  // namespace gazeattn::io
