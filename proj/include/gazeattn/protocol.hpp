#pragma once

// Text messages exchanged with live-play clients. Every message is one JSON
// object carrying "schema" and "kind". Positions in snapshots are screen
// millimetres; input coordinates are normalised.
//
//   client -> server: hello, configure, start, input, end
//   server -> client: hello, configure, start, snapshot, end, error

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gazeattn/io.hpp"
#include "gazeattn/realtime.hpp"

namespace gazeattn::protocol {

using io::json;
using realtime::InputMessage;
using realtime::SessionConfig;
using realtime::Snapshot;

inline constexpr int kSchema = io::kSchemaVersion;

enum class Kind { Hello, Configure, Start, Input, Snapshot, End, Error };

inline std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Hello: return "hello";
    case Kind::Configure: return "configure";
    case Kind::Start: return "start";
    case Kind::Input: return "input";
    case Kind::Snapshot: return "snapshot";
    case Kind::End: return "end";
    case Kind::Error: return "error";
  }
  return "error";
}

inline Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::Hello, Kind::Configure, Kind::Start, Kind::Input, Kind::Snapshot, Kind::End,
                 Kind::Error}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::Protocol, "unknown message kind '" + std::string(s) + "'");
}

inline json envelope(Kind k) { return json{{"schema", kSchema}, {"kind", std::string(to_string(k))}}; }

struct Message {
  Kind kind;
  json body;  // the whole object, envelope included
};

/// Parses and checks the envelope; the body is left to the typed decoders.
inline Message decode(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Protocol, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Protocol, "message must be a JSON object");
  if (!j.contains("schema") || !j["schema"].is_number_integer()) {
    throw Error(ErrorKind::Protocol, "missing schema version");
  }
  if (j["schema"].get<int>() != kSchema) {
    throw Error(ErrorKind::Protocol, "unsupported schema " + j["schema"].dump());
  }
  if (!j.contains("kind") || !j["kind"].is_string()) throw Error(ErrorKind::Protocol, "missing kind");
  return Message{parse_kind(j["kind"].get<std::string>()), std::move(j)};
}

namespace detail {

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, e.what());
  }
}

inline json point(const geometry::Vec2& p) { return json::array({p.x(), p.y()}); }

inline geometry::Vec2 point(const json& j) { return io::detail::vec2(j); }

inline json optional_point(const std::optional<geometry::Vec2>& p) {
  return p ? point(*p) : json(nullptr);
}

inline std::optional<geometry::Vec2> optional_point(const json& j) {
  if (j.is_null()) return std::nullopt;
  return point(j);
}

template <typename T>
json optional_value(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline game::TargetKind parse_target_kind(const std::string& s) {
  if (s == "task") return game::TargetKind::Task;
  if (s == "distractor") return game::TargetKind::Distractor;
  throw Error(ErrorKind::Protocol, "unknown target kind '" + s + "'");
}

inline game::TargetState parse_target_state(const std::string& s) {
  if (s == "falling") return game::TargetState::Falling;
  if (s == "completed") return game::TargetState::Completed;
  if (s == "failed") return game::TargetState::Failed;
  throw Error(ErrorKind::Protocol, "unknown target state '" + s + "'");
}

inline realtime::SessionStatus parse_status(const std::string& s) {
  using realtime::SessionStatus;
  for (auto st : {SessionStatus::Paused, SessionStatus::Running, SessionStatus::Ended}) {
    if (s == realtime::to_string(st)) return st;
  }
  throw Error(ErrorKind::Protocol, "unknown status '" + s + "'");
}

inline json score(const game::ScoreCounters& c) {
  return json{{"completed", c.completed},
              {"failed", c.failed},
              {"total_spawned", c.total_spawned},
              {"scenario_spawned", c.scenario_spawned},
              {"distractors_spawned", c.distractors_spawned}};
}

inline game::ScoreCounters score(const json& j) {
  game::ScoreCounters c;
  j.at("completed").get_to(c.completed);
  j.at("failed").get_to(c.failed);
  j.at("total_spawned").get_to(c.total_spawned);
  j.at("scenario_spawned").get_to(c.scenario_spawned);
  j.at("distractors_spawned").get_to(c.distractors_spawned);
  return c;
}

}  // namespace detail

// -------------------------------------------------------------- hello

inline std::string encode_hello(std::string_view who) {
  json j = envelope(Kind::Hello);
  j["agent"] = std::string(who);
  json modes = json::array();
  for (auto m : kAllModes) modes.push_back(std::string(to_string(m)));
  j["modes"] = modes;
  return j.dump();
}

// ---------------------------------------------------------- configure

inline json to_json(const SessionConfig& c) {
  json j = io::to_json(c.params);
  j["mode"] = std::string(to_string(c.mode));
  j["gaze_source"] = realtime::to_string(c.gaze_source);
  j["dwell_time"] = c.dwell_time;
  j["dwell_radius"] = c.dwell_radius;
  j["snapshot_rate"] = c.snapshot_rate;
  j["emulate_tracker"] = c.emulate_tracker;
  j["seed"] = c.seed;
  return j;
}

inline SessionConfig session_config_from_json(const json& j) {
  io::detail::reject_unknown(j,
                             {"mode", "gaze_source", "dwell_time", "dwell_radius", "snapshot_rate",
                              "emulate_tracker", "seed", "game", "user", "robot"},
                             "session config");
  SessionConfig c;
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("gaze_source")) {
    c.gaze_source = realtime::parse_gaze_source(j.at("gaze_source").get<std::string>());
  }
  io::detail::read_field(j, "dwell_time", c.dwell_time);
  io::detail::read_field(j, "dwell_radius", c.dwell_radius);
  io::detail::read_field(j, "snapshot_rate", c.snapshot_rate);
  io::detail::read_field(j, "emulate_tracker", c.emulate_tracker);
  io::detail::read_field(j, "seed", c.seed);
  json rest = json::object();
  for (const char* k : {"game", "user", "robot"}) {
    if (j.contains(k)) rest[k] = j.at(k);
  }
  c.params = io::simulation_params_from_json(rest);
  realtime::validate(c);
  return c;
}

/// Client request: partial config, overlaid on `base`.
inline std::string encode_configure_request(const json& config) {
  json j = envelope(Kind::Configure);
  j["config"] = config;
  return j.dump();
}

inline SessionConfig decode_configure_request(const Message& m, const SessionConfig& base) {
  if (m.kind != Kind::Configure) throw Error(ErrorKind::Protocol, "expected configure");
  json merged = to_json(base);
  if (m.body.contains("config")) {
    if (!m.body["config"].is_object()) throw Error(ErrorKind::Protocol, "config must be an object");
    merged.merge_patch(m.body["config"]);
  }
  return session_config_from_json(merged);
}

/// Server reply: the session id and the full resolved config.
inline std::string encode_configured(realtime::SessionId id, const SessionConfig& c) {
  json j = envelope(Kind::Configure);
  j["session"] = id;
  j["config"] = to_json(c);
  return j.dump();
}

// -------------------------------------------------------------- start

inline std::string encode_start_request() { return envelope(Kind::Start).dump(); }

inline std::string encode_started(realtime::SessionId id, const SessionConfig& c) {
  json j = envelope(Kind::Start);
  j["session"] = id;
  j["tick_rate"] = c.params.game.tick_rate;
  j["trial_duration"] = c.params.game.trial_duration;
  j["screen"] = json::array({c.params.game.screen_width, c.params.game.screen_height});
  return j.dump();
}

// -------------------------------------------------------------- input

inline std::string encode_input(const InputMessage& in) {
  json j = envelope(Kind::Input);
  j["timestamp"] = in.timestamp;
  j["handle_point"] = detail::point(in.handle_point);
  j["gaze_point"] = detail::optional_point(in.gaze_point);
  j["trigger"] = in.trigger;
  return j.dump();
}

/// Coordinates are clamped to the unit square.
inline InputMessage decode_input(const Message& m) {
  if (m.kind != Kind::Input) throw Error(ErrorKind::Protocol, "expected input");
  return detail::guarded([&] {
    InputMessage in;
    in.timestamp = m.body.at("timestamp").get<double>();
    in.handle_point = detail::point(m.body.at("handle_point"));
    if (m.body.contains("gaze_point")) in.gaze_point = detail::optional_point(m.body["gaze_point"]);
    in.trigger = m.body.value("trigger", false);
    return realtime::clamped(in);
  });
}

// ----------------------------------------------------------- snapshot

inline json to_json(const Snapshot& s) {
  json targets = json::array();
  for (const auto& t : s.targets) {
    targets.push_back(json{{"id", t.id},
                           {"kind", std::string(game::to_string(t.kind))},
                           {"position", detail::point(t.position)},
                           {"progress", t.progress},
                           {"state", std::string(game::to_string(t.state))}});
  }
  json j = envelope(Kind::Snapshot);
  j["tick"] = s.tick;
  j["time"] = s.time;
  j["targets"] = targets;
  j["tip"] = detail::point(s.tip);
  j["handle"] = detail::point(s.handle);
  j["locked_target"] = detail::optional_value(s.locked_target);
  j["gaze_marker"] = detail::optional_point(s.gaze_marker);
  j["focused_target"] = detail::optional_value(s.focused_target);
  j["laser_active"] = s.laser_active;
  j["score"] = detail::score(s.score);
  j["mode"] = std::string(to_string(s.mode));
  j["status"] = realtime::to_string(s.status);
  return j;
}

inline std::string encode_snapshot(const Snapshot& s) { return to_json(s).dump(); }

inline Snapshot decode_snapshot(const Message& m) {
  if (m.kind != Kind::Snapshot) throw Error(ErrorKind::Protocol, "expected snapshot");
  return detail::guarded([&] {
    const json& j = m.body;
    Snapshot s;
    s.tick = j.at("tick").get<std::int64_t>();
    s.time = j.at("time").get<double>();
    for (const auto& t : j.at("targets")) {
      realtime::TargetView v;
      v.id = t.at("id").get<game::TargetId>();
      v.kind = detail::parse_target_kind(t.at("kind").get<std::string>());
      v.position = detail::point(t.at("position"));
      v.progress = t.at("progress").get<double>();
      v.state = detail::parse_target_state(t.at("state").get<std::string>());
      s.targets.push_back(v);
    }
    s.tip = detail::point(j.at("tip"));
    s.handle = detail::point(j.at("handle"));
    if (!j.at("locked_target").is_null()) s.locked_target = j["locked_target"].get<game::TargetId>();
    s.gaze_marker = detail::optional_point(j.at("gaze_marker"));
    if (!j.at("focused_target").is_null()) s.focused_target = j["focused_target"].get<game::TargetId>();
    s.laser_active = j.at("laser_active").get<bool>();
    s.score = detail::score(j.at("score"));
    s.mode = parse_mode(j.at("mode").get<std::string>());
    s.status = detail::parse_status(j.at("status").get<std::string>());
    return s;
  });
}

// ---------------------------------------------------------- end/error

inline std::string encode_end_request() { return envelope(Kind::End).dump(); }

inline std::string encode_ended(realtime::SessionId id, const realtime::LiveSession& s,
                                std::string_view reason) {
  json j = envelope(Kind::End);
  j["session"] = id;
  j["reason"] = std::string(reason);
  j["tick"] = s.state().game.tick;
  j["score"] = detail::score(s.score());
  j["samples"] = s.samples().size();
  j["stale_inputs"] = s.stale_inputs();
  return j.dump();
}

inline std::string encode_error(std::string_view code, std::string_view message) {
  json j = envelope(Kind::Error);
  j["code"] = std::string(code);
  j["message"] = std::string(message);
  return j.dump();
}

inline std::string encode_error(const gazeattn::Error& e) {
  return encode_error(gazeattn::to_string(e.kind()), e.what());
}

// -------------------------------------------------------- session log

/// Input log of a live session: a header with the resolved config, then one
/// applied input per tick. Enough to rebuild the session with `replay_inputs`.
inline void write_session_log(std::ostream& out, realtime::SessionId id, const SessionConfig& c,
                              const std::vector<InputMessage>& inputs) {
  out << json{{"type", "session"}, {"schema", kSchema}, {"session", id}, {"config", to_json(c)}}.dump()
      << '\n';
  for (const auto& in : inputs) {
    out << json{{"type", "input"},
                {"timestamp", in.timestamp},
                {"handle_point", detail::point(in.handle_point)},
                {"gaze_point", detail::optional_point(in.gaze_point)},
                {"trigger", in.trigger}}
               .dump()
        << '\n';
  }
}

struct SessionLog {
  realtime::SessionId id = 0;
  SessionConfig config;
  std::vector<InputMessage> inputs;
};

inline SessionLog read_session_log(std::istream& in) {
  SessionLog log;
  bool header = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = detail::guarded([&] { return json::parse(line); });
    const auto type = detail::guarded([&] { return j.at("type").get<std::string>(); });
    if (type == "session") {
      if (j.value("schema", 0) != kSchema) throw Error(ErrorKind::Protocol, "unsupported schema");
      log.id = detail::guarded([&] { return j.at("session").get<realtime::SessionId>(); });
      log.config = session_config_from_json(j.at("config"));
      header = true;
    } else if (type == "input") {
      log.inputs.push_back(detail::guarded([&] {
        InputMessage m;
        m.timestamp = j.at("timestamp").get<double>();
        m.handle_point = detail::point(j.at("handle_point"));
        m.gaze_point = detail::optional_point(j.at("gaze_point"));
        m.trigger = j.at("trigger").get<bool>();
        return m;
      }));
    } else {
      throw Error(ErrorKind::Protocol, "unexpected record type '" + type + "'");
    }
  }
  if (!header) throw Error(ErrorKind::Protocol, "session log has no header line");
  return log;
}

}  // namespace gazeattn::protocol
