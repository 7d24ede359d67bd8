#pragma once

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "md2/engine.hpp"
#include "md2/persona.hpp"
#include "md2/state.hpp"

namespace md2 {

using json = nlohmann::json;

struct TraceSource {
  enum class Kind : std::uint8_t { Synthetic, Human, Scripted };
  Kind kind = Kind::Scripted;
  PersonaKind persona = PersonaKind::Runner;  // Synthetic only
  std::string sessionId;                      // Human only

  static TraceSource synthetic(PersonaKind p) { return {Kind::Synthetic, p, {}}; }
  static TraceSource human(std::string id) { return {Kind::Human, PersonaKind::Runner, std::move(id)}; }
  static TraceSource scripted() { return {}; }

  friend bool operator==(const TraceSource&, const TraceSource&) = default;
};

enum class TraceOutcome : std::uint8_t { Won, Dead, Abandoned };

constexpr std::string_view to_string(TraceOutcome o) {
  switch (o) {
    case TraceOutcome::Won: return "won";
    case TraceOutcome::Dead: return "dead";
    case TraceOutcome::Abandoned: return "abandoned";
  }
  return "?";
}

inline TraceOutcome trace_outcome(Outcome o) {
  switch (o) {
    case Outcome::Won: return TraceOutcome::Won;
    case Outcome::Dead: return TraceOutcome::Dead;
    case Outcome::Ongoing: return TraceOutcome::Abandoned;
  }
  return TraceOutcome::Abandoned;
}

/// Post-action snapshot of one turn.
struct TurnRecord {
  int turn = 0;
  Action action;
  Coord heroPos;
  int heroHp = 0;
  int score = 0;
  std::vector<MechanicEvent> events;
  std::uint64_t stateHash = 0;

  friend bool operator==(const TurnRecord&, const TurnRecord&) = default;
};

struct Playtrace {
  std::string mapName;
  TraceSource source;
  LevelPtr level;
  GameState initialState;
  std::vector<TurnRecord> turns;
  TraceOutcome outcome = TraceOutcome::Abandoned;
  std::string note;  // why recording stopped early, if it did

  friend bool operator==(const Playtrace& a, const Playtrace& b) {
    return a.mapName == b.mapName && a.source == b.source && a.initialState == b.initialState &&
           a.turns == b.turns && a.outcome == b.outcome && a.note == b.note &&
           (a.level == b.level || (a.level && b.level && a.level->to_text() == b.level->to_text()));
  }
};

inline TurnRecord make_turn_record(const Action& action, const StepResult& step) {
  TurnRecord r;
  r.turn = step.state.turn - 1;
  r.action = action;
  r.heroPos = step.state.heroPos;
  r.heroHp = step.state.heroHp;
  r.score = step.state.treasureScore;
  r.events = step.events;
  r.stateHash = state_hash(step.state);
  return r;
}

using ActionProvider = std::function<Action(const GameState&)>;

/// Plays one episode. An illegal request ends the recording with an
/// Abandoned outcome and the reason in `note`; so does hitting `maxTurns`.
inline Playtrace record_episode(const LevelPtr& level, const ActionProvider& provider, TraceSource source = {},
                                int maxTurns = 500) {
  Playtrace trace;
  trace.mapName = level->name;
  trace.source = std::move(source);
  trace.level = level;
  trace.initialState = initial_state(level);
  GameState s = trace.initialState;
  while (s.outcome == Outcome::Ongoing) {
    if (static_cast<int>(trace.turns.size()) >= maxTurns) {
      trace.note = "turn limit " + std::to_string(maxTurns) + " reached";
      break;
    }
    const Action a = provider(s);
    if (!is_legal(s, a)) {
      trace.note = "illegal action " + to_string(a) + " at turn " + std::to_string(s.turn);
      break;
    }
    auto step = apply_unchecked(s, a);
    trace.turns.push_back(make_turn_record(a, step));
    s = std::move(step.state);
  }
  trace.outcome = trace_outcome(s.outcome);
  return trace;
}

inline ActionProvider persona_provider(PersonaSpec spec, PlanBudget budget, PlanCache* cache = nullptr) {
  return [spec, budget, cache](const GameState& s) { return plan_cached(s, spec, budget, cache); };
}

inline Playtrace record_persona_episode(const LevelPtr& level, const PersonaSpec& spec, const PlanBudget& budget,
                                        PlanCache* cache = nullptr, int maxTurns = 500) {
  return record_episode(level, persona_provider(spec, budget, cache), TraceSource::synthetic(spec.kind), maxTurns);
}

/// Re-simulates the trace, calling `visit(preActionState, record)` for every
/// turn. Throws ReplayMismatch if any recorded digest diverges.
template <typename Visitor>
void replay(const Playtrace& trace, Visitor&& visit) {
  GameState s = trace.initialState;
  for (const auto& rec : trace.turns) {
    if (s.outcome != Outcome::Ongoing)
      throw Error(ErrorCode::ReplayMismatch, "turn " + std::to_string(rec.turn) + " recorded after the game ended");
    if (!is_legal(s, rec.action))
      throw Error(ErrorCode::ReplayMismatch, "recorded action " + to_string(rec.action) + " illegal at turn " +
                                                 std::to_string(rec.turn));
    visit(static_cast<const GameState&>(s), rec);
    auto step = apply_unchecked(s, rec.action);
    if (state_hash(step.state) != rec.stateHash)
      throw Error(ErrorCode::ReplayMismatch, "state digest diverges at turn " + std::to_string(rec.turn));
    s = std::move(step.state);
  }
}

inline void verify_replay(const Playtrace& trace) {
  replay(trace, [](const GameState&, const TurnRecord&) {});
}

/// Pre-action states, one per turn.
inline std::vector<GameState> replay_states(const Playtrace& trace) {
  std::vector<GameState> out;
  out.reserve(trace.turns.size());
  replay(trace, [&](const GameState& s, const TurnRecord&) { out.push_back(s); });
  return out;
}

inline int count_events(const Playtrace& trace, Mechanic kind) {
  int n = 0;
  for (const auto& t : trace.turns)
    for (const auto& e : t.events)
      if (e.kind == kind) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON: one header record per trace, then its turn records.

namespace detail {

inline json coord_json(Coord c) { return json::array({c.x, c.y}); }

inline Coord coord_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::MalformedRecord, "coordinate must be [x, y]");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

inline json source_json(const TraceSource& s) {
  switch (s.kind) {
    case TraceSource::Kind::Synthetic: return {{"kind", "synthetic"}, {"persona", to_string(s.persona)}};
    case TraceSource::Kind::Human: return {{"kind", "human"}, {"session", s.sessionId}};
    case TraceSource::Kind::Scripted: return {{"kind", "scripted"}};
  }
  return {};
}

inline TraceSource source_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "synthetic") return TraceSource::synthetic(parse_persona(j.at("persona").get<std::string>()));
  if (kind == "human") return TraceSource::human(j.at("session").get<std::string>());
  if (kind == "scripted") return TraceSource::scripted();
  throw Error(ErrorCode::MalformedRecord, "unknown trace source '" + kind + "'");
}

inline MonsterKind monster_kind_from(const std::string& name) {
  for (auto k : {MonsterKind::Goblin, MonsterKind::GoblinWizard, MonsterKind::Blob, MonsterKind::Ogre,
                 MonsterKind::Minitaur})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::MalformedRecord, "unknown monster kind '" + name + "'");
}

inline std::string items_string(const GameState& s) {
  std::string out(s.items.size(), '.');
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    switch (s.items[i]) {
      case ItemKind::Treasure: out[i] = '$'; break;
      case ItemKind::Potion: out[i] = '+'; break;
      case ItemKind::Trap: out[i] = '^'; break;
      case ItemKind::Portal: out[i] = 'P'; break;
      case ItemKind::None: break;
    }
  }
  return out;
}

}  // namespace detail

inline json state_to_json(const GameState& s) {
  json monsters = json::array();
  for (const auto& m : s.monsters) {
    monsters.push_back({{"kind", to_string(m.kind)},
                        {"pos", detail::coord_json(m.pos)},
                        {"hp", m.hp},
                        {"level", m.blobLevel},
                        {"stun", m.stunTurns},
                        {"alive", m.alive}});
  }
  json javelin = s.javelin.held ? json("held") : detail::coord_json(s.javelin.pos);
  return {{"hero", detail::coord_json(s.heroPos)},
          {"hp", s.heroHp},
          {"score", s.treasureScore},
          {"javelin", javelin},
          {"monsters", monsters},
          {"items", detail::items_string(s)},
          {"turn", s.turn},
          {"outcome", to_string(s.outcome)},
          {"ogre_treasure", s.treasuresEatenByOgres}};
}

inline GameState state_from_json(const json& j, const LevelPtr& level) {
  GameState s;
  s.level = level;
  s.heroPos = detail::coord_from(j.at("hero"));
  s.heroHp = j.at("hp").get<int>();
  s.treasureScore = j.at("score").get<int>();
  const auto& jav = j.at("javelin");
  if (jav.is_string()) s.javelin = Javelin{true, {}};
  else s.javelin = Javelin{false, detail::coord_from(jav)};
  for (const auto& m : j.at("monsters")) {
    MonsterState ms;
    ms.kind = detail::monster_kind_from(m.at("kind").get<std::string>());
    ms.pos = detail::coord_from(m.at("pos"));
    ms.hp = m.at("hp").get<int>();
    ms.blobLevel = m.at("level").get<int>();
    ms.stunTurns = m.at("stun").get<int>();
    ms.alive = m.at("alive").get<bool>();
    s.monsters.push_back(ms);
  }
  const auto items = j.at("items").get<std::string>();
  if (static_cast<int>(items.size()) != level->tile_count())
    throw Error(ErrorCode::MalformedRecord, "item grid size does not match the level");
  s.items.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    switch (items[i]) {
      case '$': s.items[i] = ItemKind::Treasure; break;
      case '+': s.items[i] = ItemKind::Potion; break;
      case '^': s.items[i] = ItemKind::Trap; break;
      case 'P': s.items[i] = ItemKind::Portal; break;
      case '.': s.items[i] = ItemKind::None; break;
      default: throw Error(ErrorCode::MalformedRecord, "bad item glyph");
    }
  }
  s.turn = j.at("turn").get<int>();
  const auto outcome = j.at("outcome").get<std::string>();
  s.outcome = outcome == "won" ? Outcome::Won : outcome == "dead" ? Outcome::Dead : Outcome::Ongoing;
  s.treasuresEatenByOgres = j.at("ogre_treasure").get<int>();
  return s;
}

inline json turn_to_json(const TurnRecord& t) {
  json events = json::array();
  for (const auto& e : t.events) events.push_back(json::array({to_string(e.kind), e.turn, e.subject.x, e.subject.y}));
  return {{"type", "turn"},
          {"turn", t.turn},
          {"action", to_string(t.action)},
          {"hero", detail::coord_json(t.heroPos)},
          {"hp", t.heroHp},
          {"score", t.score},
          {"events", events},
          {"hash", hash_hex(t.stateHash)}};
}

inline TurnRecord turn_from_json(const json& j) {
  TurnRecord t;
  t.turn = j.at("turn").get<int>();
  t.action = parse_action(j.at("action").get<std::string>());
  t.heroPos = detail::coord_from(j.at("hero"));
  t.heroHp = j.at("hp").get<int>();
  t.score = j.at("score").get<int>();
  for (const auto& e : j.at("events")) {
    const auto kind = parse_mechanic(e.at(0).get<std::string>());
    if (!kind) throw Error(ErrorCode::MalformedRecord, "unknown mechanic");
    t.events.push_back(MechanicEvent{*kind, e.at(1).get<int>(), {e.at(2).get<int>(), e.at(3).get<int>()}});
  }
  t.stateHash = parse_hash_hex(j.at("hash").get<std::string>());
  return t;
}

inline json trace_header_json(const Playtrace& t) {
  json header = {{"type", "header"},
                 {"version", 1},
                 {"map", t.mapName},
                 {"level", t.level->to_text()},
                 {"source", detail::source_json(t.source)},
                 {"initial", state_to_json(t.initialState)},
                 {"turns", t.turns.size()},
                 {"outcome", to_string(t.outcome)}};
  if (!t.note.empty()) header["note"] = t.note;
  return header;
}

inline void write_trace(std::ostream& out, const Playtrace& t) {
  out << trace_header_json(t).dump() << '\n';
  for (const auto& turn : t.turns) out << turn_to_json(turn).dump() << '\n';
}

inline void write_traces(std::ostream& out, const std::vector<Playtrace>& traces) {
  for (const auto& t : traces) write_trace(out, t);
}

inline void write_traces(const std::string& path, const std::vector<Playtrace>& traces) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_traces(out, traces);
}

/// Errors carry the 1-based line number of the offending record.
inline std::vector<Playtrace> read_traces(std::istream& in) {
  std::vector<Playtrace> traces;
  std::string line;
  int lineNo = 0;
  std::size_t expectedTurns = 0;
  int headerLine = 0;
  // levels are shared between traces recorded on the same layout
  std::unordered_map<std::string, LevelPtr> levels;
  auto fail = [&](const std::string& what) -> Error {
    return Error(ErrorCode::MalformedRecord, "line " + std::to_string(lineNo) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(std::string("invalid record: ") + e.what());
    }
    std::string type;
    if (j.is_object() && j.contains("type") && j["type"].is_string()) type = j["type"].get<std::string>();
    if (type == "header") {
      if (!traces.empty() && traces.back().turns.size() != expectedTurns)
        throw fail("previous trace (line " + std::to_string(headerLine) + ") is missing turn records");
    } else if (type == "turn") {
      if (traces.empty()) throw fail("turn record before any header");
      if (traces.back().turns.size() >= expectedTurns) throw fail("more turn records than the header declares");
    } else {
      throw fail("unknown record type '" + type + "'");
    }
    try {
      if (type == "header") {
        Playtrace t;
        t.mapName = j.at("map").get<std::string>();
        const auto text = j.at("level").get<std::string>();
        auto& lv = levels[t.mapName + '\n' + text];
        if (!lv) lv = load_map(text, t.mapName);
        t.level = lv;
        t.source = detail::source_from(j.at("source"));
        t.initialState = state_from_json(j.at("initial"), t.level);
        const auto outcome = j.at("outcome").get<std::string>();
        t.outcome = outcome == "won" ? TraceOutcome::Won : outcome == "dead" ? TraceOutcome::Dead : TraceOutcome::Abandoned;
        if (j.contains("note")) t.note = j.at("note").get<std::string>();
        expectedTurns = j.at("turns").get<std::size_t>();
        headerLine = lineNo;
        traces.push_back(std::move(t));
      } else {
        traces.back().turns.push_back(turn_from_json(j));
      }
    } catch (const Error& e) {
      throw fail(e.what());
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  if (!traces.empty() && traces.back().turns.size() != expectedTurns)
    throw fail("trace starting at line " + std::to_string(headerLine) + " is truncated");
  return traces;
}

inline std::vector<Playtrace> read_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_traces(in);
}

}  // namespace md2
