#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "md2/features.hpp"
#include "md2/labeling.hpp"
#include "md2/svm.hpp"
#include "md2/trace.hpp"

namespace md2 {

enum class SessionStatus : std::uint8_t { Active, Finished };

constexpr std::string_view to_string(SessionStatus s) { return s == SessionStatus::Active ? "active" : "finished"; }

struct PredictionSnapshot {
  std::array<double, 3> probabilities{};  // R, TC, MK
  int basedOnTurns = 0;
  std::string modelId;
};

/// Where a finished session's trace was written.
struct PersistedTrace {
  std::string sessionId;
  std::string file;   // path relative to the data directory
  int line = 0;       // 1-based line of the header record
  TraceOutcome outcome = TraceOutcome::Abandoned;
  std::size_t turns = 0;
};

struct ActionReply {
  GameState state;
  std::vector<MechanicEvent> events;
  std::optional<PredictionSnapshot> prediction;
};

struct QuestionnaireRecord {
  std::string sessionId;
  QuestionnaireResponse response;
  QuestionnaireScores scores;
};

/// Everything a client needs to draw the current turn.
inline json state_view(const GameState& s) {
  const Level& lv = s.map();
  std::vector<std::string> rows(lv.height, std::string(lv.width, '.'));
  for (int y = 0; y < lv.height; ++y) {
    for (int x = 0; x < lv.width; ++x) {
      const Coord c{x, y};
      char g = lv.is_wall(c) ? '#' : '.';
      switch (s.item_at(c)) {
        case ItemKind::Treasure: g = '$'; break;
        case ItemKind::Potion: g = '+'; break;
        case ItemKind::Trap: g = '^'; break;
        case ItemKind::Portal:
          for (const auto& it : lv.items)
            if (it.kind == ItemKind::Portal && it.pos == c) g = static_cast<char>('0' + it.pairId);
          break;
        case ItemKind::None: break;
      }
      if (c == lv.exit) g = 'S';
      rows[y][x] = g;
    }
  }
  json entities = json::array();
  entities.push_back({{"type", "hero"}, {"pos", detail::coord_json(s.heroPos)}, {"hp", s.heroHp}});
  for (const auto& m : s.monsters) {
    if (!m.alive) continue;
    rows[m.pos.y][m.pos.x] = monster_glyph(m.kind);
    json e = {{"type", to_string(m.kind)}, {"pos", detail::coord_json(m.pos)}, {"hp", m.hp}};
    if (m.kind == MonsterKind::Blob) e["level"] = m.blobLevel;
    if (m.kind == MonsterKind::Minitaur) e["stunned"] = m.stunTurns;
    entities.push_back(std::move(e));
  }
  if (!s.javelin.held) {
    entities.push_back({{"type", "javelin"}, {"pos", detail::coord_json(s.javelin.pos)}});
  }
  rows[s.heroPos.y][s.heroPos.x] = '@';
  json legal = json::array();
  if (s.outcome == Outcome::Ongoing)
    for (const auto& a : legal_actions(s)) legal.push_back(to_string(a));
  return {{"map", lv.name},
          {"width", lv.width},
          {"height", lv.height},
          {"grid", rows},
          {"entities", entities},
          {"hero", {{"pos", detail::coord_json(s.heroPos)}, {"hp", s.heroHp}, {"max_hp", kMaxHeroHp},
                    {"score", s.treasureScore}, {"javelin", s.javelin.held ? "held" : "on_ground"}}},
          {"turn", s.turn},
          {"outcome", to_string(s.outcome)},
          {"legal_actions", legal}};
}

inline json event_json(const MechanicEvent& e) {
  return {{"kind", to_string(e.kind)}, {"turn", e.turn}, {"subject", detail::coord_json(e.subject)}};
}

inline json prediction_json(const PredictionSnapshot& p) {
  return {{"probabilities", {{"R", p.probabilities[0]}, {"TC", p.probabilities[1]}, {"MK", p.probabilities[2]}}},
          {"based_on_turns", p.basedOnTurns},
          {"model", p.modelId}};
}

inline json scores_json(const QuestionnaireScores& s) {
  return {{"R", s.runner}, {"TC", s.treasureCollector}, {"MK", s.monsterKiller}};
}

/// Live play sessions. The server owns the rules: clients only submit
/// actions. Requests on one session are serialized by its own mutex.
class SessionService {
 public:
  struct Summary {
    std::string id;
    std::string mapName;
    SessionStatus status = SessionStatus::Active;
    std::string createdAt;
    GameState state;
  };

  SessionService(std::vector<LevelPtr> maps, std::string dataDir, std::optional<SvmModel> model = std::nullopt)
      : dataDir_(std::move(dataDir)), model_(std::move(model)) {
    for (auto& m : maps) maps_[m->name] = std::move(m);
    std::filesystem::create_directories(dataDir_);
  }

  std::vector<std::string> list_maps() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : maps_) out.push_back(name);
    return out;
  }

  bool has_model() const { return model_.has_value(); }
  const std::string& data_dir() const { return dataDir_; }

  Summary create_session(const std::string& mapName) {
    auto it = maps_.find(mapName);
    if (it == maps_.end()) throw Error(ErrorCode::UnknownMap, "no map named '" + mapName + "'");
    auto s = std::make_shared<Session>();
    s->mapName = mapName;
    s->createdAt = utc_timestamp();
    s->state = initial_state(it->second);
    s->trace.mapName = mapName;
    s->trace.level = it->second;
    s->trace.initialState = s->state;
    std::unique_lock lock(sessionsMutex_);
    do {
      s->id = fresh_id();
    } while (sessions_.count(s->id));
    s->trace.source = TraceSource::human(s->id);
    sessions_[s->id] = s;
    return summary(*s);
  }

  Summary get_state(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return summary(*s);
  }

  /// An illegal action leaves the session untouched.
  ActionReply submit_action(const std::string& id, const Action& action) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (s->status == SessionStatus::Finished || s->state.outcome != Outcome::Ongoing)
      throw Error(ErrorCode::SessionFinished, "session " + id + " is over");
    auto step = apply_action(s->state, action);
    s->trace.turns.push_back(make_turn_record(action, step));
    add_events(s->counts, step.events);
    s->state = step.state;
    ActionReply reply{std::move(step.state), std::move(step.events), std::nullopt};
    if (model_) reply.prediction = predict_locked(*s);
    return reply;
  }

  PredictionSnapshot prediction(const std::string& id) const {
    auto s = find(id);
    if (!model_) throw Error(ErrorCode::NoModel, "no frequency model loaded");
    std::lock_guard lock(s->mutex);
    return predict_locked(*s);
  }

  /// Persists the trace; a game still running is stored as abandoned.
  /// Finishing twice returns the first reference.
  PersistedTrace finish_session(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (s->persisted) return *s->persisted;
    s->trace.outcome = trace_outcome(s->state.outcome);
    if (s->trace.outcome == TraceOutcome::Abandoned) s->trace.note = "left at turn " + std::to_string(s->state.turn);
    s->persisted = persist(s->trace);
    s->status = SessionStatus::Finished;
    return *s->persisted;
  }

  Playtrace trace_of(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->trace;
  }

  QuestionnaireRecord submit_questionnaire(const std::string& id, const std::vector<int>& answers) {
    auto s = find(id);
    QuestionnaireRecord rec;
    rec.sessionId = id;
    rec.response = QuestionnaireResponse::from_answers(answers, id);
    rec.scores = questionnaire_scores(rec.response);
    {
      std::lock_guard lock(s->mutex);
      s->questionnaire = rec;
    }
    std::vector<int> all{rec.response.playFrequency};
    all.insert(all.end(), rec.response.answers.begin(), rec.response.answers.end());
    append_line("questionnaires.jsonl",
                json{{"session", id}, {"answers", all}, {"scores", scores_json(rec.scores)}, {"at", utc_timestamp()}});
    return rec;
  }

  std::optional<QuestionnaireRecord> questionnaire(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->questionnaire;
  }

  /// Reads a persisted trace back from disk.
  Playtrace load_persisted(const PersistedTrace& ref) const {
    const auto traces = read_traces((std::filesystem::path(dataDir_) / ref.file).string());
    for (const auto& t : traces)
      if (t.source.kind == TraceSource::Kind::Human && t.source.sessionId == ref.sessionId) return t;
    throw Error(ErrorCode::UnknownSession, "no trace for session " + ref.sessionId + " in " + ref.file);
  }

 private:
  struct Session {
    std::string id;
    std::string mapName;
    std::string createdAt;
    SessionStatus status = SessionStatus::Active;
    GameState state;
    Playtrace trace;
    FeatureVector counts;
    std::optional<PersistedTrace> persisted;
    std::optional<QuestionnaireRecord> questionnaire;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessionsMutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
    return it->second;
  }

  static Summary summary(const Session& s) { return {s.id, s.mapName, s.status, s.createdAt, s.state}; }

  PredictionSnapshot predict_locked(const Session& s) const {
    PredictionSnapshot p;
    const auto pred = model_->predict_raw(s.counts);
    for (std::size_t i = 0; i < 3; ++i) p.probabilities[i] = 1.0 / (1.0 + std::exp(-pred.margins[i]));
    p.basedOnTurns = static_cast<int>(s.trace.turns.size());
    p.modelId = model_->id;
    return p;
  }

  static std::string fresh_id() {
    static thread_local std::random_device rd;
    std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    std::uint64_t lo = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    return hash_hex(hi) + hash_hex(lo);
  }

  static std::tm utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    return tm;
  }

  static std::string utc_timestamp() {
    const auto tm = utc_now();
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  PersistedTrace persist(const Playtrace& trace) {
    const auto tm = utc_now();
    char name[40];
    std::strftime(name, sizeof name, "traces-%Y-%m-%d.jsonl", &tm);
    std::lock_guard lock(fileMutex_);
    const auto path = std::filesystem::path(dataDir_) / name;
    int lines = 0;
    if (std::ifstream in(path); in) {
      std::string line;
      while (std::getline(in, line)) ++lines;
    }
    {
      std::ofstream out(path, std::ios::app);
      if (!out) throw Error(ErrorCode::Io, "cannot append to " + path.string());
      write_trace(out, trace);
    }
    PersistedTrace ref{trace.source.sessionId, name, lines + 1, trace.outcome, trace.turns.size()};
    std::ofstream index(std::filesystem::path(dataDir_) / "index.jsonl", std::ios::app);
    index << json{{"session", ref.sessionId}, {"map", trace.mapName}, {"file", ref.file}, {"line", ref.line},
                  {"outcome", to_string(ref.outcome)}, {"turns", ref.turns}, {"at", utc_timestamp()}}
                 .dump()
          << '\n';
    return ref;
  }

  void append_line(const std::string& file, const json& j) {
    std::lock_guard lock(fileMutex_);
    std::ofstream out(std::filesystem::path(dataDir_) / file, std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot append to " + file);
    out << j.dump() << '\n';
  }

  std::map<std::string, LevelPtr> maps_;
  std::string dataDir_;
  std::optional<SvmModel> model_;
  mutable std::shared_mutex sessionsMutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex fileMutex_;
};

}  // namespace md2
