#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "md2/engine.hpp"
#include "md2/state.hpp"

namespace md2 {

// Order matches the label layout: R, TC, MK.
enum class PersonaKind : std::uint8_t { Runner, TreasureCollector, MonsterKiller };

inline constexpr PersonaKind kPersonas[3] = {PersonaKind::Runner, PersonaKind::TreasureCollector,
                                              PersonaKind::MonsterKiller};

constexpr std::string_view to_string(PersonaKind k) {
  switch (k) {
    case PersonaKind::Runner: return "runner";
    case PersonaKind::TreasureCollector: return "treasure_collector";
    case PersonaKind::MonsterKiller: return "monster_killer";
  }
  return "?";
}

constexpr std::string_view short_name(PersonaKind k) {
  switch (k) {
    case PersonaKind::Runner: return "R";
    case PersonaKind::TreasureCollector: return "TC";
    case PersonaKind::MonsterKiller: return "MK";
  }
  return "?";
}

inline PersonaKind parse_persona(std::string_view name) {
  for (PersonaKind k : kPersonas)
    if (to_string(k) == name || short_name(k) == name) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown persona '" + std::string(name) + "'");
}

struct PersonaSpec {
  PersonaKind kind = PersonaKind::Runner;
  double c = 45.0;   // weight per remaining monster or treasure
  double k = 1e9;    // death penalty

  static PersonaSpec of(PersonaKind kind) { return PersonaSpec{kind}; }

  void validate() const {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "persona weight c must be positive");
    if (!(k > c * 1000.0)) throw Error(ErrorCode::InvalidArgument, "death penalty k must dominate c");
  }
};

struct PlanBudget {
  enum class Mode : std::uint8_t { Nodes, WallClock };
  Mode mode = Mode::Nodes;
  int maxExpansions = 5000;
  double seconds = 1.0;

  static PlanBudget nodes(int n) { return PlanBudget{Mode::Nodes, n, 0.0}; }
  static PlanBudget wall_clock(double s) { return PlanBudget{Mode::WallClock, 0, s}; }

  bool deterministic() const { return mode == Mode::Nodes; }

  void validate() const {
    if (mode == Mode::Nodes && maxExpansions <= 0) throw Error(ErrorCode::InvalidArgument, "node budget must be positive");
    if (mode == Mode::WallClock && !(seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "time budget must be positive");
  }

  std::string describe() const {
    return mode == Mode::Nodes ? "nodes:" + std::to_string(maxExpansions) : "seconds:" + std::to_string(seconds);
  }
};

struct SearchNode {
  GameState state;
  int steps = 0;
  double g = 0.0;
  double h = 0.0;
  int rootIndex = -1;  // position of firstAction in the root's action list
  Action firstAction;

  double f() const { return g + h; }
  bool dead() const { return state.outcome == Outcome::Dead; }
};

namespace detail {

inline double nearest(const GameState& s, Coord from, const std::vector<Coord>& targets) {
  const Level& lv = s.map();
  int best = lv.unreachable();
  for (Coord t : targets) best = std::min(best, lv.distance(from, t));
  return best;
}

inline std::vector<Coord> killable_positions(const GameState& s) {
  std::vector<Coord> out;
  for (const auto& m : s.monsters)
    if (m.alive && m.kind != MonsterKind::Minitaur) out.push_back(m.pos);
  return out;
}

inline std::vector<Coord> treasure_positions(const GameState& s) {
  std::vector<Coord> out;
  for (int i = 0; i < s.map().tile_count(); ++i)
    if (s.items[i] == ItemKind::Treasure) out.push_back(s.map().coord(i));
  return out;
}

}  // namespace detail

/// Distance-to-goal estimate. Unreachable targets count as the map area plus one.
inline double persona_heuristic(const PersonaSpec& spec, const GameState& s) {
  const Level& lv = s.map();
  const double toExit = lv.distance(s.heroPos, lv.exit);
  switch (spec.kind) {
    case PersonaKind::Runner: return toExit;
    case PersonaKind::MonsterKiller: {
      const auto targets = detail::killable_positions(s);
      return targets.empty() ? toExit : detail::nearest(s, s.heroPos, targets);
    }
    case PersonaKind::TreasureCollector: {
      const auto targets = detail::treasure_positions(s);
      return targets.empty() ? toExit : detail::nearest(s, s.heroPos, targets);
    }
  }
  return toExit;
}

/// Path cost. The runner minimises steps (the argmin of maximising -steps);
/// the collectors pay c per remaining target and k on death.
inline double persona_cost(const PersonaSpec& spec, const GameState& s, int steps) {
  const double dead = s.outcome == Outcome::Dead ? 1.0 : 0.0;
  switch (spec.kind) {
    case PersonaKind::Runner: return static_cast<double>(steps);
    case PersonaKind::MonsterKiller: return spec.c * s.killable_monsters() + spec.k * dead;
    case PersonaKind::TreasureCollector: return spec.c * s.count_items(ItemKind::Treasure) + spec.k * dead;
  }
  return 0.0;
}

inline double persona_cost(const PersonaSpec& spec, const SearchNode& node) {
  return persona_cost(spec, node.state, node.steps);
}

/// Actions the planner considers. The runner never throws (it cannot shorten
/// the way out); legality itself is unchanged.
inline std::vector<Action> planning_actions(const PersonaSpec& spec, const GameState& s) {
  auto actions = legal_actions(s);
  if (spec.kind == PersonaKind::Runner) std::erase_if(actions, [](const Action& a) { return !a.is_move(); });
  return actions;
}

struct PlanStats {
  int expansions = 0;
  int generated = 0;
  bool reachedGoal = false;
};

/// One online-planning step: best-first search from `root` ordered by
/// f = g + h, stopping when the budget runs out, the frontier empties or a
/// winning state is popped. Returns the first move toward the best node seen
/// (living nodes first, then lowest f, lower h, root action order).
inline Action plan_next_action(const GameState& root, const PersonaSpec& spec, const PlanBudget& budget,
                               PlanStats* stats = nullptr) {
  if (root.outcome != Outcome::Ongoing) throw Error(ErrorCode::TerminalState, "cannot plan from a finished game");
  budget.validate();
  const auto rootActions = planning_actions(spec, root);
  if (rootActions.empty()) throw Error(ErrorCode::TerminalState, "no legal actions");

  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(budget.seconds));

  std::vector<SearchNode> nodes;
  nodes.reserve(budget.deterministic() ? static_cast<std::size_t>(budget.maxExpansions) * 4 + 8 : 4096);
  nodes.push_back(SearchNode{root, 0, persona_cost(spec, root, 0), persona_heuristic(spec, root), -1, rootActions.front()});

  struct OpenEntry {
    double f;
    double h;
    std::size_t seq;
  };
  auto worse = [](const OpenEntry& a, const OpenEntry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.seq > b.seq;
  };
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, decltype(worse)> open(worse);
  open.push({nodes[0].f(), nodes[0].h, 0});
  std::unordered_set<std::uint64_t> closed;

  auto better = [](const SearchNode& a, const SearchNode& b) {
    if (a.dead() != b.dead()) return !a.dead();
    if (a.f() != b.f()) return a.f() < b.f();
    if (a.h != b.h) return a.h < b.h;
    return a.rootIndex < b.rootIndex;
  };
  std::size_t best = 0;
  PlanStats local;

  while (!open.empty()) {
    if (budget.deterministic()) {
      if (local.expansions >= budget.maxExpansions) break;
    } else if (local.expansions > 0 && Clock::now() >= deadline) {
      break;
    }
    const std::size_t idx = open.top().seq;
    open.pop();
    if (!closed.insert(position_key(nodes[idx].state)).second) continue;
    if (nodes[idx].state.outcome == Outcome::Won && idx != 0) {
      local.reachedGoal = true;
      break;
    }
    if (nodes[idx].state.outcome != Outcome::Ongoing) continue;
    ++local.expansions;

    const auto actions = idx == 0 ? rootActions : planning_actions(spec, nodes[idx].state);
    for (std::size_t a = 0; a < actions.size(); ++a) {
      auto step = apply_unchecked(nodes[idx].state, actions[a]);
      SearchNode child;
      child.steps = nodes[idx].steps + 1;
      child.rootIndex = idx == 0 ? static_cast<int>(a) : nodes[idx].rootIndex;
      child.firstAction = idx == 0 ? actions[a] : nodes[idx].firstAction;
      child.state = std::move(step.state);
      child.g = persona_cost(spec, child.state, child.steps);
      child.h = persona_heuristic(spec, child.state);
      nodes.push_back(std::move(child));
      const std::size_t seq = nodes.size() - 1;
      ++local.generated;
      if (best == 0 || better(nodes[seq], nodes[best])) best = seq;
      open.push({nodes[seq].f(), nodes[seq].h, seq});
    }
  }
  if (stats) *stats = local;
  if (best == 0) return rootActions.front();
  return nodes[best].firstAction;
}

/// Memoises deterministic plans by state digest. Planning under a node budget
/// is a pure function of (state, persona, budget), so a hit is exact.
class PlanCache {
 public:
  std::optional<Action> find(const GameState& s, const PersonaSpec& spec, const PlanBudget& budget) const {
    if (!budget.deterministic()) return std::nullopt;
    std::lock_guard lock(mutex_);
    auto it = plans_.find(key(s, spec, budget));
    if (it == plans_.end()) return std::nullopt;
    ++hits_;
    return it->second;
  }

  void store(const GameState& s, const PersonaSpec& spec, const PlanBudget& budget, const Action& a) {
    if (!budget.deterministic()) return;
    std::lock_guard lock(mutex_);
    plans_[key(s, spec, budget)] = a;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return plans_.size();
  }
  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }

 private:
  static std::uint64_t key(const GameState& s, const PersonaSpec& spec, const PlanBudget& budget) {
    Fnv1a h;
    h.u64(state_hash(s));
    h.i32(static_cast<std::int32_t>(spec.kind));
    h.bytes(&spec.c, sizeof spec.c);
    h.bytes(&spec.k, sizeof spec.k);
    h.i32(budget.maxExpansions);
    return h.value();
  }

  mutable std::mutex mutex_;
  mutable std::size_t hits_ = 0;
  std::unordered_map<std::uint64_t, Action> plans_;
};

inline Action plan_cached(const GameState& s, const PersonaSpec& spec, const PlanBudget& budget, PlanCache* cache) {
  if (cache) {
    if (auto hit = cache->find(s, spec, budget)) return *hit;
  }
  Action a = plan_next_action(s, spec, budget);
  if (cache) cache->store(s, spec, budget, a);
  return a;
}

}  // namespace md2
