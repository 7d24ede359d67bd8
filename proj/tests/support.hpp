#pragma once

#include <string>
#include <vector>

#include "md2/md2.hpp"

namespace md2::testing {

inline const std::vector<std::string>& reference_map_names() {
  static const std::vector<std::string> names = {"crossroads", "gallery", "portals", "labyrinth", "arena"};
  return names;
}

inline std::string map_path(const std::string& name) { return std::string(MD2_MAPS_DIR) + "/" + name + ".txt"; }

inline std::vector<LevelPtr> reference_maps() {
  std::vector<LevelPtr> out;
  for (const auto& n : reference_map_names()) out.push_back(load_map_file(map_path(n)));
  return out;
}

inline LevelPtr heldout_map() { return load_map_file(std::string(MD2_MAPS_DIR) + "/heldout/serpent.txt"); }

inline GameState state_of(const std::string& text) { return initial_state(load_map(text, "t")); }

inline Action N() { return Action::move(Direction::North); }
inline Action S() { return Action::move(Direction::South); }
inline Action E() { return Action::move(Direction::East); }
inline Action W() { return Action::move(Direction::West); }

inline int count_kind(const std::vector<MechanicEvent>& events, Mechanic kind) {
  int n = 0;
  for (const auto& e : events) n += e.kind == kind ? 1 : 0;
  return n;
}

inline bool has(const std::vector<MechanicEvent>& events, Mechanic kind) { return count_kind(events, kind) > 0; }

inline std::vector<Mechanic> kinds(const std::vector<MechanicEvent>& events) {
  std::vector<Mechanic> out;
  for (const auto& e : events) out.push_back(e.kind);
  return out;
}

/// Random legal action sequence played to the end or `maxTurns`.
inline Playtrace random_trace(const LevelPtr& level, std::uint64_t seed, int maxTurns = 200) {
  SplitMix64 rng(seed);
  return record_episode(
      level,
      [&rng](const GameState& s) {
        const auto actions = legal_actions(s);
        return actions[rng.below(actions.size())];
      },
      TraceSource::scripted(), maxTurns);
}

}  // namespace md2::testing
