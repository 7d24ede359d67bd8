#pragma once

#include <algorithm>
#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "md2/engine.hpp"
#include "md2/trace.hpp"

namespace md2 {

struct FeatureVector {
  std::array<double, kMechanicCount> counts{};
  bool normalized = false;

  double operator[](Mechanic m) const { return counts[static_cast<std::size_t>(m)]; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline void add_events(FeatureVector& v, const std::vector<MechanicEvent>& events) {
  for (const auto& e : events) v.counts[static_cast<std::size_t>(e.kind)] += 1.0;
}

/// Raw per-mechanic counts over the whole trace.
inline FeatureVector mechanic_frequencies(const Playtrace& trace) {
  FeatureVector v;
  for (const auto& t : trace.turns) add_events(v, t.events);
  return v;
}

/// Per-mechanic max scaling. Mechanics never seen in the fitting data keep a
/// divisor of 1 so they map to 0.
class Normalizer {
 public:
  Normalizer() { perMechanicMax_.fill(1.0); }
  explicit Normalizer(const std::array<double, kMechanicCount>& maxima) : perMechanicMax_(maxima) {
    for (double& m : perMechanicMax_) m = std::max(m, 1.0);
  }

  static Normalizer fit(const std::vector<FeatureVector>& dataset) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a normalizer on no data");
    std::array<double, kMechanicCount> maxima{};
    for (const auto& v : dataset) {
      if (v.normalized) throw Error(ErrorCode::AlreadyNormalized, "normalizer must be fitted on raw counts");
      for (std::size_t i = 0; i < kMechanicCount; ++i) maxima[i] = std::max(maxima[i], v.counts[i]);
    }
    return Normalizer(maxima);
  }

  FeatureVector apply(const FeatureVector& v) const {
    if (v.normalized) throw Error(ErrorCode::AlreadyNormalized, "feature vector is already normalized");
    FeatureVector out = v;
    for (std::size_t i = 0; i < kMechanicCount; ++i) out.counts[i] = v.counts[i] / perMechanicMax_[i];
    out.normalized = true;
    return out;
  }

  std::vector<FeatureVector> apply(const std::vector<FeatureVector>& vs) const {
    std::vector<FeatureVector> out;
    out.reserve(vs.size());
    for (const auto& v : vs) out.push_back(apply(v));
    return out;
  }

  const std::array<double, kMechanicCount>& maxima() const { return perMechanicMax_; }
  friend bool operator==(const Normalizer&, const Normalizer&) = default;

 private:
  std::array<double, kMechanicCount> perMechanicMax_;
};

// ---------------------------------------------------------------------------
// Cropped observation windows.

enum class CropChannel : std::uint8_t {
  Wall,
  Floor,
  Exit,
  Treasure,
  Potion,
  Trap,
  Portal,
  Goblin,
  Wizard,
  Blob,
  Ogre,
  Minitaur,
  JavelinOnGround,
};

inline constexpr int kCropChannels = 13;
inline constexpr int kCropCells = 9;
inline constexpr int kCropWindowSize = kCropCells * kCropChannels;
inline constexpr int kCropInputSize = kCropWindowSize + 1;  // + hero hp

struct CropStep {
  // cell-major: (row * 3 + col) * kCropChannels + channel, rows top to bottom
  std::array<double, kCropWindowSize> window{};
  double heroHp = 0.0;  // scaled to [0, 1]

  double at(int row, int col, CropChannel ch) const {
    return window[(row * 3 + col) * kCropChannels + static_cast<int>(ch)];
  }
  friend bool operator==(const CropStep&, const CropStep&) = default;
};

struct CroppedSequence {
  std::vector<CropStep> steps;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
};

inline int monster_channel(MonsterKind kind) {
  switch (kind) {
    case MonsterKind::Goblin: return static_cast<int>(CropChannel::Goblin);
    case MonsterKind::GoblinWizard: return static_cast<int>(CropChannel::Wizard);
    case MonsterKind::Blob: return static_cast<int>(CropChannel::Blob);
    case MonsterKind::Ogre: return static_cast<int>(CropChannel::Ogre);
    case MonsterKind::Minitaur: return static_cast<int>(CropChannel::Minitaur);
  }
  return 0;
}

/// 3x3 window centred on the hero. Out-of-bounds cells read as wall; blob
/// intensity is level / 3.
inline CropStep crop_state(const GameState& s) {
  const Level& lv = s.map();
  CropStep step;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      const Coord c{s.heroPos.x + col - 1, s.heroPos.y + row - 1};
      double* cell = &step.window[(row * 3 + col) * kCropChannels];
      if (lv.is_wall(c)) {
        cell[static_cast<int>(CropChannel::Wall)] = 1.0;
        continue;
      }
      cell[static_cast<int>(c == lv.exit ? CropChannel::Exit : CropChannel::Floor)] = 1.0;
      switch (s.item_at(c)) {
        case ItemKind::Treasure: cell[static_cast<int>(CropChannel::Treasure)] = 1.0; break;
        case ItemKind::Potion: cell[static_cast<int>(CropChannel::Potion)] = 1.0; break;
        case ItemKind::Trap: cell[static_cast<int>(CropChannel::Trap)] = 1.0; break;
        case ItemKind::Portal: cell[static_cast<int>(CropChannel::Portal)] = 1.0; break;
        case ItemKind::None: break;
      }
      for (const auto& m : s.monsters) {
        if (!m.alive || m.pos != c) continue;
        cell[monster_channel(m.kind)] = m.kind == MonsterKind::Blob ? m.blobLevel / 3.0 : 1.0;
      }
      if (!s.javelin.held && s.javelin.pos == c) cell[static_cast<int>(CropChannel::JavelinOnGround)] = 1.0;
    }
  }
  step.heroHp = static_cast<double>(s.heroHp) / kMaxHeroHp;
  return step;
}

/// One window per turn, cut from the state before that turn's action.
inline CroppedSequence crop_sequence(const Playtrace& trace) {
  CroppedSequence seq;
  seq.steps.reserve(trace.turns.size());
  replay(trace, [&](const GameState& s, const TurnRecord&) { seq.steps.push_back(crop_state(s)); });
  return seq;
}

/// Flattens one step into the recurrent model's input layout.
inline std::array<double, kCropInputSize> crop_input(const CropStep& step) {
  std::array<double, kCropInputSize> x{};
  std::copy(step.window.begin(), step.window.end(), x.begin());
  x[kCropWindowSize] = step.heroHp;
  return x;
}

inline std::string feature_csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kMechanicCount; ++i) {
    if (i) out += ',';
    out += kMechanicNames[i];
  }
  return out;
}

}  // namespace md2
