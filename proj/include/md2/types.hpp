#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace md2 {

/// Machine-readable error codes shared by every module and the HTTP layer.
enum class ErrorCode {
  UnknownGlyph,
  UnpairedPortal,
  MissingHero,
  MissingExit,
  DuplicateHero,
  DuplicateExit,
  NonRectangular,
  EmptyMap,
  OutOfBounds,
  TerminalState,
  IllegalAction,
  ReplayMismatch,
  EmptyTrace,
  MalformedRecord,
  AlreadyNormalized,
  UnnormalizedInput,
  EmptySequence,
  EmptyDataset,
  InvalidArgument,
  InvalidResponse,
  Divergence,
  UnknownMap,
  UnknownSession,
  SessionFinished,
  NoModel,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownGlyph: return "UnknownGlyph";
    case ErrorCode::UnpairedPortal: return "UnpairedPortal";
    case ErrorCode::MissingHero: return "MissingHero";
    case ErrorCode::MissingExit: return "MissingExit";
    case ErrorCode::DuplicateHero: return "DuplicateHero";
    case ErrorCode::DuplicateExit: return "DuplicateExit";
    case ErrorCode::NonRectangular: return "NonRectangular";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::TerminalState: return "TerminalState";
    case ErrorCode::IllegalAction: return "IllegalAction";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::AlreadyNormalized: return "AlreadyNormalized";
    case ErrorCode::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidResponse: return "InvalidResponse";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::UnknownMap: return "UnknownMap";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionFinished: return "SessionFinished";
    case ErrorCode::NoModel: return "NoModel";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Tile coordinate. x is the column, y the row; ordering is row-major.
struct Coord {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Coord, Coord) = default;
  friend constexpr std::strong_ordering operator<=>(Coord a, Coord b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  friend constexpr Coord operator+(Coord a, Coord b) { return {a.x + b.x, a.y + b.y}; }
};

enum class Direction : std::uint8_t { North, South, East, West };

inline constexpr Direction kDirections[4] = {Direction::North, Direction::South, Direction::East,
                                             Direction::West};

constexpr Coord offset(Direction d) {
  switch (d) {
    case Direction::North: return {0, -1};
    case Direction::South: return {0, 1};
    case Direction::East: return {1, 0};
    case Direction::West: return {-1, 0};
  }
  return {0, 0};
}

constexpr char direction_letter(Direction d) {
  switch (d) {
    case Direction::North: return 'N';
    case Direction::South: return 'S';
    case Direction::East: return 'E';
    case Direction::West: return 'W';
  }
  return '?';
}

// FNV-1a, 64 bit.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void i32(std::int32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint32_t>(v) >> (8 * i)) & 0xff);
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(b, 8);
  }
  void str(std::string_view s) {
    i32(static_cast<std::int32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// splitmix64; used wherever a seedable, platform-stable generator is needed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  // Uniform real in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

 private:
  std::uint64_t state_;
};

template <typename Container>
void shuffle_in_place(Container& c, SplitMix64& rng) {
  for (std::size_t i = c.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(c[i - 1], c[j]);
  }
}

}  // namespace md2
