#pragma once

#include <array>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "md2/labels.hpp"
#include "md2/persona.hpp"
#include "md2/trace.hpp"

namespace md2 {

struct Agreement {
  int agreed = 0;
  int total = 0;
  double ratio = 0.0;
};

struct AgreementReport {
  std::array<Agreement, 3> perPersona{};  // R, TC, MK

  const Agreement& operator[](PersonaKind k) const { return perPersona[static_cast<std::size_t>(k)]; }
};

inline constexpr double kAgreementThreshold = 0.5;

/// Replays the trace and asks the persona for its move at every recorded
/// pre-action state. Moves agree by direction, throws by exact target.
inline Agreement action_agreement(const Playtrace& trace, const PersonaSpec& spec, const PlanBudget& budget,
                                  PlanCache* cache = nullptr) {
  if (trace.turns.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no turns to score");
  Agreement a;
  replay(trace, [&](const GameState& s, const TurnRecord& rec) {
    if (plan_cached(s, spec, budget, cache) == rec.action) ++a.agreed;
    ++a.total;
  });
  a.ratio = static_cast<double>(a.agreed) / a.total;
  return a;
}

/// Strictly more than half the moves must agree.
inline LabelSet labels_from_ratios(const std::array<double, 3>& ratios) {
  LabelSet l;
  for (std::size_t i = 0; i < 3; ++i) l.set(kPersonas[i], ratios[i] > kAgreementThreshold);
  return l;
}

struct AarResult {
  LabelSet labels;
  AgreementReport report;
};

inline std::array<PersonaSpec, 3> default_personas() {
  return {PersonaSpec::of(PersonaKind::Runner), PersonaSpec::of(PersonaKind::TreasureCollector),
          PersonaSpec::of(PersonaKind::MonsterKiller)};
}

/// `personas` must be given in R, TC, MK order.
inline AarResult aar_labels(const Playtrace& trace, const std::array<PersonaSpec, 3>& personas,
                            const PlanBudget& budget, PlanCache* cache = nullptr) {
  AarResult out;
  std::array<double, 3> ratios{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (personas[i].kind != kPersonas[i])
      throw Error(ErrorCode::InvalidArgument, "personas must be ordered runner, treasure_collector, monster_killer");
    out.report.perPersona[i] = action_agreement(trace, personas[i], budget, cache);
    ratios[i] = out.report.perPersona[i].ratio;
  }
  out.labels = labels_from_ratios(ratios);
  return out;
}

// ---------------------------------------------------------------------------
// Questionnaire self-perception labels.

/// Answer 0 is the play-frequency question; answers 1..9 are questions 2..10
/// on the Never(0) .. Always(4) scale.
struct QuestionnaireResponse {
  std::string respondent;
  int playFrequency = 0;
  std::array<int, 9> answers{};

  int question(int number) const { return answers.at(static_cast<std::size_t>(number - 2)); }

  void validate() const {
    if (playFrequency < 0 || playFrequency > 4)
      throw Error(ErrorCode::InvalidResponse, "play frequency answer must be in [0, 4]");
    for (std::size_t i = 0; i < answers.size(); ++i)
      if (answers[i] < 0 || answers[i] > 4)
        throw Error(ErrorCode::InvalidResponse, "answer to question " + std::to_string(i + 2) + " must be in [0, 4]");
  }

  static QuestionnaireResponse from_answers(const std::vector<int>& ten, std::string respondent = {}) {
    if (ten.size() != 10) throw Error(ErrorCode::InvalidResponse, "expected 10 answers, got " + std::to_string(ten.size()));
    QuestionnaireResponse r;
    r.respondent = std::move(respondent);
    r.playFrequency = ten[0];
    for (std::size_t i = 0; i < 9; ++i) r.answers[i] = ten[i + 1];
    r.validate();
    return r;
  }
};

struct QuestionnaireScores {
  double runner = 0.0;
  double treasureCollector = 0.0;
  double monsterKiller = 0.0;

  friend bool operator==(const QuestionnaireScores&, const QuestionnaireScores&) = default;
};

// Runner: 2, 7, 9. Treasure collector: 3, 6, 8. Monster killer: 4, 5, 10.
inline QuestionnaireScores questionnaire_scores(const QuestionnaireResponse& r) {
  r.validate();
  auto mean3 = [&](int a, int b, int c) { return (r.question(a) + r.question(b) + r.question(c)) / 3.0; };
  return {mean3(2, 7, 9), mean3(3, 6, 8), mean3(4, 5, 10)};
}

inline QuestionnaireScores questionnaire_means(const std::vector<QuestionnaireScores>& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyDataset, "no questionnaires");
  QuestionnaireScores m;
  for (const auto& s : corpus) {
    m.runner += s.runner;
    m.treasureCollector += s.treasureCollector;
    m.monsterKiller += s.monsterKiller;
  }
  const double n = static_cast<double>(corpus.size());
  return {m.runner / n, m.treasureCollector / n, m.monsterKiller / n};
}

/// A persona is self-assigned when its score is strictly above the corpus mean.
inline LabelSet questionnaire_labels(const QuestionnaireScores& s, const QuestionnaireScores& means) {
  return {s.runner > means.runner, s.treasureCollector > means.treasureCollector,
          s.monsterKiller > means.monsterKiller};
}

/// One respondent per line: either 10 integers or an id followed by 10
/// integers, separated by whitespace or commas. '#' starts a comment.
inline std::vector<QuestionnaireResponse> read_questionnaires(std::istream& in) {
  std::vector<QuestionnaireResponse> out;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    std::string id;
    if (tokens.size() == 11) {
      id = tokens.front();
      tokens.erase(tokens.begin());
    }
    if (tokens.size() != 10)
      throw Error(ErrorCode::InvalidResponse, "line " + std::to_string(lineNo) + ": expected 10 answers");
    std::vector<int> answers;
    for (const auto& t : tokens) {
      try {
        std::size_t used = 0;
        answers.push_back(std::stoi(t, &used));
        if (used != t.size()) throw std::invalid_argument(t);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidResponse, "line " + std::to_string(lineNo) + ": '" + t + "' is not an integer");
      }
    }
    if (id.empty()) id = std::to_string(out.size());
    try {
      out.push_back(QuestionnaireResponse::from_answers(answers, id));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidResponse, "line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace md2
