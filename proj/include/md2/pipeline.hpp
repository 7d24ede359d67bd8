#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "md2/eval.hpp"
#include "md2/features.hpp"
#include "md2/labeling.hpp"
#include "md2/lstm.hpp"
#include "md2/svm.hpp"
#include "md2/trace.hpp"

namespace md2 {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failureMutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Synthetic corpus.

struct GenerateOptions {
  int runsPerPersona = 100;
  PlanBudget budget = PlanBudget::nodes(5000);
  std::array<PersonaSpec, 3> personas = default_personas();
  int maxTurns = 500;
  unsigned threads = 0;
  PlanCache* cache = nullptr;
  std::ostream* warnings = nullptr;
};

/// One trace per (map, persona, run), in that nesting order. Under a node
/// budget the runs of a (map, persona) pair are identical.
inline std::vector<Playtrace> generate_synthetic(const std::vector<LevelPtr>& maps, const GenerateOptions& opt) {
  if (opt.runsPerPersona < 1) throw Error(ErrorCode::InvalidArgument, "runsPerPersona must be at least 1");
  PlanCache localCache;
  PlanCache* cache = opt.cache ? opt.cache : &localCache;
  const std::size_t perMap = 3 * static_cast<std::size_t>(opt.runsPerPersona);
  std::vector<Playtrace> out(maps.size() * perMap);
  parallel_for(out.size(), opt.threads, [&](std::size_t i) {
    const auto& level = maps[i / perMap];
    const auto& spec = opt.personas[(i % perMap) / static_cast<std::size_t>(opt.runsPerPersona)];
    out[i] = record_persona_episode(level, spec, opt.budget, cache, opt.maxTurns);
  });
  if (opt.warnings) {
    for (const auto& t : out)
      if (t.outcome == TraceOutcome::Abandoned)
        *opt.warnings << "warning: " << to_string(t.source.persona) << " on " << t.mapName << " abandoned (" << t.note
                      << ")\n";
  }
  return out;
}

inline std::vector<LabelSet> known_labels(const std::vector<Playtrace>& traces) {
  std::vector<LabelSet> out;
  out.reserve(traces.size());
  for (const auto& t : traces) {
    if (t.source.kind != TraceSource::Kind::Synthetic)
      throw Error(ErrorCode::InvalidArgument, "known labels need synthetic traces");
    out.push_back(LabelSet::of(t.source.persona));
  }
  return out;
}

inline std::vector<AarResult> aar_label_corpus(const std::vector<Playtrace>& traces,
                                               const std::array<PersonaSpec, 3>& personas, const PlanBudget& budget,
                                               PlanCache* cache = nullptr, unsigned threads = 0) {
  std::vector<AarResult> out(traces.size());
  parallel_for(traces.size(), threads, [&](std::size_t i) { out[i] = aar_labels(traces[i], personas, budget, cache); });
  return out;
}

// ---------------------------------------------------------------------------
// Label files: one JSON record per trace.

struct LabelRecord {
  std::size_t trace = 0;
  std::string map;
  std::string respondent;  // questionnaire labels only
  LabelSet labels;
  std::optional<std::array<double, 3>> ratios;
  std::optional<QuestionnaireScores> scores;
  nlohmann::json provenance;
};

inline nlohmann::json label_record_json(const LabelRecord& r) {
  nlohmann::json j = {{"trace", r.trace},
                      {"map", r.map},
                      {"labels", {{"R", r.labels.runner}, {"TC", r.labels.treasureCollector}, {"MK", r.labels.monsterKiller}}},
                      {"combination", to_string(r.labels)},
                      {"labeler", r.provenance}};
  if (!r.respondent.empty()) j["respondent"] = r.respondent;
  if (r.ratios) j["ratios"] = {{"R", (*r.ratios)[0]}, {"TC", (*r.ratios)[1]}, {"MK", (*r.ratios)[2]}};
  if (r.scores)
    j["scores"] = {{"R", r.scores->runner}, {"TC", r.scores->treasureCollector}, {"MK", r.scores->monsterKiller}};
  return j;
}

inline void write_labels(const std::string& path, const std::vector<LabelRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  for (const auto& r : records) out << label_record_json(r).dump() << '\n';
}

inline std::vector<LabelRecord> read_labels(std::istream& in) {
  std::vector<LabelRecord> out;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabelRecord r;
      r.trace = j.at("trace").get<std::size_t>();
      r.map = j.value("map", "");
      r.respondent = j.value("respondent", "");
      const auto& l = j.at("labels");
      r.labels = {l.at("R").get<bool>(), l.at("TC").get<bool>(), l.at("MK").get<bool>()};
      if (j.contains("ratios")) {
        const auto& q = j.at("ratios");
        r.ratios = std::array<double, 3>{q.at("R").get<double>(), q.at("TC").get<double>(), q.at("MK").get<double>()};
      }
      if (j.contains("scores")) {
        const auto& q = j.at("scores");
        r.scores = QuestionnaireScores{q.at("R").get<double>(), q.at("TC").get<double>(), q.at("MK").get<double>()};
      }
      r.provenance = j.value("labeler", nlohmann::json::object());
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<LabelRecord> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_labels(in);
}

/// Orders label records by trace index; every trace needs exactly one record.
inline std::vector<LabelSet> labels_for(const std::vector<LabelRecord>& records, std::size_t traceCount) {
  std::vector<LabelSet> out(traceCount);
  std::vector<bool> seen(traceCount, false);
  for (const auto& r : records) {
    if (r.trace >= traceCount) throw Error(ErrorCode::InvalidArgument, "label record for unknown trace " + std::to_string(r.trace));
    out[r.trace] = r.labels;
    seen[r.trace] = true;
  }
  for (std::size_t i = 0; i < traceCount; ++i)
    if (!seen[i]) throw Error(ErrorCode::InvalidArgument, "trace " + std::to_string(i) + " has no label");
  return out;
}

inline nlohmann::json budget_json(const PlanBudget& b) {
  if (b.mode == PlanBudget::Mode::Nodes) return {{"nodes", b.maxExpansions}};
  return {{"seconds", b.seconds}};
}

inline PlanBudget budget_from_json(const nlohmann::json& j) {
  if (j.contains("seconds")) return PlanBudget::wall_clock(j.at("seconds").get<double>());
  return PlanBudget::nodes(j.value("nodes", 5000));
}

inline nlohmann::json personas_json(const std::array<PersonaSpec, 3>& ps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : ps) out.push_back({{"persona", to_string(p.kind)}, {"c", p.c}, {"k", p.k}});
  return out;
}

inline std::vector<LabelRecord> known_label_records(const std::vector<Playtrace>& traces) {
  const auto labels = known_labels(traces);
  std::vector<LabelRecord> out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    LabelRecord r;
    r.trace = i;
    r.map = traces[i].mapName;
    r.labels = labels[i];
    r.provenance = {{"kind", "known"}};
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<LabelRecord> aar_label_records(const std::vector<Playtrace>& traces,
                                                  const std::vector<AarResult>& results,
                                                  const std::array<PersonaSpec, 3>& personas, const PlanBudget& budget) {
  std::vector<LabelRecord> out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    LabelRecord r;
    r.trace = i;
    r.map = traces[i].mapName;
    r.labels = results[i].labels;
    r.ratios = std::array<double, 3>{results[i].report.perPersona[0].ratio, results[i].report.perPersona[1].ratio,
                                     results[i].report.perPersona[2].ratio};
    r.provenance = {{"kind", "aar"}, {"budget", budget_json(budget)}, {"personas", personas_json(personas)},
                    {"threshold", kAgreementThreshold}};
    out.push_back(std::move(r));
  }
  return out;
}

/// Self-perceived labels for human traces, matched by session id to respondent id.
inline std::vector<LabelRecord> questionnaire_label_records(const std::vector<Playtrace>& traces,
                                                            const std::vector<QuestionnaireResponse>& responses,
                                                            const QuestionnaireScores& means) {
  std::map<std::string, QuestionnaireScores> byRespondent;
  for (const auto& r : responses) byRespondent[r.respondent] = questionnaire_scores(r);
  std::vector<LabelRecord> out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& id = traces[i].source.sessionId;
    auto it = byRespondent.find(id);
    if (traces[i].source.kind != TraceSource::Kind::Human || it == byRespondent.end())
      throw Error(ErrorCode::InvalidArgument, "trace " + std::to_string(i) + " has no matching questionnaire");
    LabelRecord r;
    r.trace = i;
    r.map = traces[i].mapName;
    r.respondent = id;
    r.scores = it->second;
    r.labels = questionnaire_labels(it->second, means);
    r.provenance = {{"kind", "questionnaire"},
                    {"means", {{"R", means.runner}, {"TC", means.treasureCollector}, {"MK", means.monsterKiller}}}};
    out.push_back(std::move(r));
  }
  return out;
}

inline QuestionnaireScores read_means(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  return {j.at("R").get<double>(), j.at("TC").get<double>(), j.at("MK").get<double>()};
}

inline std::vector<QuestionnaireResponse> read_questionnaires(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_questionnaires(in);
}

inline void write_feature_csv(std::ostream& out, const std::vector<FeatureVector>& features,
                              const std::vector<LabelSet>* labels = nullptr) {
  out << feature_csv_header();
  if (labels) out << ",R,TC,MK";
  out << '\n';
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t k = 0; k < kMechanicCount; ++k) {
      if (k) out << ',';
      out << features[i].counts[k];
    }
    if (labels) {
      const auto& l = (*labels)[i];
      out << ',' << l.runner << ',' << l.treasureCollector << ',' << l.monsterKiller;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Combination statistics (count, steps, treasures, kills).

struct StatsRow {
  std::string name;
  std::size_t count = 0;
  MeanStd steps;
  MeanStd treasures;
  MeanStd kills;
};

inline std::array<StatsRow, 8> stats_report(const std::vector<Playtrace>& traces, const std::vector<LabelSet>& labels) {
  if (traces.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "trace/label count mismatch");
  std::array<std::vector<double>, 8> steps, treasures, kills;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::size_t row = combination_row(labels[i]);
    steps[row].push_back(static_cast<double>(traces[i].turns.size()));
    treasures[row].push_back(count_events(traces[i], Mechanic::CollectTreasure));
    kills[row].push_back(count_events(traces[i], Mechanic::EnemyKill));
  }
  std::array<StatsRow, 8> out;
  for (std::size_t r = 0; r < 8; ++r) {
    out[r].name = std::string(kCombinationNames[r]);
    out[r].count = steps[r].size();
    out[r].steps = mean_std(steps[r]);
    out[r].treasures = mean_std(treasures[r]);
    out[r].kills = mean_std(kills[r]);
  }
  return out;
}

inline std::string format_stats(const std::array<StatsRow, 8>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(10) << "Label" << std::right << std::setw(7) << "Count" << std::setw(18)
      << "Steps Taken" << std::setw(20) << "Treasure Collected" << std::setw(18) << "Enemies Killed" << '\n';
  auto cell = [](const MeanStd& m) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << m.mean << " ± " << m.std;
    return c.str();
  };
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.name << std::right << std::setw(7) << r.count << std::setw(19)
        << cell(r.steps) << std::setw(21) << cell(r.treasures) << std::setw(19) << cell(r.kills) << '\n';
  }
  return out.str();
}

inline nlohmann::json stats_json(const std::array<StatsRow, 8>& rows) {
  nlohmann::json out = nlohmann::json::array();
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
  for (const auto& r : rows)
    out.push_back({{"label", r.name}, {"count", r.count}, {"steps", ms(r.steps)}, {"treasures", ms(r.treasures)},
                   {"kills", ms(r.kills)}});
  return out;
}

// ---------------------------------------------------------------------------
// AAR labeling cost versus frequency-model inference cost.

struct BenchReport {
  double aarSecondsPerTrace = 0.0;
  double svmInferenceSecondsPerTrace = 0.0;
  double speedupRatio = 0.0;
  std::size_t traceCount = 0;
  std::string budget;
};

inline double speedup_ratio(double aarSeconds, double inferenceSeconds) {
  if (!(aarSeconds > 0.0) || !(inferenceSeconds > 0.0))
    throw Error(ErrorCode::InvalidArgument, "timings must be positive");
  return aarSeconds / inferenceSeconds;
}

/// Times both labelling paths over the same traces, serially and without a plan cache.
inline BenchReport bench_aar_vs_inference(const std::vector<Playtrace>& traces, const PlanBudget& budget,
                                          const SvmModel& model,
                                          const std::array<PersonaSpec, 3>& personas = default_personas()) {
  if (traces.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to benchmark");
  using Clock = std::chrono::steady_clock;
  BenchReport r;
  r.traceCount = traces.size();
  r.budget = budget.describe();

  const auto t0 = Clock::now();
  for (const auto& t : traces) (void)aar_labels(t, personas, budget, nullptr);
  const double aar = std::chrono::duration<double>(Clock::now() - t0).count();
  r.aarSecondsPerTrace = aar / static_cast<double>(traces.size());

  // inference is fast; loop over the corpus until the clock has something to measure
  std::size_t processed = 0;
  unsigned sink = 0;
  const auto t1 = Clock::now();
  double elapsed = 0.0;
  do {
    for (const auto& t : traces) sink += model.predict_raw(mechanic_frequencies(t)).labels.mask();
    processed += traces.size();
    elapsed = std::chrono::duration<double>(Clock::now() - t1).count();
  } while (elapsed < 0.02);
  if (sink == 0xffffffffu) std::cerr << "";
  r.svmInferenceSecondsPerTrace = elapsed / static_cast<double>(processed);
  r.speedupRatio = speedup_ratio(r.aarSecondsPerTrace, r.svmInferenceSecondsPerTrace);
  return r;
}

inline nlohmann::json bench_json(const BenchReport& r) {
  return {{"aar_seconds_per_trace", r.aarSecondsPerTrace},
          {"svm_inference_seconds_per_trace", r.svmInferenceSecondsPerTrace},
          {"speedup_ratio", r.speedupRatio},
          {"trace_count", r.traceCount},
          {"budget", r.budget}};
}

// ---------------------------------------------------------------------------
// Classifier helpers shared by the CLI and the experiment runner.

inline std::vector<FeatureVector> raw_features(const std::vector<Playtrace>& traces) {
  std::vector<FeatureVector> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(mechanic_frequencies(t));
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& xs, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(xs[i]);
  return out;
}

inline std::vector<LabelSet> svm_predict_all(const SvmModel& model, const std::vector<FeatureVector>& raw) {
  std::vector<LabelSet> out;
  out.reserve(raw.size());
  for (const auto& v : raw) out.push_back(model.predict_raw(v).labels);
  return out;
}

/// Fits the normalizer on `trainRaw` only, then trains.
inline SvmModel fit_svm(const std::vector<FeatureVector>& trainRaw, const std::vector<LabelSet>& labels,
                        const SvmConfig& cfg = {}) {
  const auto normalizer = Normalizer::fit(trainRaw);
  return train_svm(normalizer.apply(trainRaw), labels, normalizer, cfg);
}

inline std::vector<LabelSet> lstm_predict_all(const LstmModel& model, const std::vector<CroppedSequence>& seqs) {
  std::vector<LabelSet> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(s.empty() ? LabelSet{} : lstm_labels(lstm_forward(model, s)));
  return out;
}

inline std::vector<CroppedSequence> crop_all(const std::vector<Playtrace>& traces) {
  std::vector<CroppedSequence> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(crop_sequence(t));
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end experiment.

struct ExperimentConfig {
  enum class Labeler { Known, Aar, SelfPerceived };
  enum class Model { Svm, Lstm };

  std::vector<std::string> maps;
  int runsPerPersona = 100;
  PlanBudget budget = PlanBudget::nodes(5000);
  Labeler labeler = Labeler::Known;
  PlanBudget labelBudget = PlanBudget::nodes(5000);
  std::string questionnaireFile;
  std::string meansFile;
  Model model = Model::Svm;
  std::uint64_t seed = 1;
  std::string outputDir = "out";
  int maxTurns = 500;
  double splitRatio = 0.7;
  std::string tracesFile;      // use these traces instead of generating
  std::string testTracesFile;  // optional held-out test traces
  std::vector<std::string> testMaps;
  int testRunsPerPersona = 1;
  std::array<PersonaSpec, 3> personas = default_personas();
  SvmConfig svm;
  LstmConfig lstm;
  int lstmReplicas = 3;
  unsigned threads = 0;

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.maps = j.value("maps", std::vector<std::string>{});
    c.runsPerPersona = j.value("runs_per_persona", 100);
    if (j.contains("budget")) c.budget = budget_from_json(j.at("budget"));
    if (j.contains("labeler")) {
      const auto& l = j.at("labeler");
      const auto kind = l.value("kind", "known");
      if (kind == "known") c.labeler = Labeler::Known;
      else if (kind == "aar") c.labeler = Labeler::Aar;
      else if (kind == "questionnaire") c.labeler = Labeler::SelfPerceived;
      else throw Error(ErrorCode::InvalidArgument, "unknown labeler '" + kind + "'");
      c.labelBudget = l.contains("budget") ? budget_from_json(l.at("budget")) : c.budget;
      c.questionnaireFile = l.value("questionnaire", "");
      c.meansFile = l.value("means", "");
    }
    const auto model = j.value("model", "svm");
    if (model == "svm") c.model = Model::Svm;
    else if (model == "lstm") c.model = Model::Lstm;
    else throw Error(ErrorCode::InvalidArgument, "unknown model '" + model + "'");
    c.seed = j.value("seed", std::uint64_t{1});
    c.outputDir = j.value("output_dir", "out");
    c.maxTurns = j.value("max_turns", 500);
    c.splitRatio = j.value("split_ratio", 0.7);
    c.tracesFile = j.value("traces", "");
    c.testTracesFile = j.value("test_traces", "");
    c.testMaps = j.value("test_maps", std::vector<std::string>{});
    c.testRunsPerPersona = j.value("test_runs_per_persona", 1);
    if (j.contains("persona")) {
      for (auto& p : c.personas) {
        p.c = j.at("persona").value("c", p.c);
        p.k = j.at("persona").value("k", p.k);
      }
    }
    if (j.contains("svm")) {
      const auto& s = j.at("svm");
      c.svm.kernel = s.value("kernel", "linear") == "rbf" ? KernelKind::Rbf : KernelKind::Linear;
      c.svm.C = s.value("C", c.svm.C);
      c.svm.gamma = s.value("gamma", c.svm.gamma);
      c.svm.maxPasses = s.value("max_passes", c.svm.maxPasses);
    }
    if (j.contains("lstm")) {
      const auto& s = j.at("lstm");
      c.lstm.hiddenSize = s.value("hidden", c.lstm.hiddenSize);
      c.lstm.epochs = s.value("epochs", c.lstm.epochs);
      c.lstm.learningRate = s.value("learning_rate", c.lstm.learningRate);
      c.lstmReplicas = s.value("replicas", c.lstmReplicas);
    }
    c.threads = j.value("threads", 0u);
    return c;
  }

  void validate() const {
    if (runsPerPersona < 1) throw Error(ErrorCode::InvalidArgument, "runs_per_persona must be at least 1");
    if (tracesFile.empty() && maps.empty()) throw Error(ErrorCode::InvalidArgument, "no maps and no trace file given");
    auto exists = [](const std::string& p) {
      if (!p.empty() && !std::filesystem::exists(p)) throw Error(ErrorCode::Io, "missing file " + p);
    };
    for (const auto& m : maps) exists(m);
    for (const auto& m : testMaps) exists(m);
    exists(tracesFile);
    exists(testTracesFile);
    exists(questionnaireFile);
    exists(meansFile);
    if (labeler == Labeler::SelfPerceived && questionnaireFile.empty())
      throw Error(ErrorCode::InvalidArgument, "questionnaire labeler needs a questionnaire file");
    budget.validate();
    labelBudget.validate();
  }
};

/// One row of the results table: accuracy per split, mean and spread over replicas.
struct ExperimentRow {
  std::string model;
  std::string labels;
  MeanStd train;
  MeanStd validation;
  std::optional<MeanStd> test;
  std::vector<EvalReport> reports;  // every replica and split
};

struct ExperimentResult {
  ExperimentRow row;
  std::vector<std::string> artifacts;
};

inline nlohmann::json experiment_row_json(const ExperimentRow& r) {
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& rep : r.reports) reports.push_back(report_json(rep));
  nlohmann::json j = {{"model", r.model},
                      {"labels", r.labels},
                      {"training", ms(r.train)},
                      {"validation", ms(r.validation)},
                      {"reports", reports}};
  j["testing"] = r.test ? ms(*r.test) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

inline std::vector<LevelPtr> load_maps(const std::vector<std::string>& paths) {
  std::vector<LevelPtr> out;
  for (const auto& p : paths) out.push_back(load_map_file(p));
  return out;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace detail

inline std::vector<LabelSet> label_traces(const ExperimentConfig& cfg, const std::vector<Playtrace>& traces,
                                          PlanCache* cache, std::vector<LabelRecord>* records = nullptr) {
  std::vector<LabelRecord> recs;
  switch (cfg.labeler) {
    case ExperimentConfig::Labeler::Known: recs = known_label_records(traces); break;
    case ExperimentConfig::Labeler::Aar: {
      const auto results = aar_label_corpus(traces, cfg.personas, cfg.labelBudget, cache, cfg.threads);
      recs = aar_label_records(traces, results, cfg.personas, cfg.labelBudget);
      break;
    }
    case ExperimentConfig::Labeler::SelfPerceived: {
      const auto responses = read_questionnaires(cfg.questionnaireFile);
      QuestionnaireScores means;
      if (!cfg.meansFile.empty()) {
        means = read_means(cfg.meansFile);
      } else {
        std::vector<QuestionnaireScores> all;
        for (const auto& r : responses) all.push_back(questionnaire_scores(r));
        means = questionnaire_means(all);
      }
      recs = questionnaire_label_records(traces, responses, means);
      break;
    }
  }
  auto labels = labels_for(recs, traces.size());
  if (records) *records = std::move(recs);
  return labels;
}

/// Generate or load traces, label them, split 70/30, train, evaluate and
/// write models, labels, reports and a manifest under cfg.outputDir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  detail::stage("config", [&] { cfg.validate(); return 0; });
  namespace fs = std::filesystem;
  fs::create_directories(cfg.outputDir);
  const fs::path outDir(cfg.outputDir);
  PlanCache cache;
  ExperimentResult result;
  auto note = [&](const std::string& msg) {
    if (log) *log << msg << '\n';
  };

  auto traces = detail::stage("traces", [&] {
    if (!cfg.tracesFile.empty()) return read_traces(cfg.tracesFile);
    GenerateOptions opt;
    opt.runsPerPersona = cfg.runsPerPersona;
    opt.budget = cfg.budget;
    opt.personas = cfg.personas;
    opt.maxTurns = cfg.maxTurns;
    opt.threads = cfg.threads;
    opt.cache = &cache;
    opt.warnings = log;
    return generate_synthetic(detail::load_maps(cfg.maps), opt);
  });
  note("traces: " + std::to_string(traces.size()));
  write_traces((outDir / "traces.jsonl").string(), traces);
  result.artifacts.push_back("traces.jsonl");

  std::vector<LabelRecord> labelRecords;
  const auto labels = detail::stage("label", [&] { return label_traces(cfg, traces, &cache, &labelRecords); });
  write_labels((outDir / "labels.jsonl").string(), labelRecords);
  result.artifacts.push_back("labels.jsonl");

  std::vector<Playtrace> testTraces;
  std::vector<LabelSet> testLabels;
  detail::stage("test-data", [&] {
    if (!cfg.testTracesFile.empty()) {
      testTraces = read_traces(cfg.testTracesFile);
    } else if (!cfg.testMaps.empty()) {
      GenerateOptions opt;
      opt.runsPerPersona = cfg.testRunsPerPersona;
      opt.budget = cfg.budget;
      opt.personas = cfg.personas;
      opt.maxTurns = cfg.maxTurns;
      opt.threads = cfg.threads;
      opt.cache = &cache;
      testTraces = generate_synthetic(detail::load_maps(cfg.testMaps), opt);
    }
    if (!testTraces.empty()) testLabels = label_traces(cfg, testTraces, &cache);
    return 0;
  });

  const auto split = detail::stage("split", [&] { return split_dataset(labels, cfg.splitRatio, cfg.seed); });
  const auto trainLabels = gather(labels, split.train);
  const auto valLabels = gather(labels, split.validation);

  ExperimentRow& row = result.row;
  switch (cfg.labeler) {
    case ExperimentConfig::Labeler::Known: row.labels = "known"; break;
    case ExperimentConfig::Labeler::Aar: row.labels = "aar"; break;
    case ExperimentConfig::Labeler::SelfPerceived: row.labels = "self_perceived"; break;
  }

  std::vector<double> trainAcc, valAcc, testAcc;
  if (cfg.model == ExperimentConfig::Model::Svm) {
    row.model = "svm";
    const auto raw = raw_features(traces);
    const auto trainRaw = gather(raw, split.train);
    const auto valRaw = gather(raw, split.validation);
    auto model = detail::stage("train", [&] { return fit_svm(trainRaw, trainLabels, cfg.svm); });
    model.id = "svm-seed" + std::to_string(cfg.seed);
    detail::stage("evaluate", [&] {
      row.reports.push_back(evaluate(svm_predict_all(model, trainRaw), trainLabels, "train"));
      row.reports.push_back(evaluate(svm_predict_all(model, valRaw), valLabels, "validation"));
      trainAcc.push_back(row.reports[0].exactMatchAccuracy);
      valAcc.push_back(row.reports[1].exactMatchAccuracy);
      if (!testTraces.empty()) {
        row.reports.push_back(evaluate(svm_predict_all(model, raw_features(testTraces)), testLabels, "test"));
        testAcc.push_back(row.reports.back().exactMatchAccuracy);
      }
      return 0;
    });
    std::ofstream(outDir / "model_svm.json") << svm_to_json(model).dump(2) << '\n';
    result.artifacts.push_back("model_svm.json");
  } else {
    row.model = "lstm";
    const auto seqs = detail::stage("features", [&] { return crop_all(traces); });
    const auto trainSeqs = gather(seqs, split.train);
    const auto valSeqs = gather(seqs, split.validation);
    const auto testSeqs = crop_all(testTraces);
    for (int rep = 0; rep < cfg.lstmReplicas; ++rep) {
      LstmConfig lc = cfg.lstm;
      lc.seed = cfg.seed + static_cast<std::uint64_t>(rep);
      note("training lstm replica " + std::to_string(rep) + " (seed " + std::to_string(lc.seed) + ")");
      auto model = detail::stage("train", [&] { return train_lstm(trainSeqs, trainLabels, lc); });
      model.id = "lstm-seed" + std::to_string(lc.seed);
      detail::stage("evaluate", [&] {
        auto tr = evaluate(lstm_predict_all(model, trainSeqs), trainLabels, "train");
        auto va = evaluate(lstm_predict_all(model, valSeqs), valLabels, "validation");
        trainAcc.push_back(tr.exactMatchAccuracy);
        valAcc.push_back(va.exactMatchAccuracy);
        row.reports.push_back(std::move(tr));
        row.reports.push_back(std::move(va));
        if (!testTraces.empty()) {
          auto te = evaluate(lstm_predict_all(model, testSeqs), testLabels, "test");
          testAcc.push_back(te.exactMatchAccuracy);
          row.reports.push_back(std::move(te));
        }
        return 0;
      });
      const auto name = "model_lstm_" + std::to_string(rep) + ".json";
      std::ofstream(outDir / name) << lstm_to_json(model).dump() << '\n';
      result.artifacts.push_back(name);
    }
  }
  row.train = mean_std(trainAcc);
  row.validation = mean_std(valAcc);
  if (!testAcc.empty()) row.test = mean_std(testAcc);

  std::ofstream(outDir / "report.json") << experiment_row_json(row).dump(2) << '\n';
  result.artifacts.push_back("report.json");
  nlohmann::json manifest = {{"seed", cfg.seed},
                             {"model", row.model},
                             {"labels", row.labels},
                             {"trace_count", traces.size()},
                             {"train_count", split.train.size()},
                             {"validation_count", split.validation.size()},
                             {"test_count", testTraces.size()},
                             {"budget", budget_json(cfg.budget)},
                             {"artifacts", result.artifacts}};
  std::ofstream(outDir / "manifest.json") << manifest.dump(2) << '\n';
  return result;
}

}  // namespace md2
