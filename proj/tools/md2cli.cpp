#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "md2/http_api.hpp"
#include "md2/md2.hpp"

using namespace md2;
namespace fs = std::filesystem;

namespace {

struct BudgetOpts {
  int nodes = 5000;
  double seconds = 0.0;  // > 0 switches to a wall-clock budget

  void add(CLI::App* app) {
    app->add_option("--nodes", nodes, "planner expansions per move")->check(CLI::PositiveNumber);
    app->add_option("--seconds", seconds, "planner wall clock per move (overrides --nodes)")
        ->check(CLI::NonNegativeNumber);
  }
  PlanBudget get() const { return seconds > 0.0 ? PlanBudget::wall_clock(seconds) : PlanBudget::nodes(nodes); }
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

std::vector<LabelSet> load_labels(const std::string& path, std::size_t traceCount) {
  return labels_for(read_labels(path), traceCount);
}

// Splits exactly as `train` did so `eval --split validation` sees the held-back part.
std::vector<std::size_t> select(const std::vector<LabelSet>& labels, const std::string& which, double ratio,
                                std::uint64_t seed) {
  if (which == "all") {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const auto split = split_dataset(labels, ratio, seed);
  return which == "train" ? split.train : split.validation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"md2cli: dungeon persona playtesting toolkit"};
  app.require_subcommand(1);

  // gen
  std::vector<std::string> genMaps;
  std::string genOut = "traces.jsonl";
  int genRuns = 100;
  int genMaxTurns = 500;
  unsigned threads = 0;
  BudgetOpts genBudget;
  auto* gen = app.add_subcommand("gen", "play every persona on every map and write the traces");
  gen->add_option("maps", genMaps, "map files")->required()->check(CLI::ExistingFile);
  gen->add_option("-o,--out", genOut, "trace file");
  gen->add_option("--runs", genRuns, "runs per persona and map")->check(CLI::PositiveNumber);
  gen->add_option("--max-turns", genMaxTurns, "turn cap per episode")->check(CLI::PositiveNumber);
  gen->add_option("--threads", threads, "worker threads (0 = hardware)");
  genBudget.add(gen);

  // label
  std::string labelKind, labelTraces, labelOut = "labels.jsonl", answersFile, meansFile;
  BudgetOpts labelBudget;
  auto* label = app.add_subcommand("label", "label traces: known, aar or questionnaire");
  label->add_option("kind", labelKind, "labeler")->required()->check(CLI::IsMember({"known", "aar", "questionnaire"}));
  label->add_option("traces", labelTraces, "trace file")->required()->check(CLI::ExistingFile);
  label->add_option("-o,--out", labelOut, "label file");
  label->add_option("--answers", answersFile, "questionnaire answers, one respondent per line")
      ->check(CLI::ExistingFile);
  label->add_option("--means", meansFile, "corpus means as {\"R\":..,\"TC\":..,\"MK\":..}")->check(CLI::ExistingFile);
  label->add_option("--threads", threads, "worker threads (0 = hardware)");
  labelBudget.add(label);

  // features
  std::string featTraces, featLabels, featOut = "-", featKind = "freq";
  auto* features = app.add_subcommand("features", "mechanic frequencies as CSV, or cropped sequences as JSON lines");
  features->add_option("traces", featTraces, "trace file")->required()->check(CLI::ExistingFile);
  features->add_option("--labels", featLabels, "append label columns")->check(CLI::ExistingFile);
  features->add_option("--kind", featKind, "freq or crop")->check(CLI::IsMember({"freq", "crop"}));
  features->add_option("-o,--out", featOut, "output file (- for stdout)");

  // train
  std::string trainTraces, trainLabels, trainOut = "model.json", trainModel = "svm", kernel = "linear";
  std::uint64_t seed = 1;
  double ratio = 0.7;
  SvmConfig svmCfg;
  LstmConfig lstmCfg;
  auto* train = app.add_subcommand("train", "fit a classifier on the training split");
  train->add_option("traces", trainTraces, "trace file")->required()->check(CLI::ExistingFile);
  train->add_option("labels", trainLabels, "label file")->required()->check(CLI::ExistingFile);
  train->add_option("--model", trainModel, "svm or lstm")->check(CLI::IsMember({"svm", "lstm"}));
  train->add_option("-o,--out", trainOut, "model file");
  train->add_option("--seed", seed, "split and initialisation seed");
  train->add_option("--split", ratio, "training fraction")->check(CLI::Range(0.0, 1.0));
  train->add_option("--kernel", kernel, "svm kernel")->check(CLI::IsMember({"linear", "rbf"}));
  train->add_option("--C", svmCfg.C, "svm box constraint")->check(CLI::PositiveNumber);
  train->add_option("--gamma", svmCfg.gamma, "rbf width")->check(CLI::PositiveNumber);
  train->add_option("--hidden", lstmCfg.hiddenSize, "lstm hidden units")->check(CLI::PositiveNumber);
  train->add_option("--epochs", lstmCfg.epochs, "lstm epochs")->check(CLI::PositiveNumber);
  train->add_option("--lr", lstmCfg.learningRate, "lstm learning rate")->check(CLI::PositiveNumber);

  // eval
  std::string evalModel, evalTraces, evalLabels, evalSplit = "all";
  auto* eval = app.add_subcommand("eval", "score a saved model against labelled traces");
  eval->add_option("model", evalModel, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("traces", evalTraces, "trace file")->required()->check(CLI::ExistingFile);
  eval->add_option("labels", evalLabels, "label file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", evalSplit, "all, train or validation (same seed and ratio as train)")
      ->check(CLI::IsMember({"all", "train", "validation"}));
  eval->add_option("--seed", seed, "split seed");
  eval->add_option("--ratio", ratio, "training fraction")->check(CLI::Range(0.0, 1.0));

  // bench
  std::string benchTraces, benchModel;
  std::size_t benchLimit = 0;
  BudgetOpts benchBudget;
  benchBudget.seconds = 0.05;
  auto* bench = app.add_subcommand("bench", "time AAR labelling against frequency-model inference");
  bench->add_option("traces", benchTraces, "trace file")->required()->check(CLI::ExistingFile);
  bench->add_option("model", benchModel, "svm model file")->required()->check(CLI::ExistingFile);
  bench->add_option("--limit", benchLimit, "use only the first N traces");
  benchBudget.add(bench);

  // stats
  std::string statsTraces, statsLabels;
  bool statsJson = false;
  auto* stats = app.add_subcommand("stats", "steps, treasure and kills per label combination");
  stats->add_option("traces", statsTraces, "trace file")->required()->check(CLI::ExistingFile);
  stats->add_option("labels", statsLabels, "label file")->required()->check(CLI::ExistingFile);
  stats->add_flag("--json", statsJson, "print JSON instead of a table");

  // serve
  std::vector<std::string> serveMaps;
  std::string serveData = "sessions", serveModel, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP session service for human play");
  serve->add_option("maps", serveMaps, "map files")->required()->check(CLI::ExistingFile);
  serve->add_option("--data", serveData, "directory for traces and questionnaires");
  serve->add_option("--model", serveModel, "svm model for live predictions")->check(CLI::ExistingFile);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(1, 65535));

  // run
  std::string runConfig, runOutput, runModel;
  std::optional<std::uint64_t> runSeed;
  std::optional<int> runRuns;
  auto* run = app.add_subcommand("run", "full experiment from a JSON config");
  run->add_option("config", runConfig, "experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", runSeed, "override seed");
  run->add_option("--output", runOutput, "override output directory");
  run->add_option("--runs", runRuns, "override runs per persona");
  run->add_option("--model", runModel, "override model")->check(CLI::IsMember({"svm", "lstm"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::vector<LevelPtr> maps;
      for (const auto& m : genMaps) maps.push_back(load_map_file(m));
      GenerateOptions opt;
      opt.runsPerPersona = genRuns;
      opt.budget = genBudget.get();
      opt.maxTurns = genMaxTurns;
      opt.threads = threads;
      opt.warnings = &std::cerr;
      const auto traces = generate_synthetic(maps, opt);
      write_traces(genOut, traces);
      std::cerr << traces.size() << " traces -> " << genOut << '\n';
    } else if (label->parsed()) {
      const auto traces = read_traces(labelTraces);
      std::vector<LabelRecord> recs;
      if (labelKind == "known") {
        recs = known_label_records(traces);
      } else if (labelKind == "aar") {
        const auto budget = labelBudget.get();
        PlanCache cache;
        recs = aar_label_records(traces, aar_label_corpus(traces, default_personas(), budget, &cache, threads),
                                 default_personas(), budget);
      } else {
        if (answersFile.empty()) throw Error(ErrorCode::InvalidArgument, "questionnaire labels need --answers");
        const auto responses = read_questionnaires(answersFile);
        QuestionnaireScores means;
        if (!meansFile.empty()) {
          means = read_means(meansFile);
        } else {
          std::vector<QuestionnaireScores> all;
          for (const auto& r : responses) all.push_back(questionnaire_scores(r));
          means = questionnaire_means(all);
        }
        recs = questionnaire_label_records(traces, responses, means);
      }
      write_labels(labelOut, recs);
      std::cerr << recs.size() << " label records -> " << labelOut << '\n';
    } else if (features->parsed()) {
      const auto traces = read_traces(featTraces);
      std::ostringstream out;
      if (featKind == "freq") {
        std::vector<LabelSet> labels;
        if (!featLabels.empty()) labels = load_labels(featLabels, traces.size());
        write_feature_csv(out, raw_features(traces), featLabels.empty() ? nullptr : &labels);
      } else {
        for (const auto& t : traces) {
          nlohmann::json steps = nlohmann::json::array();
          for (const auto& s : crop_sequence(t).steps) steps.push_back(crop_input(s));
          out << nlohmann::json{{"map", t.mapName}, {"steps", steps}}.dump() << '\n';
        }
      }
      write_text(featOut, out.str());
    } else if (train->parsed()) {
      const auto traces = read_traces(trainTraces);
      const auto labels = load_labels(trainLabels, traces.size());
      const auto split = split_dataset(labels, ratio, seed);
      const auto trLabels = gather(labels, split.train);
      const auto vaLabels = gather(labels, split.validation);
      nlohmann::json reports = nlohmann::json::array();
      if (trainModel == "svm") {
        svmCfg.kernel = kernel == "rbf" ? KernelKind::Rbf : KernelKind::Linear;
        const auto raw = raw_features(traces);
        auto model = fit_svm(gather(raw, split.train), trLabels, svmCfg);
        model.id = "svm-seed" + std::to_string(seed);
        reports.push_back(report_json(evaluate(svm_predict_all(model, gather(raw, split.train)), trLabels, "train")));
        reports.push_back(
            report_json(evaluate(svm_predict_all(model, gather(raw, split.validation)), vaLabels, "validation")));
        write_text(trainOut, svm_to_json(model).dump(2) + "\n");
      } else {
        lstmCfg.seed = seed;
        const auto seqs = crop_all(traces);
        auto model = train_lstm(gather(seqs, split.train), trLabels, lstmCfg);
        model.id = "lstm-seed" + std::to_string(seed);
        reports.push_back(report_json(evaluate(lstm_predict_all(model, gather(seqs, split.train)), trLabels, "train")));
        reports.push_back(
            report_json(evaluate(lstm_predict_all(model, gather(seqs, split.validation)), vaLabels, "validation")));
        write_text(trainOut, lstm_to_json(model).dump() + "\n");
      }
      std::cout << reports.dump(2) << '\n';
    } else if (eval->parsed()) {
      const auto j = read_json(evalModel);
      const auto traces = read_traces(evalTraces);
      const auto labels = load_labels(evalLabels, traces.size());
      const auto idx = select(labels, evalSplit, ratio, seed);
      const auto picked = gather(traces, idx);
      std::vector<LabelSet> pred;
      if (j.value("format", "") == "md2-lstm") pred = lstm_predict_all(lstm_from_json(j), crop_all(picked));
      else pred = svm_predict_all(svm_from_json(j), raw_features(picked));
      std::cout << report_json(evaluate(pred, gather(labels, idx), evalSplit)).dump(2) << '\n';
    } else if (bench->parsed()) {
      auto traces = read_traces(benchTraces);
      if (benchLimit > 0 && traces.size() > benchLimit) traces.resize(benchLimit);
      const auto r = bench_aar_vs_inference(traces, benchBudget.get(), svm_from_json(read_json(benchModel)));
      std::cout << bench_json(r).dump(2) << '\n';
    } else if (stats->parsed()) {
      const auto traces = read_traces(statsTraces);
      const auto rows = stats_report(traces, load_labels(statsLabels, traces.size()));
      if (statsJson) std::cout << stats_json(rows).dump(2) << '\n';
      else std::cout << format_stats(rows);
    } else if (serve->parsed()) {
      std::vector<LevelPtr> maps;
      for (const auto& m : serveMaps) maps.push_back(load_map_file(m));
      std::optional<SvmModel> model;
      if (!serveModel.empty()) model = svm_from_json(read_json(serveModel));
      SessionService service(maps, serveData, std::move(model));
      httplib::Server server;
      mount_api(server, service);
      static httplib::Server* running = &server;
      std::signal(SIGINT, [](int) { running->stop(); });
      std::signal(SIGTERM, [](int) { running->stop(); });
      std::cerr << "listening on http://" << host << ':' << port << " (data in " << serveData << ")\n";
      if (!server.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
    } else if (run->parsed()) {
      auto cfg = ExperimentConfig::from_json(read_json(runConfig));
      if (runSeed) cfg.seed = *runSeed;
      if (!runOutput.empty()) cfg.outputDir = runOutput;
      if (runRuns) cfg.runsPerPersona = *runRuns;
      if (!runModel.empty()) cfg.model = runModel == "svm" ? ExperimentConfig::Model::Svm : ExperimentConfig::Model::Lstm;
      // relative paths in the config are relative to the config file
      const auto base = fs::path(runConfig).parent_path();
      auto rebase = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative() && !fs::exists(p)) p = (base / p).string();
      };
      for (auto& m : cfg.maps) rebase(m);
      for (auto& m : cfg.testMaps) rebase(m);
      rebase(cfg.tracesFile);
      rebase(cfg.testTracesFile);
      rebase(cfg.questionnaireFile);
      rebase(cfg.meansFile);
      const auto result = run_experiment(cfg, &std::cerr);
      std::cout << experiment_row_json(result.row).dump(2) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
