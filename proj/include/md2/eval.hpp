#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "md2/labels.hpp"

namespace md2 {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded split stratified by label combination. The training side gets
/// round(ratio * n) items overall; each combination contributes its share,
/// with leftover slots going to the largest fractional remainders.
inline Split split_dataset(const std::vector<LabelSet>& labels, double ratio, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n < 2) throw Error(ErrorCode::EmptyDataset, "need at least two items to split");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "split ratio must be in (0, 1)");

  std::array<std::vector<std::size_t>, 8> groups;
  for (std::size_t i = 0; i < n; ++i) groups[labels[i].mask()].push_back(i);

  std::size_t target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  target = std::clamp<std::size_t>(target, 1, n - 1);

  std::array<std::size_t, 8> take{};
  std::array<double, 8> remainder{};
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < 8; ++g) {
    const double exact = ratio * static_cast<double>(groups[g].size());
    take[g] = static_cast<std::size_t>(std::floor(exact));
    remainder[g] = exact - std::floor(exact);
    assigned += take[g];
  }
  while (assigned < target) {
    std::size_t pick = 8;
    for (std::size_t g = 0; g < 8; ++g) {
      if (take[g] >= groups[g].size()) continue;
      if (pick == 8 || remainder[g] > remainder[pick]) pick = g;
    }
    if (pick == 8) break;
    ++take[pick];
    remainder[pick] = -1.0;
    ++assigned;
  }
  while (assigned > target) {
    std::size_t pick = 8;
    for (std::size_t g = 0; g < 8; ++g)
      if (take[g] > 0 && (pick == 8 || remainder[g] < remainder[pick])) pick = g;
    --take[pick];
    remainder[pick] = 2.0;
    --assigned;
  }

  SplitMix64 rng(seed);
  Split out;
  for (std::size_t g = 0; g < 8; ++g) {
    auto members = groups[g];
    shuffle_in_place(members, rng);
    for (std::size_t k = 0; k < members.size(); ++k) (k < take[g] ? out.train : out.validation).push_back(members[k]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

struct Confusion {
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;
};

struct EvalReport {
  std::string split;
  std::size_t count = 0;
  double exactMatchAccuracy = 0.0;
  std::array<double, 3> perLabelAccuracy{};
  std::array<Confusion, 3> confusion{};
};

inline EvalReport evaluate(const std::vector<LabelSet>& predicted, const std::vector<LabelSet>& truth,
                           std::string split = "test") {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::InvalidArgument, "prediction/truth count mismatch");
  EvalReport r;
  r.split = std::move(split);
  r.count = truth.size();
  if (truth.empty()) return r;
  int exact = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) ++exact;
    for (std::size_t p = 0; p < 3; ++p) {
      const bool yhat = predicted[i][p];
      const bool y = truth[i][p];
      auto& c = r.confusion[p];
      if (yhat && y) ++c.tp;
      else if (yhat && !y) ++c.fp;
      else if (!yhat && !y) ++c.tn;
      else ++c.fn;
    }
  }
  const double n = static_cast<double>(truth.size());
  r.exactMatchAccuracy = exact / n;
  for (std::size_t p = 0; p < 3; ++p) r.perLabelAccuracy[p] = (r.confusion[p].tp + r.confusion[p].tn) / n;
  return r;
}

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json confusion = nlohmann::json::object();
  nlohmann::json perLabel = nlohmann::json::object();
  for (std::size_t p = 0; p < 3; ++p) {
    const auto name = std::string(short_name(kPersonas[p]));
    perLabel[name] = r.perLabelAccuracy[p];
    const auto& c = r.confusion[p];
    confusion[name] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
  }
  return {{"split", r.split},
          {"count", r.count},
          {"exact_match_accuracy", r.exactMatchAccuracy},
          {"per_label_accuracy", perLabel},
          {"confusion", confusion}};
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population standard deviation.
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(var / static_cast<double>(xs.size()));
  return m;
}

}  // namespace md2
