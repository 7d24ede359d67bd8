#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "md2/features.hpp"
#include "md2/labels.hpp"

namespace md2 {

enum class KernelKind : std::uint8_t { Linear, Rbf };

struct SvmConfig {
  KernelKind kernel = KernelKind::Linear;
  double gamma = 1.0;   // RBF only
  double C = 1.0;
  double tolerance = 1e-6;  // largest allowed violation of the optimality conditions
  int maxPasses = 2000;
  std::uint64_t seed = 7;
};

using SvmPoint = std::array<double, kMechanicCount>;

/// Per-pass optimizer diagnostics.
struct SvmTrainLog {
  // Regularised hinge loss 0.5|w|^2 + C*sum(hinge) of the kept iterate, per pass.
  std::vector<double> hingeLoss;
  std::vector<double> rawHinge;  // sum(hinge) of the kept iterate
  std::vector<double> primal;    // objective of the pass's own iterate, kept or not
  std::vector<double> dual;
  std::vector<double> violation;  // max KKT violation of the kept iterate
  int passes = 0;
  bool converged = false;
};

/// One soft-margin binary classifier. The bias is learned as the weight of a
/// constant feature fixed at 1.
struct BinarySvm {
  KernelKind kernel = KernelKind::Linear;
  double gamma = 1.0;
  std::vector<double> weights = std::vector<double>(kMechanicCount, 0.0);
  double bias = 0.0;
  std::vector<SvmPoint> support;  // RBF only
  std::vector<double> coef;       // alpha_i * y_i per support point
  bool degenerate = false;        // trained on a single class; predicts sign(bias)
  std::vector<double> alpha;      // dual variables of the training points (not persisted)

  double kernel_value(const SvmPoint& a, const SvmPoint& b) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < kMechanicCount; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-gamma * d2) + 1.0;
  }

  double decision(const SvmPoint& x) const {
    if (degenerate || kernel == KernelKind::Linear) {
      double s = bias;
      if (!degenerate)
        for (std::size_t i = 0; i < kMechanicCount; ++i) s += weights[i] * x[i];
      return s;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) s += coef[j] * kernel_value(support[j], x);
    return s;
  }
};

/// Dual coordinate descent for the hinge-loss SVM with a regularised bias.
/// Labels are +1 / -1.
inline BinarySvm train_binary_svm(const std::vector<SvmPoint>& xs, const std::vector<int>& ys, const SvmConfig& cfg,
                                  SvmTrainLog* log = nullptr) {
  const std::size_t n = xs.size();
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "no training points");
  if (ys.size() != n) throw Error(ErrorCode::InvalidArgument, "label count differs from point count");
  BinarySvm model;
  model.kernel = cfg.kernel;
  model.gamma = cfg.gamma;

  int positives = 0;
  for (int y : ys) positives += y > 0 ? 1 : 0;
  if (positives == 0 || positives == static_cast<int>(n)) {
    model.degenerate = true;
    model.bias = positives > 0 ? 1.0 : -1.0;
    return model;
  }

  const double C = cfg.C;
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(cfg.seed);

  // f[i] = current decision value on point i (bias included)
  std::vector<double> f(n, 0.0);
  std::vector<double> qii(n);
  std::vector<double> gram;
  std::vector<double> w(kMechanicCount + 1, 0.0);
  const bool linear = cfg.kernel == KernelKind::Linear;
  if (linear) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 1.0;
      for (double v : xs[i]) s += v * v;
      qii[i] = s;
    }
  } else {
    gram.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) gram[i * n + j] = gram[j * n + i] = model.kernel_value(xs[i], xs[j]);
    for (std::size_t i = 0; i < n; ++i) qii[i] = gram[i * n + i];
  }

  auto decision_linear = [&](std::size_t i) {
    double s = w[kMechanicCount];
    for (std::size_t d = 0; d < kMechanicCount; ++d) s += w[d] * xs[i][d];
    return s;
  };

  // The dual objective rises every pass but the primal one can wobble. A pass
  // whose iterate does not lower the primal objective is not kept, so the
  // returned model's loss only goes down.
  struct Kept {
    std::vector<double> alpha, w, f;
    double primal = std::numeric_limits<double>::infinity();
    double hinge = 0.0;
    double violation = std::numeric_limits<double>::infinity();
  } kept;

  SvmTrainLog local;
  for (int pass = 0; pass < cfg.maxPasses; ++pass) {
    shuffle_in_place(order, rng);
    for (std::size_t i : order) {
      const double yi = ys[i];
      const double fi = linear ? decision_linear(i) : f[i];
      const double g = yi * fi - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] >= C) pg = std::max(g, 0.0);
      if (std::abs(pg) < 1e-14) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / qii[i], 0.0, C);
      const double delta = (alpha[i] - old) * yi;
      if (delta == 0.0) continue;
      if (linear) {
        for (std::size_t d = 0; d < kMechanicCount; ++d) w[d] += delta * xs[i][d];
        w[kMechanicCount] += delta;
      } else {
        for (std::size_t j = 0; j < n; ++j) f[j] += delta * gram[i * n + j];
      }
    }

    double norm2 = 0.0;
    double hinge = 0.0;
    double alphaSum = 0.0;
    double violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fi = linear ? decision_linear(i) : f[i];
      const double g = ys[i] * fi - 1.0;
      hinge += std::max(0.0, -g);
      alphaSum += alpha[i];
      if (!linear) norm2 += alpha[i] * ys[i] * fi;
      if (alpha[i] <= 0.0) violation = std::max(violation, -g);
      else if (alpha[i] >= C) violation = std::max(violation, g);
      else violation = std::max(violation, std::abs(g));
    }
    if (linear)
      for (double v : w) norm2 += v * v;
    const double primal = 0.5 * norm2 + C * hinge;
    const double dual = alphaSum - 0.5 * norm2;
    if (primal <= kept.primal) {
      kept.alpha = alpha;
      kept.w = w;
      kept.f = f;
      kept.primal = primal;
      kept.hinge = hinge;
      kept.violation = violation;
    }
    local.hingeLoss.push_back(kept.primal);
    local.rawHinge.push_back(kept.hinge);
    local.primal.push_back(primal);
    local.dual.push_back(dual);
    local.violation.push_back(kept.violation);
    local.passes = pass + 1;
    if (kept.violation <= cfg.tolerance) {
      local.converged = true;
      break;
    }
  }
  alpha = std::move(kept.alpha);
  w = std::move(kept.w);

  if (linear) {
    model.weights.assign(w.begin(), w.begin() + kMechanicCount);
    model.bias = w[kMechanicCount];
  } else {
    model.weights.assign(kMechanicCount, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] <= 0.0) continue;
      model.support.push_back(xs[i]);
      model.coef.push_back(alpha[i] * ys[i]);
    }
  }
  model.alpha = std::move(alpha);
  if (log) *log = std::move(local);
  return model;
}

/// Three one-vs-rest classifiers (R, TC, MK) over normalized frequencies.
struct SvmModel {
  SvmConfig config;
  std::array<BinarySvm, 3> classifiers;
  Normalizer normalizer;
  std::string id = "svm";

  struct Prediction {
    LabelSet labels;
    std::array<double, 3> margins{};
  };

  Prediction predict(const FeatureVector& v) const {
    if (!v.normalized) throw Error(ErrorCode::UnnormalizedInput, "normalize features with the model's normalizer first");
    Prediction p;
    for (std::size_t i = 0; i < 3; ++i) {
      p.margins[i] = classifiers[i].decision(v.counts);
      p.labels.set(kPersonas[i], p.margins[i] > 0.0);
    }
    return p;
  }

  /// Normalizes raw counts with the stored normalizer, then predicts.
  Prediction predict_raw(const FeatureVector& raw) const { return predict(normalizer.apply(raw)); }
};

inline SvmModel::Prediction svm_predict(const SvmModel& model, const FeatureVector& v) { return model.predict(v); }

/// `features` must already be normalized with `normalizer`.
inline SvmModel train_svm(const std::vector<FeatureVector>& features, const std::vector<LabelSet>& labels,
                          const Normalizer& normalizer, const SvmConfig& cfg = {},
                          std::array<SvmTrainLog, 3>* logs = nullptr) {
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "no training traces");
  if (features.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "feature/label count mismatch");
  std::vector<SvmPoint> xs;
  xs.reserve(features.size());
  for (const auto& v : features) {
    if (!v.normalized) throw Error(ErrorCode::UnnormalizedInput, "SVM training expects normalized features");
    xs.push_back(v.counts);
  }
  SvmModel model;
  model.config = cfg;
  model.normalizer = normalizer;
  for (std::size_t p = 0; p < 3; ++p) {
    std::vector<int> ys;
    ys.reserve(labels.size());
    for (const auto& l : labels) ys.push_back(l[p] ? 1 : -1);
    SvmConfig c = cfg;
    c.seed = cfg.seed + p;
    model.classifiers[p] = train_binary_svm(xs, ys, c, logs ? &(*logs)[p] : nullptr);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Model files.

inline nlohmann::json svm_to_json(const SvmModel& m) {
  using nlohmann::json;
  json classifiers = json::array();
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& c = m.classifiers[p];
    json support = json::array();
    for (const auto& s : c.support) support.push_back(s);
    classifiers.push_back({{"persona", to_string(kPersonas[p])},
                           {"weights", c.weights},
                           {"bias", c.bias},
                           {"degenerate", c.degenerate},
                           {"support", support},
                           {"coef", c.coef}});
  }
  return {{"format", "md2-svm"},
          {"version", 1},
          {"id", m.id},
          {"kernel", m.config.kernel == KernelKind::Linear ? "linear" : "rbf"},
          {"gamma", m.config.gamma},
          {"C", m.config.C},
          {"tolerance", m.config.tolerance},
          {"max_passes", m.config.maxPasses},
          {"seed", m.config.seed},
          {"normalizer", m.normalizer.maxima()},
          {"classifiers", classifiers}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "md2-svm") throw Error(ErrorCode::MalformedRecord, "not an SVM model file");
  if (j.at("version").get<int>() != 1) throw Error(ErrorCode::MalformedRecord, "unsupported SVM model version");
  SvmModel m;
  m.id = j.value("id", "svm");
  m.config.kernel = j.at("kernel").get<std::string>() == "rbf" ? KernelKind::Rbf : KernelKind::Linear;
  m.config.gamma = j.at("gamma").get<double>();
  m.config.C = j.at("C").get<double>();
  m.config.tolerance = j.at("tolerance").get<double>();
  m.config.maxPasses = j.at("max_passes").get<int>();
  m.config.seed = j.at("seed").get<std::uint64_t>();
  m.normalizer = Normalizer(j.at("normalizer").get<std::array<double, kMechanicCount>>());
  const auto& cs = j.at("classifiers");
  if (cs.size() != 3) throw Error(ErrorCode::MalformedRecord, "expected three classifiers");
  for (std::size_t p = 0; p < 3; ++p) {
    auto& c = m.classifiers[p];
    c.kernel = m.config.kernel;
    c.gamma = m.config.gamma;
    c.weights = cs[p].at("weights").get<std::vector<double>>();
    if (c.weights.size() != kMechanicCount) throw Error(ErrorCode::MalformedRecord, "weight vector has wrong length");
    c.bias = cs[p].at("bias").get<double>();
    c.degenerate = cs[p].at("degenerate").get<bool>();
    for (const auto& s : cs[p].at("support")) c.support.push_back(s.get<SvmPoint>());
    c.coef = cs[p].at("coef").get<std::vector<double>>();
  }
  return m;
}

}  // namespace md2
