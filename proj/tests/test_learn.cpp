#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace md2;
using namespace md2::testing;

namespace {

struct Toy {
  std::vector<SvmPoint> xs;
  std::vector<int> ys;
};

// 40 points split by the line x0 + x1 = 1 with a clear gap.
Toy separable_toy() {
  SplitMix64 rng(99);
  Toy t;
  while (t.xs.size() < 40) {
    SvmPoint p{};
    p[0] = rng.uniform();
    p[1] = rng.uniform();
    p[2] = 0.3 * rng.uniform();
    const double s = p[0] + p[1] - 1.0;
    if (std::abs(s) < 0.15) continue;
    t.xs.push_back(p);
    t.ys.push_back(s > 0 ? 1 : -1);
  }
  return t;
}

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

LstmParams random_params(int input, int hidden, std::uint64_t seed, double scale) {
  SplitMix64 rng(seed);
  LstmParams p = LstmParams::zeros(input, hidden);
  auto fill = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * scale;
  };
  fill(p.W);
  fill(p.U);
  fill(p.b);
  fill(p.V);
  fill(p.c);
  return p;
}

SequenceMatrix random_sequence(int input, int steps, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SequenceMatrix xs(input, steps);
  for (int t = 0; t < steps; ++t)
    for (int i = 0; i < input; ++i) xs(i, t) = 2.0 * rng.uniform() - 1.0;
  return xs;
}

// Visits every parameter as a mutable scalar, in a fixed order.
template <typename Fn>
void for_each_param(LstmParams& p, Fn fn) {
  for (Eigen::Index i = 0; i < p.W.size(); ++i) fn(p.W.data()[i]);
  for (Eigen::Index i = 0; i < p.U.size(); ++i) fn(p.U.data()[i]);
  for (Eigen::Index i = 0; i < p.b.size(); ++i) fn(p.b.data()[i]);
  for (Eigen::Index i = 0; i < p.V.size(); ++i) fn(p.V.data()[i]);
  for (Eigen::Index i = 0; i < p.c.size(); ++i) fn(p.c.data()[i]);
}

std::vector<double> flatten(LstmParams p) {
  std::vector<double> out;
  for_each_param(p, [&](double& v) { out.push_back(v); });
  return out;
}

}  // namespace

TEST(Split, StratifiedCounts) {
  std::vector<LabelSet> labels;
  for (int i = 0; i < 6; ++i) labels.push_back(LabelSet::of(PersonaKind::Runner));
  for (int i = 0; i < 4; ++i) labels.push_back(LabelSet::of(PersonaKind::TreasureCollector));
  const auto s = split_dataset(labels, 0.8, 1);
  ASSERT_EQ(s.train.size(), 8u);
  ASSERT_EQ(s.validation.size(), 2u);
  int r = 0;
  for (auto i : s.train) r += labels[i].runner ? 1 : 0;
  // 4.8 and 3.2 round down to 4 + 3; the larger remainder takes the spare slot
  EXPECT_EQ(r, 5);
  std::vector<bool> seen(labels.size(), false);
  for (auto i : s.train) seen[i] = true;
  for (auto i : s.validation) {
    EXPECT_FALSE(seen[i]);
    seen[i] = true;
  }
  for (bool b : seen) EXPECT_TRUE(b);
}

TEST(Split, SeedChangesMembersNotCounts) {
  std::vector<LabelSet> labels;
  for (unsigned i = 0; i < 50; ++i) labels.push_back(LabelSet::from_mask(i % 5));
  const auto a = split_dataset(labels, 0.7, 1);
  const auto b = split_dataset(labels, 0.7, 2);
  const auto c = split_dataset(labels, 0.7, 1);
  EXPECT_EQ(a.train.size(), 35u);
  EXPECT_EQ(b.train.size(), 35u);
  EXPECT_NE(a.train, b.train);
  EXPECT_EQ(a.train, c.train);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset({LabelSet{}}, 0.5, 1), Error);
  EXPECT_THROW(split_dataset({LabelSet{}, LabelSet{}}, 1.0, 1), Error);
}

TEST(Svm, SeparableToySetIsFitExactly) {
  const auto toy = separable_toy();
  SvmTrainLog log;
  const auto m = train_binary_svm(toy.xs, toy.ys, SvmConfig{}, &log);
  int correct = 0;
  for (std::size_t i = 0; i < toy.xs.size(); ++i) correct += (m.decision(toy.xs[i]) > 0) == (toy.ys[i] > 0) ? 1 : 0;
  EXPECT_EQ(correct, 40);
  EXPECT_TRUE(log.converged);
  ASSERT_FALSE(log.hingeLoss.empty());
  for (std::size_t p = 1; p < log.hingeLoss.size(); ++p) EXPECT_LE(log.hingeLoss[p], log.hingeLoss[p - 1]) << p;
}

TEST(Svm, SolutionSatisfiesOptimalityConditions) {
  const auto toy = separable_toy();
  SvmConfig cfg;
  cfg.C = 1.0;
  const auto m = train_binary_svm(toy.xs, toy.ys, cfg);
  ASSERT_EQ(m.alpha.size(), toy.xs.size());
  const double tol = 1e-4;
  for (std::size_t i = 0; i < toy.xs.size(); ++i) {
    const double margin = toy.ys[i] * m.decision(toy.xs[i]);
    const double a = m.alpha[i];
    ASSERT_GE(a, 0.0);
    ASSERT_LE(a, cfg.C);
    if (a <= 0.0) EXPECT_GE(margin, 1.0 - tol) << i;
    else if (a >= cfg.C) EXPECT_LE(margin, 1.0 + tol) << i;
    else EXPECT_NEAR(margin, 1.0, tol) << i;
  }
  // w is the alpha-weighted sum of the points, the bias their label sum
  for (std::size_t d = 0; d < kMechanicCount; ++d) {
    double w = 0.0;
    for (std::size_t i = 0; i < toy.xs.size(); ++i) w += m.alpha[i] * toy.ys[i] * toy.xs[i][d];
    EXPECT_NEAR(m.weights[d], w, 1e-9);
  }
  double b = 0.0;
  for (std::size_t i = 0; i < toy.xs.size(); ++i) b += m.alpha[i] * toy.ys[i];
  EXPECT_NEAR(m.bias, b, 1e-9);
}

TEST(Svm, DualityGapCloses) {
  const auto toy = separable_toy();
  SvmTrainLog log;
  train_binary_svm(toy.xs, toy.ys, SvmConfig{}, &log);
  for (std::size_t p = 0; p < log.primal.size(); ++p) {
    EXPECT_GE(log.primal[p] + 1e-9, log.dual[p]);
    EXPECT_GE(log.hingeLoss[p] + 1e-9, log.dual[p]);
  }
  EXPECT_NEAR(log.hingeLoss.back(), log.dual.back(), 1e-4);
  for (std::size_t p = 1; p < log.dual.size(); ++p) EXPECT_GE(log.dual[p] + 1e-12, log.dual[p - 1]);
}

TEST(Svm, RbfKernelFitsXor) {
  std::vector<SvmPoint> xs;
  std::vector<int> ys;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      SvmPoint p{};
      p[0] = a;
      p[1] = b;
      xs.push_back(p);
      ys.push_back(a == b ? 1 : -1);
    }
  SvmConfig cfg;
  cfg.kernel = KernelKind::Rbf;
  cfg.gamma = 2.0;
  cfg.C = 10.0;
  const auto m = train_binary_svm(xs, ys, cfg);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(m.decision(xs[i]) > 0, ys[i] > 0);
}

TEST(Svm, SingleClassIsDegenerate) {
  const auto toy = separable_toy();
  const std::vector<int> allPositive(toy.xs.size(), 1);
  const auto m = train_binary_svm(toy.xs, allPositive, SvmConfig{});
  EXPECT_TRUE(m.degenerate);
  for (const auto& x : toy.xs) EXPECT_GT(m.decision(x), 0.0);
  const auto n = train_binary_svm(toy.xs, std::vector<int>(toy.xs.size(), -1), SvmConfig{});
  EXPECT_LT(n.decision(toy.xs[0]), 0.0);
  EXPECT_THROW(train_binary_svm({}, {}, SvmConfig{}), Error);
}

TEST(Svm, MultiLabelModelPredictsAndRoundTrips) {
  std::vector<FeatureVector> raw;
  std::vector<LabelSet> labels;
  for (int i = 0; i < 30; ++i) {
    FeatureVector v;
    const unsigned mask = static_cast<unsigned>(i % 4) + 1;  // 1..4
    v.counts[static_cast<std::size_t>(Mechanic::EndTurn)] = mask & 1u ? 12 : 40;
    v.counts[static_cast<std::size_t>(Mechanic::CollectTreasure)] = mask & 2u ? 7 : 1;
    v.counts[static_cast<std::size_t>(Mechanic::EnemyKill)] = mask & 4u ? 5 : 0;
    raw.push_back(v);
    labels.push_back(LabelSet::from_mask(mask & 7u));
  }
  const auto norm = Normalizer::fit(raw);
  const auto model = train_svm(norm.apply(raw), labels, norm);
  int exact = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) exact += model.predict_raw(raw[i]).labels == labels[i] ? 1 : 0;
  EXPECT_EQ(exact, 30);
  EXPECT_THROW(model.predict(raw[0]), Error);

  const auto back = svm_from_json(nlohmann::json::parse(svm_to_json(model).dump()));
  for (const auto& v : raw) {
    const auto a = model.predict_raw(v);
    const auto b = back.predict_raw(v);
    EXPECT_EQ(a.labels, b.labels);
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a.margins[k], b.margins[k]);
  }
  EXPECT_THROW(svm_from_json(nlohmann::json{{"format", "other"}}), Error);
}

TEST(Lstm, ZeroParametersGiveOneHalf) {
  const auto p = LstmParams::zeros(kCropInputSize, 100);
  const auto out = lstm_forward(p, random_sequence(kCropInputSize, 7, 3));
  for (double v : out) EXPECT_EQ(v, 0.5);
}

TEST(Lstm, EmptySequenceIsRejected) {
  const auto p = LstmParams::zeros(3, 2);
  EXPECT_THROW(lstm_forward(p, SequenceMatrix(3, 0)), Error);
}

TEST(Lstm, OutputDependsOnEarlierSteps) {
  const auto p = random_params(4, 3, 5, 0.8);
  auto xs = random_sequence(4, 5, 6);
  const auto before = lstm_forward(p, xs);
  xs(0, 0) += 1.0;
  const auto after = lstm_forward(p, xs);
  EXPECT_NE(before[0], after[0]);
}

TEST(Lstm, MatchesHandUnrolledTwoSteps) {
  const int I = 2, H = 2;
  const auto p = random_params(I, H, 11, 0.9);
  const auto xs = random_sequence(I, 2, 12);
  double h[2] = {0, 0}, c[2] = {0, 0};
  for (int t = 0; t < 2; ++t) {
    double z[8];
    for (int r = 0; r < 4 * H; ++r) {
      z[r] = p.b(r);
      for (int i = 0; i < I; ++i) z[r] += p.W(r, i) * xs(i, t);
      for (int j = 0; j < H; ++j) z[r] += p.U(r, j) * h[j];
    }
    for (int k = 0; k < H; ++k) {
      const double ig = sig(z[k]), fg = sig(z[H + k]), gg = std::tanh(z[2 * H + k]), og = sig(z[3 * H + k]);
      c[k] = fg * c[k] + ig * gg;
      h[k] = og * std::tanh(c[k]);
    }
  }
  const auto out = lstm_forward(p, xs);
  for (int k = 0; k < 3; ++k) {
    double logit = p.c(k);
    for (int j = 0; j < H; ++j) logit += p.V(k, j) * h[j];
    EXPECT_NEAR(out[k], sig(logit), 1e-12);
  }
}

TEST(Lstm, GradientMatchesFiniteDifferences) {
  const int I = 5, H = 4;
  auto p = random_params(I, H, 21, 0.7);
  const auto xs = random_sequence(I, 4, 22);
  const Eigen::Vector3d target(1.0, 0.0, 1.0);
  LstmParams grad;
  const double loss = lstm_gradient(p, xs, target, grad);
  EXPECT_NEAR(loss, lstm_loss(p, xs, target), 1e-12);
  const auto analytic = flatten(grad);

  const double eps = 1e-5;
  std::size_t k = 0;
  double worst = 0.0;
  for_each_param(p, [&](double& v) {
    const double keep = v;
    v = keep + eps;
    const double up = lstm_loss(p, xs, target);
    v = keep - eps;
    const double down = lstm_loss(p, xs, target);
    v = keep;
    const double numeric = (up - down) / (2 * eps);
    const double a = analytic[k++];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, rel);
    EXPECT_LT(rel, 1e-4) << "parameter " << k - 1 << " analytic " << a << " numeric " << numeric;
  });
  EXPECT_EQ(k, analytic.size());
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Lstm, TrainingReducesLossOnToySet) {
  std::vector<CroppedSequence> seqs;
  std::vector<LabelSet> labels;
  SplitMix64 rng(4);
  for (int i = 0; i < 20; ++i) {
    CroppedSequence s;
    for (int t = 0; t < 4; ++t) {
      CropStep step;
      for (auto& v : step.window) v = rng.uniform() < 0.1 ? 1.0 : 0.0;
      step.window[static_cast<int>(CropChannel::Treasure)] = i % 2 ? 1.0 : 0.0;
      step.heroHp = 1.0;
      s.steps.push_back(step);
    }
    seqs.push_back(s);
    labels.push_back(i % 2 ? LabelSet::of(PersonaKind::TreasureCollector) : LabelSet::of(PersonaKind::Runner));
  }
  LstmConfig cfg;
  cfg.hiddenSize = 8;
  cfg.epochs = 40;
  cfg.learningRate = 0.05;
  LstmTrainLog log;
  const auto model = train_lstm(seqs, labels, cfg, &log);
  ASSERT_EQ(log.epochLoss.size(), 40u);
  EXPECT_LT(log.epochLoss.back(), 0.5 * log.epochLoss.front());
  int exact = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) exact += lstm_labels(lstm_forward(model, seqs[i])) == labels[i] ? 1 : 0;
  EXPECT_EQ(exact, 20);

  const auto back = lstm_from_json(nlohmann::json::parse(lstm_to_json(model).dump()));
  const auto a = lstm_forward(model, seqs[3]);
  const auto b = lstm_forward(back, seqs[3]);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a[k], b[k]);
}

TEST(Lstm, TrainingIsSeeded) {
  std::vector<CroppedSequence> seqs(3);
  for (auto& s : seqs) s.steps.resize(2);
  seqs[1].steps[0].heroHp = 0.5;
  const std::vector<LabelSet> labels = {LabelSet{}, LabelSet::of(PersonaKind::Runner), LabelSet{}};
  LstmConfig cfg;
  cfg.hiddenSize = 3;
  cfg.epochs = 3;
  const auto a = train_lstm(seqs, labels, cfg);
  const auto b = train_lstm(seqs, labels, cfg);
  EXPECT_EQ(flatten(a.params), flatten(b.params));
}

TEST(Evaluate, MatchesCountingOracle) {
  SplitMix64 rng(17);
  std::vector<LabelSet> pred;
  std::vector<LabelSet> truth;
  for (int i = 0; i < 200; ++i) {
    pred.push_back(LabelSet::from_mask(static_cast<unsigned>(rng.below(8))));
    truth.push_back(LabelSet::from_mask(static_cast<unsigned>(rng.below(8))));
  }
  const auto r = evaluate(pred, truth, "validation");
  int exact = 0;
  std::array<int, 3> agree{};
  std::array<int, 3> tp{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    exact += pred[i].mask() == truth[i].mask() ? 1 : 0;
    for (unsigned bit = 0; bit < 3; ++bit) {
      const bool p = (pred[i].mask() >> bit) & 1u;
      const bool t = (truth[i].mask() >> bit) & 1u;
      agree[bit] += p == t ? 1 : 0;
      tp[bit] += p && t ? 1 : 0;
    }
  }
  EXPECT_EQ(r.count, 200u);
  EXPECT_DOUBLE_EQ(r.exactMatchAccuracy, exact / 200.0);
  for (int k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(r.perLabelAccuracy[k], agree[k] / 200.0);
    EXPECT_EQ(r.confusion[k].tp, tp[k]);
    EXPECT_EQ(r.confusion[k].tp + r.confusion[k].fp + r.confusion[k].tn + r.confusion[k].fn, 200);
  }
  const auto j = report_json(r);
  EXPECT_EQ(j["split"], "validation");
  EXPECT_THROW(evaluate(pred, {}), Error);
}

TEST(Evaluate, PopulationStd) {
  const auto m = mean_std({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.std, std::sqrt(1.25));
  EXPECT_EQ(mean_std({}).mean, 0.0);
}
