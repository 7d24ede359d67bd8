#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "md2/features.hpp"
#include "md2/labels.hpp"

namespace md2 {

struct LstmConfig {
  int inputSize = kCropInputSize;
  int hiddenSize = 100;
  int epochs = 200;
  double learningRate = 0.001;
  double clipNorm = 5.0;
  std::uint64_t seed = 1;
};

/// Gate blocks are stacked input, forget, cell, output.
struct LstmParams {
  Eigen::MatrixXd W;  // 4H x I
  Eigen::MatrixXd U;  // 4H x H
  Eigen::VectorXd b;  // 4H
  Eigen::MatrixXd V;  // 3 x H
  Eigen::VectorXd c;  // 3

  static LstmParams zeros(int input, int hidden) {
    return {Eigen::MatrixXd::Zero(4 * hidden, input), Eigen::MatrixXd::Zero(4 * hidden, hidden),
            Eigen::VectorXd::Zero(4 * hidden), Eigen::MatrixXd::Zero(3, hidden), Eigen::VectorXd::Zero(3)};
  }

  int hidden() const { return static_cast<int>(U.cols()); }
  int input() const { return static_cast<int>(W.cols()); }

  double squared_norm() const {
    return W.squaredNorm() + U.squaredNorm() + b.squaredNorm() + V.squaredNorm() + c.squaredNorm();
  }
  bool all_finite() const {
    return W.allFinite() && U.allFinite() && b.allFinite() && V.allFinite() && c.allFinite();
  }
};

struct LstmModel {
  LstmConfig config;
  LstmParams params;
  std::string id = "lstm";
};

/// Sequence as an I x T matrix, one column per step.
using SequenceMatrix = Eigen::MatrixXd;

inline SequenceMatrix sequence_matrix(const CroppedSequence& seq) {
  SequenceMatrix m(kCropInputSize, static_cast<Eigen::Index>(seq.size()));
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto x = crop_input(seq.steps[t]);
    for (int i = 0; i < kCropInputSize; ++i) m(i, static_cast<Eigen::Index>(t)) = x[i];
  }
  return m;
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LstmTape {
  std::vector<Eigen::VectorXd> h;  // h[0] = initial zeros, h[t+1] after step t
  std::vector<Eigen::VectorXd> c;
  std::vector<Eigen::VectorXd> gates;  // activated i, f, g, o stacked
  Eigen::Vector3d out;
};

inline LstmTape lstm_run(const LstmParams& p, const SequenceMatrix& xs) {
  const int H = p.hidden();
  const Eigen::Index T = xs.cols();
  LstmTape tape;
  tape.h.assign(T + 1, Eigen::VectorXd::Zero(H));
  tape.c.assign(T + 1, Eigen::VectorXd::Zero(H));
  tape.gates.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd z = p.W * xs.col(t) + p.U * tape.h[t] + p.b;
    for (int k = 0; k < H; ++k) {
      z(k) = sigmoid(z(k));
      z(H + k) = sigmoid(z(H + k));
      z(2 * H + k) = std::tanh(z(2 * H + k));
      z(3 * H + k) = sigmoid(z(3 * H + k));
    }
    tape.c[t + 1] = z.segment(H, H).cwiseProduct(tape.c[t]) + z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
    tape.h[t + 1] = z.segment(3 * H, H).cwiseProduct(tape.c[t + 1].array().tanh().matrix());
    tape.gates[t] = std::move(z);
  }
  const Eigen::Vector3d logits = p.V * tape.h[T] + p.c;
  for (int k = 0; k < 3; ++k) tape.out(k) = sigmoid(logits(k));
  return tape;
}

}  // namespace detail

inline std::array<double, 3> lstm_forward(const LstmParams& p, const SequenceMatrix& xs) {
  if (xs.cols() == 0) throw Error(ErrorCode::EmptySequence, "sequence has no steps");
  const auto tape = detail::lstm_run(p, xs);
  return {tape.out(0), tape.out(1), tape.out(2)};
}

inline std::array<double, 3> lstm_forward(const LstmModel& m, const CroppedSequence& seq) {
  if (seq.empty()) throw Error(ErrorCode::EmptySequence, "sequence has no steps");
  return lstm_forward(m.params, sequence_matrix(seq));
}

inline Eigen::Vector3d label_targets(const LabelSet& l) { return {l[0] ? 1.0 : 0.0, l[1] ? 1.0 : 0.0, l[2] ? 1.0 : 0.0}; }

/// Summed binary cross-entropy over the three outputs.
inline double lstm_loss(const LstmParams& p, const SequenceMatrix& xs, const Eigen::Vector3d& target) {
  const auto tape = detail::lstm_run(p, xs);
  double loss = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double y = std::clamp(tape.out(k), 1e-15, 1.0 - 1e-15);
    loss -= target(k) * std::log(y) + (1.0 - target(k)) * std::log(1.0 - y);
  }
  return loss;
}

/// Loss and its gradient by backpropagation through time.
inline double lstm_gradient(const LstmParams& p, const SequenceMatrix& xs, const Eigen::Vector3d& target,
                            LstmParams& grad) {
  const int H = p.hidden();
  const Eigen::Index T = xs.cols();
  if (T == 0) throw Error(ErrorCode::EmptySequence, "sequence has no steps");
  const auto tape = detail::lstm_run(p, xs);
  grad = LstmParams::zeros(p.input(), H);

  double loss = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double y = std::clamp(tape.out(k), 1e-15, 1.0 - 1e-15);
    loss -= target(k) * std::log(y) + (1.0 - target(k)) * std::log(1.0 - y);
  }
  const Eigen::Vector3d dlogits = tape.out - target;
  grad.V = dlogits * tape.h[T].transpose();
  grad.c = dlogits;
  Eigen::VectorXd dh = p.V.transpose() * dlogits;
  Eigen::VectorXd dcNext = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dz(4 * H);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto& z = tape.gates[t];
    const Eigen::VectorXd tanhC = tape.c[t + 1].array().tanh().matrix();
    for (int k = 0; k < H; ++k) {
      const double i = z(k), f = z(H + k), g = z(2 * H + k), o = z(3 * H + k);
      const double dc = dcNext(k) + dh(k) * o * (1.0 - tanhC(k) * tanhC(k));
      dz(k) = dc * g * i * (1.0 - i);
      dz(H + k) = dc * tape.c[t](k) * f * (1.0 - f);
      dz(2 * H + k) = dc * i * (1.0 - g * g);
      dz(3 * H + k) = dh(k) * tanhC(k) * o * (1.0 - o);
      dcNext(k) = dc * f;
    }
    grad.W.noalias() += dz * xs.col(t).transpose();
    grad.U.noalias() += dz * tape.h[t].transpose();
    grad.b += dz;
    dh.noalias() = p.U.transpose() * dz;
  }
  return loss;
}

/// Uniform in +-1/sqrt(fan_in): gates use I + H, the output layer H.
inline LstmParams init_lstm(int input, int hidden, std::uint64_t seed) {
  SplitMix64 rng(seed);
  auto fill = [&](auto& m, double scale) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index col = 0; col < m.cols(); ++col) m(r, col) = (2.0 * rng.uniform() - 1.0) * scale;
  };
  LstmParams p = LstmParams::zeros(input, hidden);
  const double gateScale = 1.0 / std::sqrt(static_cast<double>(input + hidden));
  const double outScale = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill(p.W, gateScale);
  fill(p.U, gateScale);
  fill(p.b, gateScale);
  fill(p.V, outScale);
  fill(p.c, outScale);
  return p;
}

struct LstmTrainLog {
  std::vector<double> epochLoss;  // mean loss over the epoch's updates
};

/// Plain SGD, batch size 1, global-norm gradient clipping.
inline LstmModel train_lstm(const std::vector<CroppedSequence>& seqs, const std::vector<LabelSet>& labels,
                            const LstmConfig& cfg, LstmTrainLog* log = nullptr) {
  if (seqs.empty()) throw Error(ErrorCode::EmptyDataset, "no training sequences");
  if (seqs.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "sequence/label count mismatch");
  std::vector<SequenceMatrix> xs;
  std::vector<Eigen::Vector3d> ts;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].empty()) continue;
    xs.push_back(sequence_matrix(seqs[i]));
    ts.push_back(label_targets(labels[i]));
  }
  if (xs.empty()) throw Error(ErrorCode::EmptySequence, "all training sequences are empty");

  LstmModel model;
  model.config = cfg;
  model.params = init_lstm(cfg.inputSize, cfg.hiddenSize, cfg.seed);
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(cfg.seed ^ 0x5eedULL);
  LstmParams grad;
  LstmTrainLog local;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double total = 0.0;
    for (std::size_t i : order) {
      total += lstm_gradient(model.params, xs[i], ts[i], grad);
      const double norm = std::sqrt(grad.squared_norm());
      double scale = cfg.learningRate;
      if (norm > cfg.clipNorm) scale *= cfg.clipNorm / norm;
      model.params.W -= scale * grad.W;
      model.params.U -= scale * grad.U;
      model.params.b -= scale * grad.b;
      model.params.V -= scale * grad.V;
      model.params.c -= scale * grad.c;
    }
    const double mean = total / static_cast<double>(xs.size());
    if (!std::isfinite(mean) || !model.params.all_finite())
      throw Error(ErrorCode::Divergence, "training diverged at epoch " + std::to_string(epoch) + " (seed " +
                                             std::to_string(cfg.seed) + ")");
    local.epochLoss.push_back(mean);
  }
  if (log) *log = std::move(local);
  return model;
}

inline LabelSet lstm_labels(const std::array<double, 3>& probs) {
  return {probs[0] > 0.5, probs[1] > 0.5, probs[2] > 0.5};
}

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows) throw Error(ErrorCode::MalformedRecord, "matrix row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = j.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(ErrorCode::MalformedRecord, "matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from(const nlohmann::json& j, Eigen::Index n) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n) throw Error(ErrorCode::MalformedRecord, "vector length mismatch");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

}  // namespace detail

inline nlohmann::json lstm_to_json(const LstmModel& m) {
  return {{"format", "md2-lstm"},
          {"version", 1},
          {"id", m.id},
          {"input_size", m.config.inputSize},
          {"hidden_size", m.config.hiddenSize},
          {"epochs", m.config.epochs},
          {"learning_rate", m.config.learningRate},
          {"clip_norm", m.config.clipNorm},
          {"seed", m.config.seed},
          {"W", detail::matrix_json(m.params.W)},
          {"U", detail::matrix_json(m.params.U)},
          {"b", detail::vector_json(m.params.b)},
          {"V", detail::matrix_json(m.params.V)},
          {"c", detail::vector_json(m.params.c)}};
}

inline LstmModel lstm_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "md2-lstm") throw Error(ErrorCode::MalformedRecord, "not an LSTM model file");
  if (j.at("version").get<int>() != 1) throw Error(ErrorCode::MalformedRecord, "unsupported LSTM model version");
  LstmModel m;
  m.id = j.value("id", "lstm");
  m.config.inputSize = j.at("input_size").get<int>();
  m.config.hiddenSize = j.at("hidden_size").get<int>();
  m.config.epochs = j.at("epochs").get<int>();
  m.config.learningRate = j.at("learning_rate").get<double>();
  m.config.clipNorm = j.at("clip_norm").get<double>();
  m.config.seed = j.at("seed").get<std::uint64_t>();
  const int I = m.config.inputSize;
  const int H = m.config.hiddenSize;
  m.params.W = detail::matrix_from(j.at("W"), 4 * H, I);
  m.params.U = detail::matrix_from(j.at("U"), 4 * H, H);
  m.params.b = detail::vector_from(j.at("b"), 4 * H);
  m.params.V = detail::matrix_from(j.at("V"), 3, H);
  m.params.c = detail::vector_from(j.at("c"), 3);
  return m;
}

}  // namespace md2
