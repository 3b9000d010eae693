/*
 * Copyright 2026 The gazepred Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazepred/config.hpp"
#include "gazepred/corpus.hpp"
#include "gazepred/encoder.hpp"
#include "gazepred/features.hpp"
#include "gazepred/tokenizer.hpp"
#include "gazepred/types.hpp"

namespace gazepred {

// Clipped to [0, 100] at inference.
using Prediction = Targets;

// One linear layer shared by the four outputs:
//   y = scale * (x W + b) + shift
// shift/scale are fixed per-attribute target statistics taken from the
// training split (0 and 1 give the plain affine map); only W and b train.
struct RegressionHead {
  Matrix weight;  // input_dim x 4
  RowVector bias = RowVector::Zero(kNumTargets);
  Targets shift{0.0, 0.0, 0.0, 0.0};
  Targets scale{1.0, 1.0, 1.0, 1.0};

  static RegressionHead zeros(std::size_t input_dim);
  [[nodiscard]] std::size_t input_dim() const { return static_cast<std::size_t>(weight.rows()); }

  // Unclipped output. Throws std::invalid_argument on a dimension mismatch.
  [[nodiscard]] Targets raw(const RowVector& x) const;

  friend bool operator==(const RegressionHead& a, const RegressionHead& b) {
    return a.weight == b.weight && a.bias == b.bias && a.shift == b.shift && a.scale == b.scale;
  }
};

Prediction predict(const RegressionHead& head, const RowVector& x);
Prediction clip_prediction(const Targets& raw);

// Mean over the four attributes of |pred - gold| (L1) or (pred - gold)^2 (L2).
double loss(const Targets& pred_unclipped, const Targets& gold, LossKind kind);
// d loss / d pred.
Targets loss_gradient(const Targets& pred_unclipped, const Targets& gold, LossKind kind);

// Routes a pooled-vector gradient back to the encoder rows it came from.
Matrix pooling_backward(const RowVector& upstream, Span span, Pooling strategy, std::size_t rows);

struct AdamSlot {
  Matrix m;
  Matrix v;
};

// Adam with beta1 0.9, beta2 0.999, eps 1e-8.
class Adam {
 public:
  explicit Adam(double learning_rate) : lr_(learning_rate) {}

  void next_step();
  void update(Matrix& param, const Matrix& grad, AdamSlot& slot) const;
  void update(RowVector& param, const RowVector& grad, AdamSlot& slot) const;

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t t_ = 0;
  double correction1_ = 1.0;
  double correction2_ = 1.0;
};

struct TrainingLog {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::vector<double> dev_mae;     // overall dev MAE per epoch; empty without dev data

  friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

struct TrainOutput {
  EncoderParams encoder;
  RegressionHead head;
  TrainingLog log;
};

// Loss of one example on unclipped outputs. Adds weight times its gradient
// with respect to W and b into weight_grad / bias_grad and, when
// encoder_grads is non-null, with respect to every encoder tensor.
double backprop_example(const RunConfig& run, const EncoderParams& encoder, const RegressionHead& head,
                        const Example& ex, double weight, Matrix& weight_grad, RowVector& bias_grad,
                        EncoderParams* encoder_grads, EncoderTape& tape);

// Mini-batch Adam training of the head (Classifier) or head plus encoder
// (Whole). Classifier leaves the encoder parameters bit-identical. Trained
// weights are rounded to float32 at the end. Throws ConfigError on an invalid
// configuration and NumericalError on a non-finite loss.
TrainOutput train(const RunConfig& run, const EncoderParams& initial,
                  std::span<const Example> train_examples,
                  std::span<const Example> dev_examples = {});

// A trained model with everything needed to predict on new data.
struct TrainedModel {
  RunConfig config;
  SubwordVocab vocab;
  std::optional<LexicalContext> lexical;
  EncoderParams encoder;
  RegressionHead head;
  TrainingLog log;

  [[nodiscard]] std::vector<Prediction> predict(const Dataset& ds) const;
  [[nodiscard]] std::vector<Prediction> predict(std::span<const Example> examples) const;
  [[nodiscard]] std::vector<Example> examples(const Dataset& ds) const;
};

// Trains the vocabulary, lexical statistics, encoder and head from a
// training split. dev may be null.
TrainedModel fit_model(const RunConfig& run, const Dataset& train, const Dataset* dev = nullptr);

// Header line, little-endian u64 header length, canonical JSON header, then
// little-endian float32 tensors in header order.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view bytes);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace gazepred
