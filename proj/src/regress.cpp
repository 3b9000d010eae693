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

#include "gazepred/regress.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gazepred/errors.hpp"
#include "gazepred/random.hpp"

namespace gazepred {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Head

RegressionHead RegressionHead::zeros(std::size_t input_dim) {
  RegressionHead h;
  h.weight = Matrix::Zero(static_cast<Eigen::Index>(input_dim), kNumTargets);
  return h;
}

Targets RegressionHead::raw(const RowVector& x) const {
  if (x.size() != weight.rows()) {
    throw std::invalid_argument(
        fmt::format("regression head expects {} inputs, got {}", weight.rows(), x.size()));
  }
  const RowVector z = x * weight + bias;
  Targets y{};
  for (std::size_t k = 0; k < kNumTargets; ++k) {
    y[k] = scale[k] * z(static_cast<Eigen::Index>(k)) + shift[k];
  }
  return y;
}

Prediction clip_prediction(const Targets& raw) {
  Prediction p{};
  for (std::size_t k = 0; k < kNumTargets; ++k) p[k] = std::clamp(raw[k], 0.0, 100.0);
  return p;
}

Prediction predict(const RegressionHead& head, const RowVector& x) {
  return clip_prediction(head.raw(x));
}

double loss(const Targets& pred, const Targets& gold, LossKind kind) {
  double acc = 0.0;
  for (std::size_t k = 0; k < kNumTargets; ++k) {
    const double diff = pred[k] - gold[k];
    acc += kind == LossKind::L1 ? std::abs(diff) : diff * diff;
  }
  return acc / static_cast<double>(kNumTargets);
}

Targets loss_gradient(const Targets& pred, const Targets& gold, LossKind kind) {
  Targets g{};
  for (std::size_t k = 0; k < kNumTargets; ++k) {
    const double diff = pred[k] - gold[k];
    if (kind == LossKind::L1) {
      g[k] = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    } else {
      g[k] = 2.0 * diff;
    }
    g[k] /= static_cast<double>(kNumTargets);
  }
  return g;
}

Matrix pooling_backward(const RowVector& upstream, Span span, Pooling strategy, std::size_t rows) {
  if (span.empty() || span.begin == 0 || span.end > rows) {
    throw std::out_of_range(
        fmt::format("pooling_backward: span [{}, {}) invalid for {} rows", span.begin, span.end, rows));
  }
  Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(rows), upstream.size());
  const auto begin = static_cast<Eigen::Index>(span.begin);
  const auto n = static_cast<Eigen::Index>(span.size());
  switch (strategy) {
    case Pooling::First:
      grad.row(begin) = upstream;
      break;
    case Pooling::Mean:
      grad.middleRows(begin, n).rowwise() = upstream / static_cast<double>(n);
      break;
    case Pooling::Sum:
      grad.middleRows(begin, n).rowwise() = upstream;
      break;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::next_step() {
  ++t_;
  correction1_ = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  correction2_ = 1.0 - std::pow(beta2_, static_cast<double>(t_));
}

void Adam::update(Matrix& param, const Matrix& grad, AdamSlot& slot) const {
  if (slot.m.size() == 0) {
    slot.m = Matrix::Zero(param.rows(), param.cols());
    slot.v = Matrix::Zero(param.rows(), param.cols());
  }
  slot.m = beta1_ * slot.m + (1.0 - beta1_) * grad;
  slot.v = beta2_ * slot.v + (1.0 - beta2_) * grad.cwiseProduct(grad);
  param.array() -= lr_ * (slot.m.array() / correction1_) /
                   ((slot.v.array() / correction2_).sqrt() + eps_);
}

void Adam::update(RowVector& param, const RowVector& grad, AdamSlot& slot) const {
  Matrix p = param;
  update(p, Matrix(grad), slot);
  param = p.row(0);
}

// ---------------------------------------------------------------------------
// Training

namespace {

void fit_target_normalization(RegressionHead& head, std::span<const Example> examples) {
  const auto n = static_cast<double>(examples.size());
  for (std::size_t k = 0; k < kNumTargets; ++k) {
    double mean = 0.0;
    for (const Example& ex : examples) mean += ex.gold[k];
    mean /= n;
    double var = 0.0;
    for (const Example& ex : examples) var += (ex.gold[k] - mean) * (ex.gold[k] - mean);
    const double sd = std::sqrt(var / n);
    head.shift[k] = mean;
    head.scale[k] = sd > 0.0 ? sd : 1.0;
  }
}

double overall_mae(const std::vector<Prediction>& preds, std::span<const Example> examples) {
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < kNumTargets; ++k) acc += std::abs(preds[i][k] - examples[i].gold[k]);
  }
  return acc / static_cast<double>(preds.size() * kNumTargets);
}

std::vector<Prediction> predict_examples(const EncoderParams& enc, const RunConfig& run,
                                         const RegressionHead& head,
                                         std::span<const Example> examples) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const Example& ex : examples) {
    const SequenceEncoding h = encode(enc, run.encoder, ex.ids);
    out.push_back(predict(head, head_input(pool(h, ex.target, run.pooling), ex, run.augmented)));
  }
  return out;
}

// Adds weight * dloss/d(W, b) for one head input into (wg, bg); with dx set,
// also stores weight * dloss/dx there. Returns the unweighted loss.
double head_backward(const RegressionHead& head, const RowVector& x, const Targets& gold, LossKind kind,
                     double weight, Matrix& wg, RowVector& bg, RowVector* dx) {
  const Targets raw = head.raw(x);
  const Targets g = loss_gradient(raw, gold, kind);
  RowVector gz(kNumTargets);
  for (std::size_t k = 0; k < kNumTargets; ++k) {
    gz(static_cast<Eigen::Index>(k)) = g[k] * head.scale[k] * weight;
  }
  wg.noalias() += x.transpose() * gz;
  bg += gz;
  if (dx) *dx = gz * head.weight.transpose();
  return loss(raw, gold, kind);
}

void round_head(RegressionHead& head) {
  auto r = [](double x) { return static_cast<double>(static_cast<float>(x)); };
  head.weight = head.weight.unaryExpr(r);
  head.bias = head.bias.unaryExpr(r);
}

}  // namespace

double backprop_example(const RunConfig& run, const EncoderParams& encoder, const RegressionHead& head,
                        const Example& ex, double weight, Matrix& weight_grad, RowVector& bias_grad,
                        EncoderParams* encoder_grads, EncoderTape& tape) {
  encode(encoder, run.encoder, ex.ids, tape);
  const RowVector x = head_input(pool(tape.output, ex.target, run.pooling), ex, run.augmented);
  RowVector dx;
  const double l = head_backward(head, x, ex.gold, run.train.loss, weight, weight_grad, bias_grad,
                                 encoder_grads ? &dx : nullptr);
  if (encoder_grads) {
    const Matrix upstream = pooling_backward(dx.head(static_cast<Eigen::Index>(run.encoder.d_model)),
                                             ex.target, run.pooling, ex.ids.size());
    encode_backward(encoder, run.encoder, tape, upstream, *encoder_grads);
  }
  return l;
}

TrainOutput train(const RunConfig& run, const EncoderParams& initial,
                  std::span<const Example> train_examples, std::span<const Example> dev_examples) {
  run.validate();
  if (train_examples.empty()) throw ConfigError("train: no training examples");
  const TrainConfig& tc = run.train;
  const std::size_t input_dim = run.encoder.d_model + (run.augmented ? 2 : 0);
  const bool whole = tc.regime == Regime::Whole;

  TrainOutput out{initial, RegressionHead::zeros(input_dim), {}};
  fit_target_normalization(out.head, train_examples);

  Rng rng(mix64(tc.seed ^ 0x7472616Eull));
  Adam adam(tc.learning_rate);
  AdamSlot weight_slot, bias_slot;
  std::vector<AdamSlot> encoder_slots;
  EncoderParams encoder_grads;
  if (whole) {
    encoder_grads = out.encoder.zeros_like();
    encoder_slots.resize(64);
  }

  // Frozen encoder: head inputs never change, compute them once.
  std::vector<RowVector> cached_inputs;
  if (!whole) {
    cached_inputs.reserve(train_examples.size());
    for (const Example& ex : train_examples) {
      const SequenceEncoding h = encode(out.encoder, run.encoder, ex.ids);
      cached_inputs.push_back(head_input(pool(h, ex.target, run.pooling), ex, run.augmented));
    }
  }

  std::vector<std::size_t> order(train_examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  EncoderTape tape;
  Matrix weight_grad(static_cast<Eigen::Index>(input_dim), kNumTargets);
  RowVector bias_grad(kNumTargets);

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + tc.batch_size);
      const auto batch = static_cast<double>(stop - start);
      weight_grad.setZero();
      bias_grad.setZero();
      if (whole) encoder_grads.set_zero();
      double batch_loss = 0.0;

      for (std::size_t b = start; b < stop; ++b) {
        const Example& ex = train_examples[order[b]];
        if (whole) {
          batch_loss += backprop_example(run, out.encoder, out.head, ex, 1.0 / batch, weight_grad, bias_grad,
                                         &encoder_grads, tape);
        } else {
          batch_loss += head_backward(out.head, cached_inputs[order[b]], ex.gold, tc.loss, 1.0 / batch,
                                      weight_grad, bias_grad, nullptr);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError(
            fmt::format("non-finite training loss in epoch {} batch {}", epoch + 1, batch_index));
      }
      epoch_loss += batch_loss;

      adam.next_step();
      adam.update(out.head.weight, weight_grad, weight_slot);
      adam.update(out.head.bias, bias_grad, bias_slot);
      if (whole) {
        std::vector<Matrix*> params;
        std::vector<const Matrix*> grads;
        out.encoder.for_each([&](const std::string&, Matrix& m) { params.push_back(&m); });
        encoder_grads.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
        if (encoder_slots.size() < params.size()) encoder_slots.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) adam.update(*params[i], *grads[i], encoder_slots[i]);
      }
    }
    out.log.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (!out.head.weight.allFinite() || !out.head.bias.allFinite() ||
        (whole && !out.encoder.all_finite())) {
      throw NumericalError(fmt::format("non-finite parameters after epoch {}", epoch + 1));
    }
    if (!dev_examples.empty()) {
      out.log.dev_mae.push_back(
          overall_mae(predict_examples(out.encoder, run, out.head, dev_examples), dev_examples));
    }
  }

  round_head(out.head);
  if (whole) round_to_float32(out.encoder);
  return out;
}

// ---------------------------------------------------------------------------
// Model

std::vector<Example> TrainedModel::examples(const Dataset& ds) const {
  return prepare_examples(ds, vocab, config.context, lexical ? &*lexical : nullptr);
}

std::vector<Prediction> TrainedModel::predict(std::span<const Example> exs) const {
  return predict_examples(encoder, config, head, exs);
}

std::vector<Prediction> TrainedModel::predict(const Dataset& ds) const {
  return predict(examples(ds));
}

TrainedModel fit_model(const RunConfig& run, const Dataset& train_ds, const Dataset* dev) {
  run.validate();
  if (train_ds.empty()) throw ConfigError("fit_model: empty training split");
  TrainedModel model;
  model.config = run;
  std::vector<std::string> words;
  words.reserve(train_ds.size());
  for (const GazeRecord& r : train_ds.records()) words.push_back(r.word);
  try {
    model.vocab = train_vocab(words, run.encoder.vocab_size, run.encoder.family);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (run.augmented) model.lexical = LexicalContext::fit(train_ds);

  const std::vector<Example> train_examples = model.examples(train_ds);
  std::vector<Example> dev_examples;
  if (dev != nullptr && !dev->empty()) dev_examples = model.examples(*dev);
  std::size_t longest = 0;
  for (const Example& ex : train_examples) longest = std::max(longest, ex.ids.size());
  if (longest > run.encoder.max_seq_len) {
    throw ConfigError(fmt::format("longest training sequence has {} tokens but max_seq_len is {}",
                                  longest, run.encoder.max_seq_len));
  }

  TrainOutput trained = train(run, init_params(run.encoder), train_examples, dev_examples);
  model.encoder = std::move(trained.encoder);
  model.head = std::move(trained.head);
  model.log = std::move(trained.log);
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kModelMagic = "GAZEPRED-MODEL 1\n";

struct TensorRef {
  std::string name;
  const Matrix* matrix;
};

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

void append_f32(std::string& out, double value) {
  const auto f = static_cast<float>(value);
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  float f = 0;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

json log_to_json(const TrainingLog& log) {
  return json{{"epoch_loss", log.epoch_loss}, {"dev_mae", log.dev_mae}};
}

json lexical_to_json(const LexicalContext& lex) {
  json counts = json::object();
  for (const auto& [lang, words] : lex.table.counts()) {
    json w = json::object();
    for (const auto& [word, c] : words) w[word] = c;
    counts[lang] = std::move(w);
  }
  return json{{"counts", counts},
              {"length_mean", lex.norm.length_mean},
              {"length_std", lex.norm.length_std},
              {"log_freq_mean", lex.norm.log_freq_mean},
              {"log_freq_std", lex.norm.log_freq_std}};
}

LexicalContext lexical_from_json(const json& j) {
  LexicalContext lex;
  for (const auto& [lang, words] : j.at("counts").items()) {
    for (const auto& [word, c] : words.items()) lex.table.add(lang, word, c.get<std::size_t>());
  }
  lex.norm.length_mean = j.at("length_mean").get<double>();
  lex.norm.length_std = j.at("length_std").get<double>();
  lex.norm.log_freq_mean = j.at("log_freq_mean").get<double>();
  lex.norm.log_freq_std = j.at("log_freq_std").get<double>();
  return lex;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  Matrix bias = model.head.bias;
  std::vector<TensorRef> tensors;
  model.encoder.for_each([&](const std::string& name, const Matrix& m) { tensors.push_back({name, &m}); });
  tensors.push_back({"head.weight", &model.head.weight});
  tensors.push_back({"head.bias", &bias});

  json header;
  header["config"] = to_json(model.config);
  header["vocab"] = model.vocab.pieces();
  header["lexical"] = model.lexical ? lexical_to_json(*model.lexical) : json(nullptr);
  header["head"] = json{{"shift", model.head.shift}, {"scale", model.head.scale}};
  header["log"] = log_to_json(model.log);
  json shapes = json::array();
  for (const TensorRef& t : tensors) {
    shapes.push_back(json{{"name", t.name}, {"shape", {t.matrix->rows(), t.matrix->cols()}}});
  }
  header["tensors"] = shapes;

  const std::string text = header.dump();
  std::string out(kModelMagic);
  append_u64(out, text.size());
  out += text;
  for (const TensorRef& t : tensors) {
    const Matrix& m = *t.matrix;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) append_f32(out, m(i, j));
    }
  }
  return out;
}

TrainedModel deserialize_model(std::string_view bytes) {
  if (!bytes.starts_with(kModelMagic)) throw ParseError("model file: bad magic line");
  bytes.remove_prefix(kModelMagic.size());
  if (bytes.size() < 8) throw ParseError("model file: truncated header length");
  const std::uint64_t header_len = read_u64(bytes);
  bytes.remove_prefix(8);
  if (bytes.size() < header_len) throw ParseError("model file: truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(0, header_len));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("model file: {}", e.what()));
  }
  bytes.remove_prefix(header_len);

  TrainedModel model;
  try {
    model.config = run_config_from_json(header.at("config"));
    model.vocab = SubwordVocab(header.at("vocab").get<std::vector<std::string>>());
    if (!header.at("lexical").is_null()) model.lexical = lexical_from_json(header.at("lexical"));
    model.head.shift = header.at("head").at("shift").get<Targets>();
    model.head.scale = header.at("head").at("scale").get<Targets>();
    model.log.epoch_loss = header.at("log").at("epoch_loss").get<std::vector<double>>();
    model.log.dev_mae = header.at("log").at("dev_mae").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("model file header: {}", e.what()));
  }
  if (model.config.augmented != model.lexical.has_value()) {
    throw ParseError("model file: lexical statistics do not match the augmented flag");
  }

  // Expected layout comes from the config, never from the file.
  model.encoder = init_params(model.config.encoder);
  const std::size_t input_dim = model.config.encoder.d_model + (model.config.augmented ? 2 : 0);
  model.head.weight = Matrix::Zero(static_cast<Eigen::Index>(input_dim), kNumTargets);
  Matrix bias = Matrix::Zero(1, kNumTargets);
  std::vector<std::pair<std::string, Matrix*>> expected;
  model.encoder.for_each([&](const std::string& name, Matrix& m) { expected.emplace_back(name, &m); });
  expected.emplace_back("head.weight", &model.head.weight);
  expected.emplace_back("head.bias", &bias);

  const json& declared = header.at("tensors");
  if (!declared.is_array() || declared.size() != expected.size()) {
    throw ParseError(fmt::format("model file: expected {} tensors, header declares {}",
                                 expected.size(), declared.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, m] = expected[i];
    const json& t = declared[i];
    const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    if (t.at("name") != name || shape.size() != 2 || shape[0] != m->rows() || shape[1] != m->cols()) {
      throw ParseError(fmt::format("model file: tensor {} is {} {}, expected {} [{}, {}]", i,
                                   t.at("name").dump(), t.at("shape").dump(), name, m->rows(), m->cols()));
    }
    const auto need = static_cast<std::size_t>(m->size()) * 4;
    if (bytes.size() < need) throw ParseError(fmt::format("model file: tensor {} truncated", name));
    const char* p = bytes.data();
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c, p += 4) (*m)(r, c) = read_f32(p);
    }
    bytes.remove_prefix(need);
  }
  if (!bytes.empty()) throw ParseError("model file: trailing bytes after tensors");
  if (model.vocab.size() > model.config.encoder.vocab_size) {
    throw ParseError("model file: vocabulary larger than the embedding table");
  }
  model.head.bias = bias.row(0);
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << serialize_model(model);
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace gazepred
