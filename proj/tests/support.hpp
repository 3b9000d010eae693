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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gazepred/encoder.hpp"
#include "gazepred/features.hpp"
#include "gazepred/random.hpp"
#include "gazepred/regress.hpp"

namespace gazepred::testing {

// Small encoder used by the gradient checks.
inline EncoderConfig tiny_encoder(std::uint64_t seed = 3) {
  EncoderConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_seq_len = 8;
  c.vocab_size = 16;
  c.seed = seed;
  return c;
}

// Glorot init leaves gains at 1 and biases at 0, which hides mistakes in
// their gradients; spread every entry a little.
inline void perturb(EncoderParams& p, Rng& rng, double amount = 0.3) {
  p.for_each([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += amount * (rng.uniform() - 0.5);
  });
}

struct Coordinate {
  std::string tensor;
  Matrix* matrix = nullptr;
  Eigen::Index index = 0;
};

inline std::vector<Coordinate> coordinates(EncoderParams& p) {
  std::vector<Coordinate> out;
  p.for_each([&](const std::string& name, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back({name, &m, i});
  });
  return out;
}

// |a - n| / max(|a|, |n|, floor). The floor only matters for components that
// are zero up to rounding (around 1e-12 for central differences at eps 1e-4).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double central_difference(double& x, const std::function<double()>& f, double eps = 1e-4) {
  const double saved = x;
  x = saved + eps;
  const double up = f();
  x = saved - eps;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * eps);
}

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_coordinate;

  void add(const std::string& where, double analytic, double numeric, double tol) {
    const double e = relative_error(analytic, numeric);
    ++checked;
    if (!(e <= tol)) ++failed;
    if (e > worst || !std::isfinite(e)) {
      worst = e;
      worst_coordinate = where;
    }
  }
};

// Random token sequence starting with the bos id.
inline std::vector<PieceId> random_ids(Rng& rng, std::size_t length, std::size_t vocab) {
  std::vector<PieceId> ids = {1};
  while (ids.size() < length) ids.push_back(static_cast<PieceId>(2 + rng.below(vocab - 2)));
  return ids;
}

// Total loss of a batch of examples under (encoder, head), as the trainer
// sees it: unclipped outputs, mean over examples.
inline double batch_loss(const RunConfig& run, const EncoderParams& enc, const RegressionHead& head,
                         const std::vector<Example>& exs) {
  double acc = 0.0;
  for (const Example& ex : exs) {
    const SequenceEncoding h = encode(enc, run.encoder, ex.ids);
    acc += loss(head.raw(head_input(pool(h, ex.target, run.pooling), ex, run.augmented)), ex.gold, run.train.loss);
  }
  return acc / static_cast<double>(exs.size());
}

// End-to-end problem: random encoder, random head, a few examples with
// multi-piece targets inside longer contexts.
struct EndToEndProblem {
  RunConfig run;
  EncoderParams encoder;
  RegressionHead head;
  std::vector<Example> examples;
};

inline EndToEndProblem make_end_to_end(Pooling pooling, bool augmented, std::uint64_t seed,
                                       LossKind kind = LossKind::L2) {
  EndToEndProblem p;
  p.run.encoder = tiny_encoder(seed);
  p.run.pooling = pooling;
  p.run.augmented = augmented;
  p.run.context = ContextMode::Sys2;
  p.run.train.regime = Regime::Whole;
  p.run.train.loss = kind;
  Rng rng(mix64(seed));
  p.encoder = init_params(p.run.encoder);
  perturb(p.encoder, rng);
  const std::size_t in = p.run.encoder.d_model + (augmented ? 2 : 0);
  p.head = RegressionHead::zeros(in);
  for (Eigen::Index i = 0; i < p.head.weight.size(); ++i) p.head.weight.data()[i] = rng.uniform(-1, 1);
  for (Eigen::Index k = 0; k < 4; ++k) p.head.bias(k) = rng.uniform(-1, 1);
  p.head.shift = {0.5, -0.2, 0.1, 0.0};
  p.head.scale = {1.5, 0.7, 1.0, 2.0};
  for (int e = 0; e < 3; ++e) {
    Example ex;
    const std::size_t len = 3 + rng.below(4);
    ex.ids = random_ids(rng, len, p.run.encoder.vocab_size);
    const std::size_t target_len = 1 + rng.below(std::min<std::size_t>(3, len - 1));
    ex.target = Span{len - target_len, len};
    ex.lexical = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    ex.gold = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    p.examples.push_back(ex);
  }
  return p;
}

// Analytic gradient of batch_loss with respect to encoder and head.
struct EndToEndGradient {
  EncoderParams encoder;
  Matrix weight;
  RowVector bias;
};

inline EndToEndGradient end_to_end_gradient(const EndToEndProblem& p) {
  EndToEndGradient g{p.encoder.zeros_like(), Matrix::Zero(p.head.weight.rows(), 4), RowVector::Zero(4)};
  EncoderTape tape;
  const double w = 1.0 / static_cast<double>(p.examples.size());
  for (const Example& ex : p.examples) {
    backprop_example(p.run, p.encoder, p.head, ex, w, g.weight, g.bias, &g.encoder, tape);
  }
  return g;
}

// Compares the analytic end-to-end gradient with central differences on
// `samples` coordinates drawn from the encoder and the head.
inline GradCheckReport check_end_to_end(EndToEndProblem& p, std::size_t samples, Rng& rng, double tol = 1e-3) {
  EndToEndGradient g = end_to_end_gradient(p);
  auto f = [&] { return batch_loss(p.run, p.encoder, p.head, p.examples); };
  GradCheckReport report;
  auto enc = coordinates(p.encoder);
  auto grad = coordinates(g.encoder);
  // Rows of unused vocabulary entries have exactly zero gradient; sample the
  // rest so the check exercises live coordinates.
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i].matrix->data()[grad[i].index] != 0.0) live.push_back(i);
  }
  const std::size_t head_coords = static_cast<std::size_t>(p.head.weight.size() + 4);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t pick = rng.below(live.size() + head_coords);
    if (pick < live.size()) {
      const std::size_t i = live[pick];
      double& x = enc[i].matrix->data()[enc[i].index];
      report.add(enc[i].tensor + "[" + std::to_string(enc[i].index) + "]",
                 grad[i].matrix->data()[grad[i].index], central_difference(x, f), tol);
    } else {
      const auto j = static_cast<Eigen::Index>(pick - live.size());
      if (j < p.head.weight.size()) {
        report.add("head.weight[" + std::to_string(j) + "]", g.weight.data()[j],
                   central_difference(p.head.weight.data()[j], f), tol);
      } else {
        const Eigen::Index k = j - p.head.weight.size();
        report.add("head.bias[" + std::to_string(k) + "]", g.bias(k), central_difference(p.head.bias(k), f), tol);
      }
    }
  }
  return report;
}

}  // namespace gazepred::testing
