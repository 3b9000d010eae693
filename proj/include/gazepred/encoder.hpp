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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gazepred/tokenizer.hpp"
#include "gazepred/types.hpp"

namespace gazepred {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_seq_len = 128;
  // Rows of the token embedding table; also the vocabulary training target.
  std::size_t vocab_size = 512;
  Family family = Family::A;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  [[nodiscard]] std::size_t head_dim() const { return d_model / n_heads; }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct LayerParams {
  Matrix ln1_gain, ln1_bias;               // 1 x d
  Matrix query, key, value, output;        // d x d
  Matrix ln2_gain, ln2_bias;               // 1 x d
  Matrix ff_in, ff_in_bias;                // d x 4d, 1 x 4d
  Matrix ff_out, ff_out_bias;              // 4d x d, 1 x d
};

// Every trainable tensor of the toy encoder. Gradients use the same type.
struct EncoderParams {
  Matrix token_embedding;     // vocab_size x d
  Matrix position_embedding;  // max_seq_len x d
  std::vector<LayerParams> layers;
  Matrix final_gain, final_bias;  // 1 x d

  // Visits tensors in the fixed serialization order: f(name, tensor).
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  [[nodiscard]] EncoderParams zeros_like() const;
  [[nodiscard]] std::size_t parameter_count() const;
  void set_zero();
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const EncoderParams& a, const EncoderParams& b);

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    f(std::string("token_embedding"), p.token_embedding);
    f(std::string("position_embedding"), p.position_embedding);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      auto& l = p.layers[i];
      const std::string pre = "layer" + std::to_string(i) + ".";
      f(pre + "ln1_gain", l.ln1_gain);
      f(pre + "ln1_bias", l.ln1_bias);
      f(pre + "query", l.query);
      f(pre + "key", l.key);
      f(pre + "value", l.value);
      f(pre + "output", l.output);
      f(pre + "ln2_gain", l.ln2_gain);
      f(pre + "ln2_bias", l.ln2_bias);
      f(pre + "ff_in", l.ff_in);
      f(pre + "ff_in_bias", l.ff_in_bias);
      f(pre + "ff_out", l.ff_out);
      f(pre + "ff_out_bias", l.ff_out_bias);
    }
    f(std::string("final_gain"), p.final_gain);
    f(std::string("final_bias"), p.final_bias);
  }
};

// Final-layer hidden state per token position (rows == tokens).
using SequenceEncoding = Matrix;

// Glorot-uniform weights, unit layer-norm gains, zero biases. Values are
// rounded to float32 so a saved model reloads bit-exactly.
EncoderParams init_params(const EncoderConfig& config);

// SHA-256 over the raw bytes of every tensor, as lowercase hex.
std::string params_digest(const EncoderParams& params);

// Rounds every entry to the nearest float32.
void round_to_float32(EncoderParams& params);

// Intermediate values of one forward pass, kept for the backward pass.
struct EncoderTape {
  struct LayerNormCache {
    Matrix normalized;     // x_hat
    Eigen::VectorXd rstd;  // per row
  };
  struct Layer {
    LayerNormCache ln1;
    Matrix attn_in;  // ln1 output
    Matrix q, k, v;
    std::vector<Matrix> probs;  // per head, L x L
    Matrix context;             // concatenated heads, L x d
    LayerNormCache ln2;
    Matrix ff_in;      // ln2 output
    Matrix ff_hidden;  // pre-activation, L x 4d
    Matrix ff_act;
  };
  std::vector<PieceId> ids;
  std::vector<Layer> layers;
  LayerNormCache final_ln;
  SequenceEncoding output;
};

// Pre-norm bidirectional transformer encoder. Throws std::length_error when
// the sequence is longer than max_seq_len and std::out_of_range on bad ids.
SequenceEncoding encode(const EncoderParams& params, const EncoderConfig& config,
                        std::span<const PieceId> ids);
void encode(const EncoderParams& params, const EncoderConfig& config,
            std::span<const PieceId> ids, EncoderTape& tape);

// Adds d(upstream . output)/d(params) into grads. Throws std::invalid_argument
// on shape mismatch.
void encode_backward(const EncoderParams& params, const EncoderConfig& config,
                     const EncoderTape& tape, const Matrix& upstream, EncoderParams& grads);

// Convenience form: recomputes the forward pass and returns fresh gradients.
EncoderParams encode_backward(const EncoderParams& params, const EncoderConfig& config,
                              std::span<const PieceId> ids, const Matrix& upstream);

// Anything that maps a token sequence to fixed representations.
class FrozenEncoder {
 public:
  virtual ~FrozenEncoder() = default;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  [[nodiscard]] virtual SequenceEncoding encode(std::span<const PieceId> ids) const = 0;
};

class TransformerEncoder final : public FrozenEncoder {
 public:
  TransformerEncoder(const EncoderParams& params, const EncoderConfig& config)
      : params_(params), config_(config) {}

  [[nodiscard]] std::size_t dim() const override { return config_.d_model; }
  [[nodiscard]] SequenceEncoding encode(std::span<const PieceId> ids) const override {
    return gazepred::encode(params_, config_, ids);
  }

 private:
  const EncoderParams& params_;
  EncoderConfig config_;
};

// 16 lowercase hex digits identifying a token sequence.
std::string context_hash(std::span<const PieceId> ids);

// Frozen lookup table of precomputed vectors.
//
// File format: a `dim <d>` header line, then `key<TAB>v1 v2 ... vd` lines
// where key is `piece:<id>` or `ctx:<hex-hash>:<position>`. A contextual key
// takes precedence over the piece key; unknown tokens encode to zeros.
class StaticEmbeddingProvider final : public FrozenEncoder {
 public:
  explicit StaticEmbeddingProvider(std::size_t dim);

  static StaticEmbeddingProvider parse(std::string_view text);
  static StaticEmbeddingProvider load(const std::filesystem::path& path);

  [[nodiscard]] std::size_t dim() const override { return dim_; }
  [[nodiscard]] SequenceEncoding encode(std::span<const PieceId> ids) const override;

  void set_piece(PieceId id, const RowVector& v);
  void set_context(std::string_view hash, std::size_t position, const RowVector& v);
  // Stores every row of an encoding under contextual keys for ids.
  void add_sequence(std::span<const PieceId> ids, const SequenceEncoding& encoding);

  [[nodiscard]] std::size_t size() const { return vectors_.size(); }
  [[nodiscard]] std::string to_text() const;
  void save(const std::filesystem::path& path) const;

 private:
  void set(std::string key, const RowVector& v);

  std::size_t dim_;
  std::unordered_map<std::string, RowVector> vectors_;
};

StaticEmbeddingProvider load_static_provider(const std::filesystem::path& path);

}  // namespace gazepred
