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

#include "gazepred/encoder.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "gazepred/errors.hpp"
#include "gazepred/random.hpp"

namespace gazepred {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

void EncoderConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || max_seq_len == 0) {
    throw ConfigError("encoder: d_model, n_layers, n_heads and max_seq_len must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError(fmt::format("encoder: n_heads {} does not divide d_model {}", n_heads, d_model));
  }
  if (vocab_size < 8) throw ConfigError("encoder: vocab_size must be at least 8");
}

// ---------------------------------------------------------------------------
// Parameters

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  z.set_zero();
  return z;
}

void EncoderParams::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool EncoderParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

bool operator==(const EncoderParams& a, const EncoderParams& b) {
  std::vector<const Matrix*> ta, tb;
  a.for_each([&](const std::string&, const Matrix& m) { ta.push_back(&m); });
  b.for_each([&](const std::string&, const Matrix& m) { tb.push_back(&m); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->rows() != tb[i]->rows() || ta[i]->cols() != tb[i]->cols()) return false;
    if (*ta[i] != *tb[i]) return false;
  }
  return true;
}

EncoderParams init_params(const EncoderConfig& config) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto ff = 4 * d;
  Rng rng(mix64(config.seed));
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        m(i, j) = static_cast<double>(static_cast<float>(rng.uniform(-a, a)));
      }
    }
    return m;
  };
  auto ones = [](Eigen::Index n) { return Matrix::Ones(1, n).eval(); };
  auto zeros = [](Eigen::Index n) { return Matrix::Zero(1, n).eval(); };

  EncoderParams p;
  p.token_embedding = glorot(static_cast<Eigen::Index>(config.vocab_size), d);
  p.position_embedding = glorot(static_cast<Eigen::Index>(config.max_seq_len), d);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    LayerParams l;
    l.ln1_gain = ones(d);
    l.ln1_bias = zeros(d);
    l.query = glorot(d, d);
    l.key = glorot(d, d);
    l.value = glorot(d, d);
    l.output = glorot(d, d);
    l.ln2_gain = ones(d);
    l.ln2_bias = zeros(d);
    l.ff_in = glorot(d, ff);
    l.ff_in_bias = zeros(ff);
    l.ff_out = glorot(ff, d);
    l.ff_out_bias = zeros(d);
    p.layers.push_back(std::move(l));
  }
  p.final_gain = ones(d);
  p.final_bias = zeros(d);
  return p;
}

std::string params_digest(const EncoderParams& params) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  params.for_each([&](const std::string& name, const Matrix& m) {
    EVP_DigestUpdate(ctx, name.data(), name.size());
    const std::int64_t shape[2] = {m.rows(), m.cols()};
    EVP_DigestUpdate(ctx, shape, sizeof(shape));
    EVP_DigestUpdate(ctx, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  });
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void round_to_float32(EncoderParams& params) {
  params.for_each([](const std::string&, Matrix& m) {
    m = m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
  });
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                EncoderTape::LayerNormCache& cache, Matrix& out) {
  const Eigen::Index rows = x.rows();
  const auto d = static_cast<double>(x.cols());
  cache.normalized.resize(rows, x.cols());
  cache.rstd.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mu = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mu).eval();
    const double var = centered.square().sum() / d;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd(i) = rstd;
    cache.normalized.row(i) = centered * rstd;
  }
  out = (cache.normalized.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

// dx for one layer norm; accumulates gain/bias gradients.
Matrix layer_norm_backward(const Matrix& dy, const EncoderTape::LayerNormCache& cache,
                           const Matrix& gain, Matrix& dgain, Matrix& dbias) {
  const auto d = static_cast<double>(dy.cols());
  dgain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dxhat = dxhat.row(i).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(i).dot(cache.normalized.row(i)) / d;
    dx.row(i) = cache.rstd(i) * (dxhat.row(i).array() - mean_dxhat -
                                 cache.normalized.row(i).array() * mean_dxhat_xhat)
                                    .matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
  return cdf + x * pdf;
}

void check_ids(const EncoderParams& params, const EncoderConfig& config,
               std::span<const PieceId> ids) {
  if (ids.empty()) throw std::invalid_argument("encode: empty sequence");
  if (ids.size() > config.max_seq_len ||
      static_cast<Eigen::Index>(ids.size()) > params.position_embedding.rows()) {
    throw std::length_error(
        fmt::format("encode: sequence of {} tokens exceeds max_seq_len {}", ids.size(), config.max_seq_len));
  }
  for (PieceId id : ids) {
    if (id < 0 || id >= params.token_embedding.rows()) {
      throw std::out_of_range(fmt::format("encode: piece id {} outside the embedding table", id));
    }
  }
}

}  // namespace

void encode(const EncoderParams& params, const EncoderConfig& config,
            std::span<const PieceId> ids, EncoderTape& tape) {
  check_ids(params, config, ids);
  const auto len = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto heads = static_cast<Eigen::Index>(config.n_heads);
  const auto hd = d / heads;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

  tape.ids.assign(ids.begin(), ids.end());
  tape.layers.resize(params.layers.size());

  Matrix x(len, d);
  for (Eigen::Index i = 0; i < len; ++i) {
    x.row(i) = params.token_embedding.row(ids[static_cast<std::size_t>(i)]) + params.position_embedding.row(i);
  }

  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const LayerParams& lp = params.layers[li];
    EncoderTape::Layer& t = tape.layers[li];

    layer_norm(x, lp.ln1_gain, lp.ln1_bias, t.ln1, t.attn_in);
    t.q.noalias() = t.attn_in * lp.query;
    t.k.noalias() = t.attn_in * lp.key;
    t.v.noalias() = t.attn_in * lp.value;
    t.probs.resize(static_cast<std::size_t>(heads));
    t.context.resize(len, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix scores = (t.q.middleCols(h * hd, hd) * t.k.middleCols(h * hd, hd).transpose()) * inv_sqrt_hd;
      for (Eigen::Index i = 0; i < len; ++i) {
        const double mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp();
        scores.row(i) /= scores.row(i).sum();
      }
      t.context.middleCols(h * hd, hd).noalias() = scores * t.v.middleCols(h * hd, hd);
      t.probs[static_cast<std::size_t>(h)] = std::move(scores);
    }
    x.noalias() += t.context * lp.output;

    layer_norm(x, lp.ln2_gain, lp.ln2_bias, t.ln2, t.ff_in);
    t.ff_hidden.noalias() = t.ff_in * lp.ff_in;
    t.ff_hidden.rowwise() += lp.ff_in_bias.row(0);
    t.ff_act = t.ff_hidden.unaryExpr([](double v) { return gelu(v); });
    x.noalias() += t.ff_act * lp.ff_out;
    x.rowwise() += lp.ff_out_bias.row(0);
  }
  layer_norm(x, params.final_gain, params.final_bias, tape.final_ln, tape.output);
}

SequenceEncoding encode(const EncoderParams& params, const EncoderConfig& config,
                        std::span<const PieceId> ids) {
  EncoderTape tape;
  encode(params, config, ids, tape);
  return std::move(tape.output);
}

// ---------------------------------------------------------------------------
// Backward

void encode_backward(const EncoderParams& params, const EncoderConfig& config,
                     const EncoderTape& tape, const Matrix& upstream, EncoderParams& grads) {
  const auto len = static_cast<Eigen::Index>(tape.ids.size());
  const auto d = static_cast<Eigen::Index>(config.d_model);
  if (upstream.rows() != len || upstream.cols() != d || tape.output.rows() != len) {
    throw std::invalid_argument(fmt::format(
        "encode_backward: upstream gradient is {}x{}, expected {}x{}", upstream.rows(),
        upstream.cols(), len, d));
  }
  if (grads.layers.size() != params.layers.size() ||
      grads.token_embedding.rows() != params.token_embedding.rows()) {
    throw std::invalid_argument("encode_backward: gradient buffers do not match the parameters");
  }
  const auto heads = static_cast<Eigen::Index>(config.n_heads);
  const auto hd = d / heads;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

  Matrix dx = layer_norm_backward(upstream, tape.final_ln, params.final_gain, grads.final_gain,
                                  grads.final_bias);

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const LayerParams& lp = params.layers[li];
    LayerParams& g = grads.layers[li];
    const EncoderTape::Layer& t = tape.layers[li];

    // Feed-forward sublayer.
    g.ff_out.noalias() += t.ff_act.transpose() * dx;
    g.ff_out_bias.row(0) += dx.colwise().sum();
    Matrix dhidden = dx * lp.ff_out.transpose();
    dhidden.array() *= t.ff_hidden.unaryExpr([](double v) { return gelu_grad(v); }).array();
    g.ff_in.noalias() += t.ff_in.transpose() * dhidden;
    g.ff_in_bias.row(0) += dhidden.colwise().sum();
    Matrix dln2 = dhidden * lp.ff_in.transpose();
    dx += layer_norm_backward(dln2, t.ln2, lp.ln2_gain, g.ln2_gain, g.ln2_bias);

    // Attention sublayer.
    g.output.noalias() += t.context.transpose() * dx;
    const Matrix dcontext = dx * lp.output.transpose();
    Matrix dq(len, d), dk(len, d), dv(len, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix& probs = t.probs[static_cast<std::size_t>(h)];
      const auto dctx_h = dcontext.middleCols(h * hd, hd);
      const Matrix dprobs = dctx_h * t.v.middleCols(h * hd, hd).transpose();
      dv.middleCols(h * hd, hd).noalias() = probs.transpose() * dctx_h;
      Matrix dscores(len, len);
      for (Eigen::Index i = 0; i < len; ++i) {
        const double dot = dprobs.row(i).dot(probs.row(i));
        dscores.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot);
      }
      dscores *= inv_sqrt_hd;
      dq.middleCols(h * hd, hd).noalias() = dscores * t.k.middleCols(h * hd, hd);
      dk.middleCols(h * hd, hd).noalias() = dscores.transpose() * t.q.middleCols(h * hd, hd);
    }
    g.query.noalias() += t.attn_in.transpose() * dq;
    g.key.noalias() += t.attn_in.transpose() * dk;
    g.value.noalias() += t.attn_in.transpose() * dv;
    Matrix dln1 = dq * lp.query.transpose();
    dln1.noalias() += dk * lp.key.transpose();
    dln1.noalias() += dv * lp.value.transpose();
    dx += layer_norm_backward(dln1, t.ln1, lp.ln1_gain, g.ln1_gain, g.ln1_bias);
  }

  for (Eigen::Index i = 0; i < len; ++i) {
    grads.token_embedding.row(tape.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grads.position_embedding.row(i) += dx.row(i);
  }
}

EncoderParams encode_backward(const EncoderParams& params, const EncoderConfig& config,
                              std::span<const PieceId> ids, const Matrix& upstream) {
  EncoderTape tape;
  encode(params, config, ids, tape);
  EncoderParams grads = params.zeros_like();
  encode_backward(params, config, tape, upstream, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Static provider

std::string context_hash(std::span<const PieceId> ids) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (PieceId id : ids) {
    const auto u = static_cast<std::uint32_t>(id);
    const char bytes[4] = {static_cast<char>(u & 0xFF), static_cast<char>((u >> 8) & 0xFF),
                           static_cast<char>((u >> 16) & 0xFF), static_cast<char>((u >> 24) & 0xFF)};
    h = fnv1a64(std::string_view(bytes, 4), h);
  }
  return fmt::format("{:016x}", h);
}

StaticEmbeddingProvider::StaticEmbeddingProvider(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("static provider: dimension must be positive");
}

void StaticEmbeddingProvider::set(std::string key, const RowVector& v) {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw std::invalid_argument(
        fmt::format("static provider: vector of size {} for dimension {}", v.size(), dim_));
  }
  vectors_[std::move(key)] = v;
}

void StaticEmbeddingProvider::set_piece(PieceId id, const RowVector& v) {
  set(fmt::format("piece:{}", id), v);
}

void StaticEmbeddingProvider::set_context(std::string_view hash, std::size_t position,
                                          const RowVector& v) {
  set(fmt::format("ctx:{}:{}", hash, position), v);
}

void StaticEmbeddingProvider::add_sequence(std::span<const PieceId> ids,
                                           const SequenceEncoding& encoding) {
  if (static_cast<std::size_t>(encoding.rows()) != ids.size()) {
    throw std::invalid_argument("static provider: encoding rows do not match the sequence");
  }
  const std::string hash = context_hash(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) set_context(hash, i, encoding.row(static_cast<Eigen::Index>(i)));
}

SequenceEncoding StaticEmbeddingProvider::encode(std::span<const PieceId> ids) const {
  SequenceEncoding out = SequenceEncoding::Zero(static_cast<Eigen::Index>(ids.size()),
                                                static_cast<Eigen::Index>(dim_));
  const std::string hash = context_hash(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = vectors_.find(fmt::format("ctx:{}:{}", hash, i));
    if (it == vectors_.end()) it = vectors_.find(fmt::format("piece:{}", ids[i]));
    if (it != vectors_.end()) out.row(static_cast<Eigen::Index>(i)) = it->second;
  }
  return out;
}

std::string StaticEmbeddingProvider::to_text() const {
  // Sorted keys keep the file deterministic.
  std::map<std::string, const RowVector*> sorted;
  for (const auto& [k, v] : vectors_) sorted.emplace(k, &v);
  std::string out = fmt::format("dim {}\n", dim_);
  char buf[64];
  for (const auto& [k, v] : sorted) {
    out += k;
    out.push_back('\t');
    for (Eigen::Index j = 0; j < v->size(); ++j) {
      if (j > 0) out.push_back(' ');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), (*v)(j));
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  return out;
}

void StaticEmbeddingProvider::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << to_text();
}

namespace {

bool valid_key(std::string_view key) {
  auto all_digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (key.starts_with("piece:")) return all_digits(key.substr(6));
  if (key.starts_with("ctx:")) {
    std::string_view rest = key.substr(4);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) return false;
    const std::string_view hash = rest.substr(0, colon);
    if (hash.empty() || !std::all_of(hash.begin(), hash.end(), [](char c) {
          return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        })) {
      return false;
    }
    return all_digits(rest.substr(colon + 1));
  }
  return false;
}

}  // namespace

StaticEmbeddingProvider StaticEmbeddingProvider::parse(std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::optional<StaticEmbeddingProvider> provider;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.ends_with('\r')) line.remove_suffix(1);
    if (line.empty()) continue;
    if (!provider) {
      std::size_t dim = 0;
      if (!line.starts_with("dim ")) throw ParseError("static provider: missing 'dim <d>' header");
      const std::string_view num = line.substr(4);
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), dim);
      if (ec != std::errc() || ptr != num.data() + num.size() || dim == 0) {
        throw ParseError(fmt::format("static provider: bad header '{}'", line));
      }
      provider.emplace(dim);
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError(fmt::format("static provider line {}: missing tab separator", line_no));
    }
    const std::string_view key = line.substr(0, tab);
    if (!valid_key(key)) throw ParseError(fmt::format("static provider line {}: bad key '{}'", line_no, key));
    std::vector<double> values;
    std::string_view rest = line.substr(tab + 1);
    while (!rest.empty()) {
      const auto sp = rest.find(' ');
      const std::string_view tok = rest.substr(0, sp);
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError(fmt::format("static provider line {}: bad number '{}'", line_no, tok));
      }
      values.push_back(v);
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    if (values.size() != provider->dim()) {
      throw DataError(fmt::format("static provider line {}: {} values for dimension {}", line_no,
                                  values.size(), provider->dim()));
    }
    provider->set(std::string(key), Eigen::Map<const RowVector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  if (!provider) throw ParseError("static provider: empty file");
  return std::move(*provider);
}

StaticEmbeddingProvider StaticEmbeddingProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

StaticEmbeddingProvider load_static_provider(const std::filesystem::path& path) {
  return StaticEmbeddingProvider::load(path);
}

}  // namespace gazepred
