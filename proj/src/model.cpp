// Copyright 2026 The moeprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "moeprobe/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "moeprobe/errors.hpp"

namespace moeprobe {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view value, std::size_t line_no) {
  std::uint64_t out = 0;
  if (value.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty value for " + std::string(key));
  for (char c : value) {
    if (c < '0' || c > '9') {
      throw ValidationError("config line " + std::to_string(line_no) + ": '" + std::string(value) +
                            "' is not a nonnegative integer for " + std::string(key));
    }
    const std::uint64_t digit = static_cast<std::uint64_t>(c - '0');
    if (out > (UINT64_MAX - digit) / 10) {
      throw ValidationError("config line " + std::to_string(line_no) + ": value overflows for " + std::string(key));
    }
    out = out * 10 + digit;
  }
  return out;
}

Tensor random_matrix(std::mt19937_64& rng, std::normal_distribution<double>& dist, std::size_t rows,
                     std::size_t cols) {
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = dist(rng);
  return Tensor({rows, cols}, std::move(data));
}

void require_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected " + shape_string(expected) + ", got " + shape_string(t.shape()));
  }
}

std::vector<std::uint8_t> layer_block_mask(const SuppressionMask& mask, std::size_t layer, std::size_t tokens,
                                           std::size_t num_experts, std::size_t suppress_from) {
  const auto experts = mask.experts_in_layer(layer);
  if (experts.empty() || suppress_from >= tokens) return {};
  std::vector<std::uint8_t> blocked(tokens * num_experts, 0);
  for (std::size_t t = suppress_from; t < tokens; ++t)
    for (auto e : experts) blocked[t * num_experts + e] = 1;
  return blocked;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_layers < 1) throw ValidationError("num_layers must be >= 1");
  if (num_experts < 1) throw ValidationError("num_experts must be >= 1");
  if (top_k < 1 || top_k > num_experts) {
    throw ValidationError("top_k must satisfy 1 <= top_k <= num_experts (got " + std::to_string(top_k) + ")");
  }
  if (model_dim < 1 || hidden_dim < 1 || vocab_size < 1) throw ValidationError("model dimensions must be >= 1");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw ValidationError("init_scale must be positive");
}

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig cfg;
  const std::map<std::string_view, std::size_t ModelConfig::*> size_keys = {
      {"num_layers", &ModelConfig::num_layers}, {"num_experts", &ModelConfig::num_experts},
      {"top_k", &ModelConfig::top_k},           {"model_dim", &ModelConfig::model_dim},
      {"hidden_dim", &ModelConfig::hidden_dim}, {"vocab_size", &ModelConfig::vocab_size},
  };
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!seen.emplace(key).second) {
      throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key " + std::string(key));
    }
    if (key == "seed") {
      cfg.seed = parse_unsigned(key, value, line_no);
    } else if (auto it = size_keys.find(key); it != size_keys.end()) {
      cfg.*(it->second) = static_cast<std::size_t>(parse_unsigned(key, value, line_no));
    } else {
      throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read model config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_config(ss.str());
}

std::string format_model_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "num_layers = " << c.num_layers << "\n"
      << "num_experts = " << c.num_experts << "\n"
      << "top_k = " << c.top_k << "\n"
      << "model_dim = " << c.model_dim << "\n"
      << "hidden_dim = " << c.hidden_dim << "\n"
      << "vocab_size = " << c.vocab_size << "\n"
      << "seed = " << c.seed << "\n";
  return out.str();
}

SuppressionMask::SuppressionMask(std::initializer_list<LayerExpert> pairs) {
  for (const auto& p : pairs) add(p);
}

void SuppressionMask::add(LayerExpert pair) {
  if (!pairs_.insert(pair).second) {
    throw std::invalid_argument("duplicate suppression pair (" + std::to_string(pair.layer) + ", " +
                                std::to_string(pair.expert) + ")");
  }
}

std::vector<std::size_t> SuppressionMask::experts_in_layer(std::size_t layer) const {
  std::vector<std::size_t> out;
  for (auto it = pairs_.lower_bound({layer, 0}); it != pairs_.end() && it->layer == layer; ++it) {
    out.push_back(it->expert);
  }
  return out;
}

void SuppressionMask::validate(const ModelConfig& config) const {
  std::map<std::size_t, std::size_t> per_layer;
  for (const auto& p : pairs_) {
    if (p.layer >= config.num_layers || p.expert >= config.num_experts) {
      throw ValidationError("suppression pair (" + std::to_string(p.layer) + ", " + std::to_string(p.expert) +
                            ") outside " + std::to_string(config.num_layers) + "x" +
                            std::to_string(config.num_experts));
    }
    ++per_layer[p.layer];
  }
  for (const auto& [layer, count] : per_layer) {
    if (count > config.num_experts - config.top_k) {
      throw ValidationError("layer " + std::to_string(layer) + ": suppressing " + std::to_string(count) +
                            " experts leaves fewer than top_k=" + std::to_string(config.top_k));
    }
  }
}

ModelWeights ModelWeights::initialize(const ModelConfig& c) {
  c.validate();
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> dist(0.0, c.init_scale);
  ModelWeights w;
  w.embedding = random_matrix(rng, dist, c.vocab_size, c.model_dim);
  w.blocks.reserve(c.num_layers);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    BlockParams b;
    b.attention.wq = random_matrix(rng, dist, c.model_dim, c.model_dim);
    b.attention.wk = random_matrix(rng, dist, c.model_dim, c.model_dim);
    b.attention.wv = random_matrix(rng, dist, c.model_dim, c.model_dim);
    b.attention.wo = random_matrix(rng, dist, c.model_dim, c.model_dim);
    b.moe.router = random_matrix(rng, dist, c.model_dim, c.num_experts);
    for (std::size_t e = 0; e < c.num_experts; ++e) {
      ExpertParams ex;
      ex.gate_proj = random_matrix(rng, dist, c.model_dim, c.hidden_dim);
      ex.up_proj = random_matrix(rng, dist, c.model_dim, c.hidden_dim);
      ex.down_proj = random_matrix(rng, dist, c.hidden_dim, c.model_dim);
      b.moe.experts.push_back(std::move(ex));
    }
    w.blocks.push_back(std::move(b));
  }
  return w;
}

void ModelWeights::validate(const ModelConfig& c) const {
  const auto d = c.model_dim, h = c.hidden_dim;
  require_shape(embedding, {c.vocab_size, d}, "embedding");
  if (blocks.size() != c.num_layers) throw ShapeError("expected " + std::to_string(c.num_layers) + " blocks");
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const auto tag = "layer " + std::to_string(l);
    for (const Tensor* t : {&b.attention.wq, &b.attention.wk, &b.attention.wv, &b.attention.wo}) {
      require_shape(*t, {d, d}, tag + " attention");
    }
    require_shape(b.moe.router, {d, c.num_experts}, tag + " router");
    if (b.moe.experts.size() != c.num_experts) throw ShapeError(tag + ": wrong expert count");
    for (const auto& ex : b.moe.experts) {
      require_shape(ex.gate_proj, {d, h}, tag + " expert gate");
      require_shape(ex.up_proj, {d, h}, tag + " expert up");
      require_shape(ex.down_proj, {h, d}, tag + " expert down");
    }
  }
}

std::string router_param_id(std::size_t layer) { return "layers." + std::to_string(layer) + ".router"; }

RouteDecision route_top_k(std::span<const double> gate_logits, std::size_t top_k,
                          const std::set<std::size_t>& masked) {
  for (double v : gate_logits) {
    if (!std::isfinite(v)) throw NumericError("route_top_k: non-finite gate logit");
  }
  if (top_k == 0) throw std::invalid_argument("route_top_k: top_k must be >= 1");
  std::vector<std::uint8_t> blocked(gate_logits.size(), 0);
  for (auto e : masked) {
    if (e >= gate_logits.size()) throw std::out_of_range("route_top_k: masked expert out of range");
    blocked[e] = 1;
  }
  RouteDecision out;
  out.experts = select_top_k(gate_logits, top_k, blocked);
  const double mx = gate_logits[out.experts.front()];
  double z = 0.0;
  for (auto e : out.experts) {
    out.weights.push_back(std::exp(gate_logits[e] - mx));
    z += out.weights.back();
  }
  for (auto& w : out.weights) w /= z;
  return out;
}

MoeLayerVars register_moe_layer(Tape& tape, const MoeLayerParams& params, const std::string& prefix) {
  MoeLayerVars v;
  v.router = tape.parameter(prefix + ".router", params.router);
  for (std::size_t e = 0; e < params.experts.size(); ++e) {
    const auto ep = prefix + ".expert" + std::to_string(e);
    v.gate_proj.push_back(tape.parameter(ep + ".gate", params.experts[e].gate_proj));
    v.up_proj.push_back(tape.parameter(ep + ".up", params.experts[e].up_proj));
    v.down_proj.push_back(tape.parameter(ep + ".down", params.experts[e].down_proj));
  }
  return v;
}

Var moe_layer_forward(const Var& x, const MoeLayerVars& params, std::size_t top_k,
                      std::span<const std::uint8_t> blocked, std::vector<RouteDecision>* decisions) {
  const std::size_t tokens = x.value().rows();
  const std::size_t num_experts = params.router.value().cols();

  const Var gate_logits = ad::matmul(x, params.router);
  const Var kept = ad::top_k_mask(gate_logits, top_k, blocked);
  const Var weights = ad::softmax(kept);

  const Tensor& logit_values = gate_logits.value();
  const Tensor& weight_values = weights.value();
  std::vector<std::vector<std::size_t>> routed(num_experts);
  for (std::size_t t = 0; t < tokens; ++t) {
    const auto row_blocked = blocked.empty() ? blocked : blocked.subspan(t * num_experts, num_experts);
    RouteDecision d;
    d.experts = select_top_k(logit_values.row(t), top_k, row_blocked);
    for (auto e : d.experts) {
      d.weights.push_back(weight_values.at(t, e));
      routed[e].push_back(t);
    }
    if (decisions) decisions->push_back(std::move(d));
  }
  // routed[e] is ascending in t, so each expert sees its tokens in order.

  Var y;
  for (std::size_t e = 0; e < num_experts; ++e) {
    const auto& rows = routed[e];
    if (rows.empty()) continue;
    const Var xe = ad::gather_rows(x, rows);
    const Var act = ad::multiply(ad::silu(ad::matmul(xe, params.gate_proj[e])), ad::matmul(xe, params.up_proj[e]));
    const Var out = ad::matmul(act, params.down_proj[e]);
    const Var w = ad::gather_rows(ad::column(weights, e), rows);
    const Var contribution = ad::scatter_rows(ad::scale_rows(out, w), rows, tokens);
    y = y.valid() ? ad::add(y, contribution) : contribution;
  }
  return y;
}

Tensor moe_layer_forward(const Tensor& x, const MoeLayerParams& params, std::size_t top_k,
                         const std::set<std::size_t>& masked) {
  const bool single = x.rank() == 1;
  const Tensor input = single ? Tensor({1, x.size()}, std::vector<double>(x.data().begin(), x.data().end())) : x;
  const std::size_t tokens = input.rows();
  const std::size_t num_experts = params.router.cols();
  std::vector<std::uint8_t> blocked;
  if (!masked.empty()) {
    blocked.assign(tokens * num_experts, 0);
    for (auto e : masked) {
      if (e >= num_experts) throw std::out_of_range("moe_layer_forward: masked expert out of range");
      for (std::size_t t = 0; t < tokens; ++t) blocked[t * num_experts + e] = 1;
    }
  }
  Tape tape(Tape::Mode::kInference);
  const Var xv = tape.constant(input);
  const auto vars = register_moe_layer(tape, params, "moe");
  const Var y = moe_layer_forward(xv, vars, top_k, blocked, nullptr);
  const Tensor& out = y.value();
  if (single) return Tensor::vector(std::vector<double>(out.data().begin(), out.data().end()));
  return out;
}

MoeModel::MoeModel(ModelConfig config) : MoeModel(config, ModelWeights::initialize(config)) {}

MoeModel::MoeModel(ModelConfig config, ModelWeights weights)
    : config_(std::move(config)), weights_(std::move(weights)) {
  config_.validate();
  weights_.validate(config_);
}

void MoeModel::check_tokens(std::span<const TokenId> tokens) const {
  if (tokens.empty()) throw std::invalid_argument("empty token sequence");
  for (auto t : tokens) {
    if (t >= config_.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(t) + " >= vocab_size " + std::to_string(config_.vocab_size));
    }
  }
}

MoeModel::TapeForward MoeModel::forward(Tape& tape, std::span<const TokenId> tokens, const SuppressionMask& mask,
                                        std::size_t suppress_from, bool with_loss) const {
  check_tokens(tokens);
  mask.validate(config_);
  const std::size_t T = tokens.size();
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(config_.model_dim));

  TapeForward out;
  out.routing.resize(config_.num_layers);

  const Var embed = tape.parameter("embedding", weights_.embedding);
  Var h = ad::embedding(embed, tokens);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const auto& block = weights_.blocks[l];
    const auto prefix = "layers." + std::to_string(l);
    const Var wq = tape.parameter(prefix + ".attn.wq", block.attention.wq);
    const Var wk = tape.parameter(prefix + ".attn.wk", block.attention.wk);
    const Var wv = tape.parameter(prefix + ".attn.wv", block.attention.wv);
    const Var wo = tape.parameter(prefix + ".attn.wo", block.attention.wo);

    const Var a_in = ad::rms_normalize(h);
    const Var q = ad::matmul(a_in, wq);
    const Var k = ad::matmul(a_in, wk);
    const Var v = ad::matmul(a_in, wv);
    const Var scores = ad::causal_mask(ad::scale(ad::matmul(q, ad::transpose(k)), attn_scale));
    const Var attended = ad::matmul(ad::softmax(scores), v);
    h = ad::add(h, ad::matmul(attended, wo));

    const auto moe_vars = register_moe_layer(tape, block.moe, prefix);
    const auto blocked = layer_block_mask(mask, l, T, config_.num_experts, suppress_from);
    const Var m_in = ad::rms_normalize(h);
    h = ad::add(h, moe_layer_forward(m_in, moe_vars, config_.top_k, blocked, &out.routing[l]));
  }
  out.logits = ad::matmul(ad::rms_normalize(h), ad::transpose(embed));

  if (with_loss && T >= 2) {
    std::vector<std::size_t> rows(T - 1);
    for (std::size_t i = 0; i + 1 < T; ++i) rows[i] = i;
    out.loss = ad::cross_entropy(ad::gather_rows(out.logits, rows), tokens.subspan(1));
  }
  return out;
}

LmOutput MoeModel::forward_lm(std::span<const TokenId> tokens, const SuppressionMask& mask) const {
  if (tokens.size() < 2) throw std::invalid_argument("forward_lm: sequence needs at least 2 tokens");
  Tape tape(Tape::Mode::kInference);
  auto fwd = forward(tape, tokens, mask);
  return LmOutput{fwd.logits.value(), fwd.loss.value().item(), std::move(fwd.routing)};
}

RoutingTrace MoeModel::route(std::span<const TokenId> tokens, const SuppressionMask& mask,
                             std::size_t suppress_from) const {
  Tape tape(Tape::Mode::kInference);
  return forward(tape, tokens, mask, suppress_from, false).routing;
}

std::vector<TokenId> MoeModel::generate_greedy(std::span<const TokenId> prompt, std::size_t max_new,
                                               const SuppressionMask& mask, SuppressionScope scope) const {
  check_tokens(prompt);
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  const std::size_t suppress_from = scope == SuppressionScope::kWholeRun ? 0 : prompt.size();
  for (std::size_t step = 0; step < max_new; ++step) {
    Tape tape(Tape::Mode::kInference);
    const auto fwd = forward(tape, seq, mask, suppress_from, false);
    const auto last = fwd.logits.value().row(seq.size() - 1);
    const auto best = std::max_element(last.begin(), last.end());  // first maximum
    seq.push_back(static_cast<TokenId>(best - last.begin()));
  }
  return seq;
}

std::vector<TokenId> encode_text(std::string_view text, std::size_t vocab_size) {
  if (vocab_size == 0) throw std::invalid_argument("vocab_size must be >= 1");
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c) % vocab_size);
  return out;
}

std::string decode_tokens(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (auto t : tokens) out.push_back(static_cast<char>(t & 0xFF));
  return out;
}

}  // namespace moeprobe
