#include "ssmhar/model.hpp"

#include <stdexcept>

namespace ssmhar {

void ModelConfig::validate() const {
  std::vector<std::string> bad;
  if (channels < 1) bad.push_back("channels must be >= 1");
  if (window < 2) bad.push_back("window must be >= 2");
  if (patch_len == 0 || patch_len > window)
    bad.push_back("patch_len must be in [1, window]");
  if (patch_stride < 1) bad.push_back("patch_stride must be >= 1");
  if (token_dim < 1) bad.push_back("token_dim must be >= 1");
  if (expand_dim < 1) bad.push_back("expand_dim must be >= 1");
  if (state_dim < 1) bad.push_back("state_dim must be >= 1");
  if (layers < 1) bad.push_back("layers must be >= 1");
  if (classes < 2) bad.push_back("classes must be >= 2");
  if (conv_kernel < 1) bad.push_back("conv_kernel must be >= 1");
  if (!bad.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw std::invalid_argument(msg);
  }
}

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;

  m.revin_gamma = Tensor<T>::full({cfg.channels}, T(1));
  m.revin_beta = Tensor<T>({cfg.channels});

  auto narrow_normal = [&](Shape shape, const std::string& name) {
    RngStream rng = stream_for(seed, name);
    Tensor<T> t(std::move(shape));
    fill_normal(t, rng, 0.02);
    return t;
  };

  m.embed_w = narrow_normal({cfg.patch_input_dim(), cfg.token_dim}, "embed.w");
  m.embed_b = Tensor<T>({cfg.token_dim});
  m.class_token = Tensor<T>({1, cfg.token_dim});  // all-zero start
  m.pos_embed = narrow_normal({cfg.token_count(), cfg.token_dim}, "pos_embed");

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    m.blocks.push_back(init_block_params<T>(cfg.token_dim, cfg.expand_dim,
                                            cfg.state_dim, cfg.conv_kernel,
                                            seed,
                                            "blocks." + std::to_string(l)));
  }

  m.head_norm_scale = Tensor<T>::full({cfg.token_dim}, T(1));
  m.head_norm_offset = Tensor<T>({cfg.token_dim});
  m.head_w = narrow_normal({cfg.token_dim, cfg.classes}, "head.w");
  m.head_b = Tensor<T>({cfg.classes});

  for (auto& [name, t] : m.parameters()) t->set_requires_grad(true);
  return m;
}

template <typename T>
Tensor<T> Model<T>::embed_tokens(const Tensor<T>& x_norm) const {
  const bool channel_major = cfg.channel_mode == ChannelMode::kIndependent;
  Tensor<T> patches =
      ops::patchify(x_norm, cfg.patch_len, cfg.patch_stride, channel_major);
  Tensor<T> tokens = ops::add(ops::matmul(patches, embed_w), embed_b);
  if (cfg.class_token == ClassTokenMode::kEnd) {
    const std::size_t bsz = tokens.dim(0);
    // replicate the learned class token across the batch; grads sum back
    // through the matmul with the constant ones column
    Tensor<T> ones = Tensor<T>::full({bsz, 1}, T(1));
    Tensor<T> cls =
        ops::reshape(ops::matmul(ones, class_token), {bsz, 1, cfg.token_dim});
    tokens = ops::concat(tokens, cls, 1);
  }
  if (tokens.dim(1) != pos_embed.dim(0)) {
    throw std::invalid_argument(
        "embed_tokens: " + std::to_string(tokens.dim(1)) +
        " tokens but position table has " + std::to_string(pos_embed.dim(0)) +
        " rows");
  }
  return ops::add(tokens, pos_embed);
}

template <typename T>
Tensor<T> Model<T>::classify(const Tensor<T>& tokens_final) const {
  Tensor<T> feat;
  if (cfg.class_token == ClassTokenMode::kEnd) {
    Tensor<T> last = ops::slice(tokens_final, 1, tokens_final.dim(1) - 1, 1);
    feat = ops::reshape(last, {tokens_final.dim(0), cfg.token_dim});
  } else {
    feat = ops::mean_axis(tokens_final, 1);  // mean pool over tokens
  }
  Tensor<T> normed = ops::layer_norm(feat, head_norm_scale, head_norm_offset);
  return ops::add(ops::matmul(normed, head_w), head_b);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x) const {
  const Shape& sx = x.shape();
  if (sx.size() != 3 || sx[1] != cfg.channels || sx[2] != cfg.window) {
    throw std::invalid_argument(
        "model forward: expected (B," + std::to_string(cfg.channels) + "," +
        std::to_string(cfg.window) + "), got " + shape_str(sx));
  }
  Tensor<T> x_norm = ops::revin_norm(x, revin_gamma, revin_beta);
  Tensor<T> tokens = embed_tokens(x_norm);
  const BlockFlags flags = cfg.block_flags();
  for (const auto& blk : blocks) tokens = block_forward(tokens, blk, flags);
  return classify(tokens);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Model<T>::parameters() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  out.emplace_back("revin.gamma", &revin_gamma);
  out.emplace_back("revin.beta", &revin_beta);
  out.emplace_back("embed.w", &embed_w);
  out.emplace_back("embed.b", &embed_b);
  if (cfg.class_token == ClassTokenMode::kEnd) {
    out.emplace_back("class_token", &class_token);
  }
  out.emplace_back("pos_embed", &pos_embed);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    register_block_params(blocks[l], "blocks." + std::to_string(l), out);
  }
  out.emplace_back("head.norm_scale", &head_norm_scale);
  out.emplace_back("head.norm_offset", &head_norm_offset);
  out.emplace_back("head.w", &head_w);
  out.emplace_back("head.b", &head_b);
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : const_cast<Model<T>*>(this)->parameters()) {
    n += t->numel();
  }
  return n;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& [name, t] : parameters()) t->zero_grad();
}

template <typename T>
std::vector<int> predict_labels(const Tensor<T>& logits) {
  const std::size_t bsz = logits.dim(0), ncls = logits.dim(1);
  std::vector<int> out(bsz);
  for (std::size_t i = 0; i < bsz; ++i) {
    const T* row = logits.data() + i * ncls;
    std::size_t best = 0;
    for (std::size_t c = 1; c < ncls; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

template struct Model<float>;
template struct Model<double>;
template std::vector<int> predict_labels(const Tensor<float>&);
template std::vector<int> predict_labels(const Tensor<double>&);

}  // namespace ssmhar
