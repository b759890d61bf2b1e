#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssmhar/block.hpp"
#include "ssmhar/tensor.hpp"

namespace ssmhar {

enum class ClassTokenMode { kEnd, kNone };
enum class ChannelMode { kIndependent, kFusion };

struct ModelConfig {
  std::size_t channels = 3;      // D_c sensor channels
  std::size_t window = 128;      // L samples per window
  std::size_t patch_len = 8;     // P
  std::size_t patch_stride = 4;  // defaults to P/2 when loaded from config
  std::size_t token_dim = 64;    // D
  std::size_t expand_dim = 128;  // E, defaults to 2D
  std::size_t state_dim = 16;    // S
  std::size_t layers = 12;
  std::size_t classes = 6;
  std::size_t conv_kernel = 4;
  bool bidirectional = true;
  bool use_conv = true;
  bool residual = true;
  bool gate_silu = true;
  ClassTokenMode class_token = ClassTokenMode::kEnd;
  ChannelMode channel_mode = ChannelMode::kIndependent;
  ZohMode zoh = ZohMode::kSimplified;

  std::size_t patches_per_channel() const {
    return (window - patch_len) / patch_stride + 1;
  }
  // number of patch tokens (class token excluded)
  std::size_t patch_tokens() const {
    return channel_mode == ChannelMode::kIndependent
               ? channels * patches_per_channel()
               : patches_per_channel();
  }
  std::size_t token_count() const {
    return patch_tokens() + (class_token == ClassTokenMode::kEnd ? 1 : 0);
  }
  std::size_t patch_input_dim() const {
    return channel_mode == ChannelMode::kIndependent ? patch_len
                                                     : patch_len * channels;
  }
  BlockFlags block_flags() const {
    return BlockFlags{bidirectional, use_conv, residual, gate_silu, zoh};
  }
  // throws listing every violated constraint at once
  void validate() const;
};

// Full classifier: RevIN -> channel-independent patching -> shared linear
// patch embedding -> class token at the end -> learned position embeddings
// -> block stack -> norm + linear head. Softmax lives in the loss / at
// prediction time; forward returns raw logits.
template <typename T>
struct Model {
  ModelConfig cfg;
  Tensor<T> revin_gamma, revin_beta;          // (D_c)
  Tensor<T> embed_w, embed_b;                 // (P or P*D_c, D), (D)
  Tensor<T> class_token;                      // (1, D), zeros at init
  Tensor<T> pos_embed;                        // (token_count, D)
  std::vector<BlockParams<T>> blocks;
  Tensor<T> head_norm_scale, head_norm_offset;  // (D)
  Tensor<T> head_w, head_b;                   // (D, C), (C)

  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  Tensor<T> forward(const Tensor<T>& x) const;  // x: (B, D_c, L) -> (B, C)

  // Embedding stage only (exposed for tests): patch tokens + class token +
  // position embeddings, shape (B, token_count, D).
  Tensor<T> embed_tokens(const Tensor<T>& x_norm) const;

  // Final norm + head on the class token (or mean pool when disabled).
  Tensor<T> classify(const Tensor<T>& tokens_final) const;

  std::vector<std::pair<std::string, Tensor<T>*>> parameters();
  std::size_t parameter_count() const;
  void zero_grad();
};

template <typename T>
std::vector<int> predict_labels(const Tensor<T>& logits);

extern template struct Model<float>;
extern template struct Model<double>;

}  // namespace ssmhar
