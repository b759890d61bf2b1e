#pragma once

#include <cstdint>
#include <string>

#include "ssmhar/model.hpp"
#include "ssmhar/optim.hpp"

namespace ssmhar {

struct TrainConfig {
  OptimConfig optim;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
};

enum class Precision { kF32, kF64 };

// Full experiment description. Every CLI flag has a config-file equivalent;
// flags override file values. Unknown keys are rejected, all at once.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string dataset_path;
  std::string manifest_path;
  std::string input_dir;
  std::uint64_t seed = 7;
  int threads = 1;
  std::string out_dir = "out";
  Precision precision = Precision::kF32;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
};

std::string to_string(ClassTokenMode m);
std::string to_string(ChannelMode m);
std::string to_string(ZohMode m);

}  // namespace ssmhar
