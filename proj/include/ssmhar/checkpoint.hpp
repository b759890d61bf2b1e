#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssmhar/tensor.hpp"

namespace ssmhar {

// Flat binary checkpoint:
//   magic "SSMH1", u32 version
//   per parameter: u32 name length, UTF-8 name, u32 rank, u64 dims,
//                  little-endian f32 payload
// Records run until end of file. Payloads are always stored as f32; f64
// models round on save and widen on load.
template <typename T>
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<T>*>>& params);

template <typename T>
std::vector<unsigned char> serialize_checkpoint(
    const std::vector<std::pair<std::string, Tensor<T>*>>& params);

// Loads by name; every registered parameter must be present with a matching
// shape, unknown names in the file are an error.
template <typename T>
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<T>*>>& params);

template <typename T>
void load_checkpoint_bytes(
    const std::vector<unsigned char>& bytes,
    const std::vector<std::pair<std::string, Tensor<T>*>>& params);

}  // namespace ssmhar
