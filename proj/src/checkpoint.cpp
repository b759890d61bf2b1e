#include "ssmhar/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace ssmhar {

namespace {

constexpr char kMagic[5] = {'S', 'S', 'M', 'H', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(std::size_t n) {
    if (static_cast<std::size_t>(end - p) < n) {
      throw std::runtime_error("checkpoint '" + path + "' is truncated");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

template <typename T>
std::vector<unsigned char> serialize_checkpoint(
    const std::vector<std::pair<std::string, Tensor<T>*>>& params) {
  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + 5);
  put_u32(out, kVersion);
  for (const auto& [name, t] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) put_u64(out, d);
    for (std::size_t i = 0; i < t->numel(); ++i) {
      put_f32(out, static_cast<float>(t->data()[i]));
    }
  }
  return out;
}

template <typename T>
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<T>*>>& params) {
  std::vector<unsigned char> bytes = serialize_checkpoint(params);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

template <typename T>
void load_checkpoint_bytes_impl(
    const std::vector<unsigned char>& bytes,
    const std::vector<std::pair<std::string, Tensor<T>*>>& params,
    const std::string& path) {
  if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 5) != 0) {
    throw std::runtime_error("'" + path + "' is not a checkpoint file");
  }
  Reader r{bytes.data() + 5, bytes.data() + bytes.size(), path};
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint '" + path +
                             "': unsupported version " + std::to_string(version));
  }

  std::map<std::string, Tensor<T>*> by_name;
  for (const auto& [name, t] : params) by_name[name] = t;
  std::size_t loaded = 0;
  while (r.p != r.end) {
    const std::uint32_t name_len = r.u32();
    r.need(name_len);
    std::string name(reinterpret_cast<const char*>(r.p), name_len);
    r.p += name_len;
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<std::size_t>(r.u64());
      numel *= shape[i];
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint '" + path +
                               "' contains unknown parameter '" + name + "'");
    }
    Tensor<T>* t = it->second;
    if (t->shape() != shape) {
      throw std::runtime_error("checkpoint '" + path + "': parameter '" + name +
                               "' has shape " + shape_str(shape) +
                               ", model expects " + shape_str(t->shape()));
    }
    for (std::size_t i = 0; i < numel; ++i) {
      t->data()[i] = static_cast<T>(r.f32());
    }
    ++loaded;
  }
  if (loaded != params.size()) {
    throw std::runtime_error("checkpoint '" + path + "' holds " +
                             std::to_string(loaded) + " parameters, model has " +
                             std::to_string(params.size()));
  }
}

template <typename T>
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<T>*>>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  load_checkpoint_bytes_impl(bytes, params, path);
}

template <typename T>
void load_checkpoint_bytes(
    const std::vector<unsigned char>& bytes,
    const std::vector<std::pair<std::string, Tensor<T>*>>& params) {
  load_checkpoint_bytes_impl(bytes, params, "<memory>");
}

#define SSMHAR_INSTANTIATE_CKPT(T)                                        \
  template std::vector<unsigned char> serialize_checkpoint(               \
      const std::vector<std::pair<std::string, Tensor<T>*>>&);            \
  template void save_checkpoint(                                          \
      const std::string&,                                                 \
      const std::vector<std::pair<std::string, Tensor<T>*>>&);            \
  template void load_checkpoint(                                          \
      const std::string&,                                                 \
      const std::vector<std::pair<std::string, Tensor<T>*>>&);            \
  template void load_checkpoint_bytes(                                    \
      const std::vector<unsigned char>&,                                  \
      const std::vector<std::pair<std::string, Tensor<T>*>>&);

SSMHAR_INSTANTIATE_CKPT(float)
SSMHAR_INSTANTIATE_CKPT(double)

}  // namespace ssmhar
