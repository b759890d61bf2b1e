#include "ssmhar/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <stdexcept>

namespace ssmhar {

using nlohmann::json;

std::string to_string(ClassTokenMode m) {
  return m == ClassTokenMode::kEnd ? "end" : "none";
}
std::string to_string(ChannelMode m) {
  return m == ChannelMode::kIndependent ? "independent" : "fusion";
}
std::string to_string(ZohMode m) {
  return m == ZohMode::kSimplified ? "simplified" : "exact";
}

namespace {

// Collects every unknown key before failing, so a bad config reports all
// offenders in one round.
void check_keys(const json& j, const std::set<std::string>& known,
                const std::string& scope, std::vector<std::string>& bad) {
  for (const auto& [key, value] : j.items()) {
    if (known.find(key) == known.end()) {
      bad.push_back(scope.empty() ? key : scope + "." + key);
    }
  }
}

template <typename V>
void read(const json& j, const char* key, V& into) {
  if (j.contains(key)) into = j.at(key).get<V>();
}

ClassTokenMode parse_class_token(const std::string& s) {
  if (s == "end") return ClassTokenMode::kEnd;
  if (s == "none") return ClassTokenMode::kNone;
  throw std::invalid_argument("config: class_token must be 'end' or 'none', got '" +
                              s + "'");
}

ChannelMode parse_channel_mode(const std::string& s) {
  if (s == "independent") return ChannelMode::kIndependent;
  if (s == "fusion") return ChannelMode::kFusion;
  throw std::invalid_argument(
      "config: channel_mode must be 'independent' or 'fusion', got '" + s + "'");
}

ZohMode parse_zoh(const std::string& s) {
  if (s == "simplified") return ZohMode::kSimplified;
  if (s == "exact") return ZohMode::kExact;
  throw std::invalid_argument("config: zoh must be 'simplified' or 'exact', got '" +
                              s + "'");
}

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  throw std::invalid_argument("config: precision must be 'f32' or 'f64', got '" +
                              s + "'");
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }

  std::vector<std::string> bad;
  check_keys(j, {"model", "optim", "data", "seed", "threads", "out_dir",
                 "precision"},
             "", bad);

  RunConfig cfg;
  bool stride_given = false;
  bool expand_given = false;
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m,
               {"channels", "window", "patch_len", "patch_stride", "token_dim",
                "expand_dim", "state_dim", "layers", "classes", "conv_kernel",
                "bidirectional", "use_conv", "residual", "gate_silu",
                "class_token", "channel_mode", "zoh"},
               "model", bad);
    read(m, "channels", cfg.model.channels);
    read(m, "window", cfg.model.window);
    read(m, "patch_len", cfg.model.patch_len);
    if (m.contains("patch_stride")) {
      cfg.model.patch_stride = m["patch_stride"].get<std::size_t>();
      stride_given = true;
    }
    read(m, "token_dim", cfg.model.token_dim);
    if (m.contains("expand_dim")) {
      cfg.model.expand_dim = m["expand_dim"].get<std::size_t>();
      expand_given = true;
    }
    read(m, "state_dim", cfg.model.state_dim);
    read(m, "layers", cfg.model.layers);
    read(m, "classes", cfg.model.classes);
    read(m, "conv_kernel", cfg.model.conv_kernel);
    read(m, "bidirectional", cfg.model.bidirectional);
    read(m, "use_conv", cfg.model.use_conv);
    read(m, "residual", cfg.model.residual);
    read(m, "gate_silu", cfg.model.gate_silu);
    if (m.contains("class_token"))
      cfg.model.class_token = parse_class_token(m["class_token"].get<std::string>());
    if (m.contains("channel_mode"))
      cfg.model.channel_mode =
          parse_channel_mode(m["channel_mode"].get<std::string>());
    if (m.contains("zoh")) cfg.model.zoh = parse_zoh(m["zoh"].get<std::string>());
  }
  if (!stride_given) {
    cfg.model.patch_stride = std::max<std::size_t>(1, cfg.model.patch_len / 2);
  }
  if (!expand_given) cfg.model.expand_dim = 2 * cfg.model.token_dim;

  if (j.contains("optim")) {
    const json& o = j["optim"];
    check_keys(o,
               {"lr", "beta1", "beta2", "eps", "weight_decay", "batch_size",
                "epochs"},
               "optim", bad);
    read(o, "lr", cfg.train.optim.lr);
    read(o, "beta1", cfg.train.optim.beta1);
    read(o, "beta2", cfg.train.optim.beta2);
    read(o, "eps", cfg.train.optim.eps);
    read(o, "weight_decay", cfg.train.optim.weight_decay);
    read(o, "batch_size", cfg.train.batch_size);
    read(o, "epochs", cfg.train.epochs);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, {"dataset", "manifest", "input_dir"}, "data", bad);
    read(d, "dataset", cfg.dataset_path);
    read(d, "manifest", cfg.manifest_path);
    read(d, "input_dir", cfg.input_dir);
  }
  read(j, "seed", cfg.seed);
  read(j, "threads", cfg.threads);
  read(j, "out_dir", cfg.out_dir);
  if (j.contains("precision"))
    cfg.precision = parse_precision(j["precision"].get<std::string>());

  if (!bad.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : bad) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  cfg.model.validate();
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
  json j;
  j["model"] = {{"channels", model.channels},
                {"window", model.window},
                {"patch_len", model.patch_len},
                {"patch_stride", model.patch_stride},
                {"token_dim", model.token_dim},
                {"expand_dim", model.expand_dim},
                {"state_dim", model.state_dim},
                {"layers", model.layers},
                {"classes", model.classes},
                {"conv_kernel", model.conv_kernel},
                {"bidirectional", model.bidirectional},
                {"use_conv", model.use_conv},
                {"residual", model.residual},
                {"gate_silu", model.gate_silu},
                {"class_token", to_string(model.class_token)},
                {"channel_mode", to_string(model.channel_mode)},
                {"zoh", to_string(model.zoh)}};
  j["optim"] = {{"lr", train.optim.lr},
                {"beta1", train.optim.beta1},
                {"beta2", train.optim.beta2},
                {"eps", train.optim.eps},
                {"weight_decay", train.optim.weight_decay},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs}};
  j["data"] = {{"dataset", dataset_path},
               {"manifest", manifest_path},
               {"input_dir", input_dir}};
  j["seed"] = seed;
  j["threads"] = threads;
  j["out_dir"] = out_dir;
  j["precision"] = precision == Precision::kF32 ? "f32" : "f64";
  return j.dump(2) + "\n";
}

}  // namespace ssmhar
