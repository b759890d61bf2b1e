#include "ssmhar/dataset_io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace ssmhar {

namespace {

using nlohmann::json;

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& os, const float* p, std::size_t n) {
  // x86/arm little-endian hosts write the payload directly
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

constexpr char kMagic[5] = {'H', 'A', 'R', 'W', '1'};

}  // namespace

void save_windowed_dataset(const WindowedDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagic, 5);
  write_u64(os, ds.windows.size());
  write_u64(os, ds.channel_count());
  write_u64(os, ds.window_len);
  write_u64(os, static_cast<std::uint64_t>(ds.n_classes));
  for (const auto& w : ds.windows) {
    write_f32(os, w.data.data(), w.data.size());
    const std::uint16_t lb = static_cast<std::uint16_t>(w.label);
    unsigned char buf[2] = {static_cast<unsigned char>(lb & 0xff),
                            static_cast<unsigned char>(lb >> 8)};
    os.write(reinterpret_cast<const char*>(buf), 2);
  }
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
  os.close();

  json side;
  side["name"] = ds.name;
  side["n_classes"] = ds.n_classes;
  side["rate_hz"] = ds.rate_hz;
  side["window"] = ds.window_len;
  side["channels"] = ds.channels;
  side["split"] = {{"train", ds.split.train},
                   {"val", ds.split.val},
                   {"test", ds.split.test}};
  side["mu"] = ds.stats.mu;
  side["sigma"] = ds.stats.sigma;
  json spans = json::array();
  for (const auto& w : ds.windows) {
    spans.push_back({w.recording_id, w.start});
  }
  side["spans"] = spans;
  std::ofstream js(path + ".json");
  if (!js) throw std::runtime_error("cannot open '" + path + ".json' for writing");
  js << side.dump(2) << "\n";
}

WindowedDataset load_windowed_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset file '" + path + "'");
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0) {
    throw std::runtime_error("'" + path + "' is not a windowed dataset file");
  }
  WindowedDataset ds;
  const std::uint64_t n_windows = read_u64(is);
  const std::uint64_t channels = read_u64(is);
  ds.window_len = read_u64(is);
  ds.n_classes = static_cast<int>(read_u64(is));
  ds.windows.resize(n_windows);
  for (auto& w : ds.windows) {
    w.channels = channels;
    w.length = ds.window_len;
    w.data.resize(channels * ds.window_len);
    is.read(reinterpret_cast<char*>(w.data.data()),
            static_cast<std::streamsize>(w.data.size() * 4));
    unsigned char buf[2];
    is.read(reinterpret_cast<char*>(buf), 2);
    w.label = buf[0] | (buf[1] << 8);
  }
  if (!is) throw std::runtime_error("truncated dataset file '" + path + "'");

  const std::string side_path = path + ".json";
  if (std::filesystem::exists(side_path)) {
    std::ifstream js(side_path);
    json side = json::parse(js);
    ds.name = side.value("name", "");
    ds.rate_hz = side.value("rate_hz", 0.0);
    ds.channels = side.value("channels", std::vector<std::string>{});
    if (side.contains("split")) {
      ds.split.train = side["split"].value("train", 0u);
      ds.split.val = side["split"].value("val", 0u);
      ds.split.test = side["split"].value("test", 0u);
    }
    ds.stats.mu = side.value("mu", std::vector<double>{});
    ds.stats.sigma = side.value("sigma", std::vector<double>{});
    if (side.contains("spans")) {
      const auto& spans = side["spans"];
      for (std::size_t i = 0; i < ds.windows.size() && i < spans.size(); ++i) {
        ds.windows[i].recording_id = spans[i][0].get<std::string>();
        ds.windows[i].start = spans[i][1].get<std::size_t>();
      }
    }
  }
  if (ds.channels.empty()) {
    for (std::uint64_t c = 0; c < channels; ++c) {
      ds.channels.push_back("ch" + std::to_string(c));
    }
  }
  if (ds.split.train + ds.split.val + ds.split.test != ds.windows.size()) {
    ds.split = SplitSizes{ds.windows.size(), 0, 0};
  }
  return ds;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest '" + path + "': " + e.what());
  }
  DatasetManifest m;
  for (const char* key : {"name", "n_classes", "rate_hz", "window", "channels"}) {
    if (!j.contains(key)) {
      throw std::runtime_error("manifest '" + path + "' is missing key '" +
                               key + "'");
    }
  }
  m.name = j["name"].get<std::string>();
  m.n_classes = j["n_classes"].get<int>();
  m.rate_hz = j["rate_hz"].get<double>();
  m.window = j["window"].get<std::size_t>();
  m.channels = j["channels"].get<std::vector<std::string>>();
  if (m.n_classes < 2 || m.window < 2 || m.channels.empty()) {
    throw std::runtime_error("manifest '" + path + "' has invalid values");
  }
  return m;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

RawRecording ingest_csv(const std::string& path, const DatasetManifest& manifest) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open CSV '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("CSV '" + path + "' is empty");
  }
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 2 || header[0] != "timestamp" || header[1] != "label") {
    throw std::runtime_error("CSV '" + path +
                             "': header must start with timestamp,label");
  }
  // map manifest channels onto header columns
  std::vector<std::size_t> col_of(manifest.channels.size());
  for (std::size_t c = 0; c < manifest.channels.size(); ++c) {
    auto it = std::find(header.begin() + 2, header.end(), manifest.channels[c]);
    if (it == header.end()) {
      throw std::runtime_error("CSV '" + path + "': missing channel column '" +
                               manifest.channels[c] + "'");
    }
    col_of[c] = static_cast<std::size_t>(it - header.begin());
  }

  RawRecording rec;
  rec.id = std::filesystem::path(path).stem().string();
  rec.channels = manifest.channels;
  rec.rate_hz = manifest.rate_hz;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("CSV '" + path + "' line " +
                               std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    }
    const std::string lb = trim(cells[1]);
    int label = -1;
    if (!lb.empty()) {
      try {
        label = std::stoi(lb);
      } catch (...) {
        throw std::runtime_error("CSV '" + path + "' line " +
                                 std::to_string(lineno) +
                                 ": non-integer label '" + lb + "'");
      }
    }
    rec.labels.push_back(label);
    for (std::size_t c = 0; c < col_of.size(); ++c) {
      const std::string cell = trim(cells[col_of[c]]);
      float v;
      if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NAN") {
        v = std::nanf("");
      } else {
        try {
          std::size_t used = 0;
          v = std::stof(cell, &used);
          if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (...) {
          throw std::runtime_error("CSV '" + path + "' line " +
                                   std::to_string(lineno) +
                                   ": non-numeric cell '" + cell +
                                   "' in column '" + manifest.channels[c] + "'");
        }
      }
      rec.samples.push_back(v);
    }
    rec.length += 1;
  }
  return rec;
}

}  // namespace ssmhar
