#include "ssmhar/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ssmhar/rng.hpp"

namespace ssmhar {

RawRecording interpolate_missing(RawRecording rec) {
  const std::size_t ch = rec.channel_count();
  const std::size_t len = rec.length;
  for (std::size_t c = 0; c < ch; ++c) {
    // collect valid sample positions
    std::vector<std::size_t> valid;
    for (std::size_t t = 0; t < len; ++t) {
      if (!std::isnan(rec.at(t, c))) valid.push_back(t);
    }
    if (valid.empty()) {
      throw std::runtime_error("interpolate_missing: channel '" +
                               rec.channels[c] + "' of recording '" + rec.id +
                               "' has no valid samples");
    }
    // leading / trailing holds
    for (std::size_t t = 0; t < valid.front(); ++t)
      rec.at(t, c) = rec.at(valid.front(), c);
    for (std::size_t t = valid.back() + 1; t < len; ++t)
      rec.at(t, c) = rec.at(valid.back(), c);
    // linear fill between consecutive valid samples
    for (std::size_t i = 0; i + 1 < valid.size(); ++i) {
      const std::size_t a = valid[i], b = valid[i + 1];
      if (b == a + 1) continue;
      const float va = rec.at(a, c), vb = rec.at(b, c);
      for (std::size_t t = a + 1; t < b; ++t) {
        const float f = static_cast<float>(t - a) / static_cast<float>(b - a);
        rec.at(t, c) = va + f * (vb - va);
      }
    }
  }
  return rec;
}

ChannelStats compute_channel_stats(const std::vector<RawRecording>& recs,
                                   const std::vector<std::size_t>& limits) {
  if (recs.empty()) throw std::invalid_argument("compute_channel_stats: no recordings");
  const std::size_t ch = recs.front().channel_count();
  std::vector<double> sum(ch, 0.0), sumsq(ch, 0.0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const std::size_t n = std::min(limits[r], recs[r].length);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        const double v = recs[r].at(t, c);
        sum[c] += v;
        sumsq[c] += v * v;
      }
    }
    count += n;
  }
  ChannelStats st;
  st.mu.resize(ch);
  st.sigma.resize(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    st.mu[c] = count ? sum[c] / count : 0.0;
    double var = count ? sumsq[c] / count - st.mu[c] * st.mu[c] : 1.0;
    st.sigma[c] = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  return st;
}

void standardize(RawRecording& rec, const ChannelStats& stats) {
  const std::size_t ch = rec.channel_count();
  for (std::size_t t = 0; t < rec.length; ++t) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double s = stats.sigma[c] == 0.0 ? 1.0 : stats.sigma[c];
      rec.at(t, c) = static_cast<float>((rec.at(t, c) - stats.mu[c]) / s);
    }
  }
}

void unstandardize(RawRecording& rec, const ChannelStats& stats) {
  const std::size_t ch = rec.channel_count();
  for (std::size_t t = 0; t < rec.length; ++t) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double s = stats.sigma[c] == 0.0 ? 1.0 : stats.sigma[c];
      rec.at(t, c) = static_cast<float>(rec.at(t, c) * s + stats.mu[c]);
    }
  }
}

namespace {

int majority_label(const RawRecording& rec, std::size_t start, std::size_t len) {
  // counts plus first-occurrence position for the tie break
  std::map<int, std::pair<std::size_t, std::size_t>> tally;  // label -> (count, first)
  for (std::size_t t = start; t < start + len; ++t) {
    const int lb = rec.labels[t];
    if (lb < 0) continue;
    auto it = tally.find(lb);
    if (it == tally.end()) {
      tally.emplace(lb, std::make_pair(std::size_t{1}, t));
    } else {
      it->second.first++;
    }
  }
  if (tally.empty()) return -1;
  int best = -1;
  std::size_t best_count = 0, best_first = 0;
  for (const auto& [lb, cf] : tally) {
    if (cf.first > best_count ||
        (cf.first == best_count && cf.second < best_first)) {
      best = lb;
      best_count = cf.first;
      best_first = cf.second;
    }
  }
  return best;
}

}  // namespace

std::vector<SensorWindow> window_slice(const RawRecording& rec, std::size_t len,
                                       double overlap) {
  std::vector<SensorWindow> out;
  if (rec.length < len || len == 0) return out;
  const std::size_t stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(len) * (1.0 - overlap)));
  const std::size_t count = (rec.length - len) / stride + 1;
  const std::size_t ch = rec.channel_count();
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    const int label = majority_label(rec, start, len);
    if (label < 0) continue;  // fully unlabeled stretch
    SensorWindow win;
    win.channels = ch;
    win.length = len;
    win.label = label;
    win.recording_id = rec.id;
    win.start = start;
    win.data.resize(ch * len);
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t t = 0; t < len; ++t) {
        win.data[c * len + t] = rec.at(start + t, c);
      }
    }
    out.push_back(std::move(win));
  }
  return out;
}

SplitSizes split_windows(const std::vector<SensorWindow>& windows) {
  const std::size_t n = windows.size();
  SplitSizes sp;
  sp.train = static_cast<std::size_t>(0.7 * static_cast<double>(n) + 1e-9);
  const std::size_t rest = n - sp.train;
  sp.val = rest / 3;  // 0.1 of the 0.3 remainder
  sp.test = rest - sp.val;
  // Windows overlap their neighbours, so the leading test windows may still
  // share raw samples with the end of train (always when val is empty,
  // or with overlap > 0.5). Those boundary windows are reassigned to the
  // earlier split (val) until train and test spans are disjoint.
  if (sp.train > 0) {
    const SensorWindow& last_train = windows[sp.train - 1];
    while (sp.test > 0) {
      const SensorWindow& first_test = windows[n - sp.test];
      const bool overlaps = first_test.recording_id == last_train.recording_id &&
                            first_test.start < last_train.end();
      if (!overlaps) break;
      sp.val += 1;
      sp.test -= 1;
    }
  }
  return sp;
}

bool audit_no_leakage(const std::vector<SensorWindow>& windows,
                      const SplitSizes& split) {
  for (std::size_t i = 0; i < split.train; ++i) {
    for (std::size_t j = windows.size() - split.test; j < windows.size(); ++j) {
      const auto& a = windows[i];
      const auto& b = windows[j];
      if (a.recording_id != b.recording_id) continue;
      if (a.start < b.end() && b.start < a.end()) return false;
    }
  }
  return true;
}

std::pair<std::size_t, std::size_t> WindowedDataset::split_range(
    const std::string& which) const {
  if (which == "train") return {0, split.train};
  if (which == "val") return {split.train, split.train + split.val};
  if (which == "test") return {split.train + split.val, windows.size()};
  throw std::invalid_argument("unknown split '" + which +
                              "' (expected train, val or test)");
}

WindowedDataset preprocess(std::vector<RawRecording> recs,
                           const DatasetManifest& manifest, double overlap) {
  if (recs.empty()) throw std::invalid_argument("preprocess: no recordings");
  for (auto& r : recs) r = interpolate_missing(std::move(r));

  // First pass: window starts + per-recording split, which fixes the raw
  // sample range the statistics may see.
  std::vector<std::vector<SensorWindow>> wins(recs.size());
  std::vector<SplitSizes> splits(recs.size());
  std::vector<std::size_t> train_limits(recs.size(), 0);
  for (std::size_t r = 0; r < recs.size(); ++r) {
    wins[r] = window_slice(recs[r], manifest.window, overlap);
    splits[r] = split_windows(wins[r]);
    train_limits[r] =
        splits[r].train > 0 ? wins[r][splits[r].train - 1].end() : 0;
  }
  ChannelStats stats = compute_channel_stats(recs, train_limits);

  // Standardize and recut so window payloads carry normalized data.
  WindowedDataset ds;
  ds.name = manifest.name;
  ds.n_classes = manifest.n_classes;
  ds.rate_hz = manifest.rate_hz;
  ds.channels = manifest.channels;
  ds.window_len = manifest.window;
  ds.stats = stats;
  std::vector<SensorWindow> train, val, test;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    standardize(recs[r], stats);
    std::vector<SensorWindow> w = window_slice(recs[r], manifest.window, overlap);
    const SplitSizes sp = splits[r];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i < sp.train) {
        train.push_back(std::move(w[i]));
      } else if (i < sp.train + sp.val) {
        val.push_back(std::move(w[i]));
      } else {
        test.push_back(std::move(w[i]));
      }
    }
  }
  ds.split = SplitSizes{train.size(), val.size(), test.size()};
  ds.windows.reserve(train.size() + val.size() + test.size());
  for (auto& w : train) ds.windows.push_back(std::move(w));
  for (auto& w : val) ds.windows.push_back(std::move(w));
  for (auto& w : test) ds.windows.push_back(std::move(w));
  return ds;
}

WindowedDataset synth_har(int n_classes, std::size_t channels,
                          std::size_t window_len, std::size_t n_per_class,
                          std::uint64_t seed) {
  WindowedDataset ds;
  ds.name = "synth";
  ds.n_classes = n_classes;
  ds.rate_hz = 50.0;
  for (std::size_t c = 0; c < channels; ++c) ds.channels.push_back("ch" + std::to_string(c));
  ds.window_len = window_len;
  ds.stats.mu.assign(channels, 0.0);
  ds.stats.sigma.assign(channels, 1.0);

  const double two_pi = 6.283185307179586;
  std::vector<std::vector<SensorWindow>> per_class(n_classes);
  for (int cls = 0; cls < n_classes; ++cls) {
    for (std::size_t w = 0; w < n_per_class; ++w) {
      RngStream rng = stream_for(
          seed, "synth/class" + std::to_string(cls) + "/window" + std::to_string(w));
      const double phase_w = rng.uniform(0.0, two_pi);
      // per-window tempo jitter, shared by all channels: single-channel
      // frequency bands of adjacent classes overlap, so raw nearest-
      // neighbour matching errs while the cross-channel frequency ratios
      // still identify the class
      const double tempo_w = 1.0 + 0.10 * rng.uniform(-1.0, 1.0);
      SensorWindow win;
      win.channels = channels;
      win.length = window_len;
      win.label = cls;
      win.recording_id = "synth-c" + std::to_string(cls);
      win.start = w * window_len;
      win.data.resize(channels * window_len);
      for (std::size_t k = 0; k < channels; ++k) {
        const double freq =
            (2.0 + cls + 0.4 * static_cast<double>(k)) * tempo_w;
        const double phase = 0.9 * cls + 0.5 * static_cast<double>(k) + phase_w;
        const double amp = 1.0 + 0.2 * rng.uniform(-1.0, 1.0);
        for (std::size_t t = 0; t < window_len; ++t) {
          const double arg =
              two_pi * freq * static_cast<double>(t) / static_cast<double>(window_len) +
              phase;
          const double noise = 0.3 * rng.normal();
          win.data[k * window_len + t] = static_cast<float>(amp * std::sin(arg) + noise);
        }
      }
      per_class[cls].push_back(std::move(win));
    }
  }
  // contiguous per-class split, classes interleaved within each split
  std::vector<SensorWindow> train, val, test;
  for (int cls = 0; cls < n_classes; ++cls) {
    const SplitSizes sp = split_windows(per_class[cls]);
    auto& w = per_class[cls];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i < sp.train) {
        train.push_back(std::move(w[i]));
      } else if (i < sp.train + sp.val) {
        val.push_back(std::move(w[i]));
      } else {
        test.push_back(std::move(w[i]));
      }
    }
  }
  ds.split = SplitSizes{train.size(), val.size(), test.size()};
  for (auto& w : train) ds.windows.push_back(std::move(w));
  for (auto& w : val) ds.windows.push_back(std::move(w));
  for (auto& w : test) ds.windows.push_back(std::move(w));
  return ds;
}

}  // namespace ssmhar
