#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssmhar {

// One continuous multichannel recording. Samples are (T x D_c) row-major;
// NaN marks missing values before interpolation. Per-sample labels use -1
// for unlabeled stretches.
struct RawRecording {
  std::string id;
  std::vector<std::string> channels;
  double rate_hz = 0.0;
  std::size_t length = 0;  // T
  std::vector<float> samples;  // T * channels.size()
  std::vector<int> labels;     // T

  std::size_t channel_count() const { return channels.size(); }
  float& at(std::size_t t, std::size_t c) { return samples[t * channels.size() + c]; }
  float at(std::size_t t, std::size_t c) const { return samples[t * channels.size() + c]; }
};

// One labeled window, data laid out channel-major: (D_c x L).
struct SensorWindow {
  std::vector<float> data;
  std::size_t channels = 0;
  std::size_t length = 0;
  int label = -1;
  std::string recording_id;
  std::size_t start = 0;  // first raw sample index covered

  std::size_t end() const { return start + length; }
};

struct DatasetManifest {
  std::string name;
  int n_classes = 0;
  double rate_hz = 0.0;
  std::size_t window = 0;
  std::vector<std::string> channels;
};

struct ChannelStats {
  std::vector<double> mu;
  std::vector<double> sigma;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

// Replaces NaNs by linear interpolation between the nearest valid
// neighbours; leading/trailing gaps take the nearest valid value. A channel
// with no valid samples at all is an error.
RawRecording interpolate_missing(RawRecording rec);

// Per-channel statistics over the first `limit` samples of each recording
// (the training spans), so no val/test sample leaks into the stats.
ChannelStats compute_channel_stats(const std::vector<RawRecording>& recs,
                                   const std::vector<std::size_t>& limits);
// (x - mu)/sigma per channel; sigma == 0 passes through centered.
void standardize(RawRecording& rec, const ChannelStats& stats);
void unstandardize(RawRecording& rec, const ChannelStats& stats);

// Sliding windows with the given overlap fraction. stride =
// floor(L*(1-overlap)), at least 1; count = floor((T-L)/stride)+1. The label
// is the majority of per-sample labels (ties broken toward the label that
// occurs earliest in the window); samples labeled -1 do not vote and fully
// unlabeled windows are dropped. Recordings shorter than L yield no windows.
std::vector<SensorWindow> window_slice(const RawRecording& rec, std::size_t len,
                                       double overlap = 0.5);

// Contiguous 0.7/0.1/0.2 split over an in-order window list:
// train = floor(0.7 n), val = floor((n - train)/3), test = the rest. When
// the val segment is empty, leading test windows whose raw spans still
// overlap a train window are reassigned to val so train and test never share
// a raw sample.
SplitSizes split_windows(const std::vector<SensorWindow>& windows);

// True when no raw sample index is covered by both a train and a test window.
bool audit_no_leakage(const std::vector<SensorWindow>& windows,
                      const SplitSizes& split);

// Preprocessed dataset: windows stored train|val|test in order.
struct WindowedDataset {
  std::string name;
  int n_classes = 0;
  double rate_hz = 0.0;
  std::vector<std::string> channels;
  std::size_t window_len = 0;
  std::vector<SensorWindow> windows;
  SplitSizes split;
  ChannelStats stats;

  std::size_t channel_count() const { return channels.size(); }
  // [first, last) window index range of a split named train/val/test
  std::pair<std::size_t, std::size_t> split_range(const std::string& which) const;
};

// Full preprocessing chain over a set of recordings: interpolate, per-
// recording window + split, train-span statistics, standardize, recut.
WindowedDataset preprocess(std::vector<RawRecording> recs,
                           const DatasetManifest& manifest, double overlap = 0.5);

// Synthetic activity generator (desk-scale stand-in for the public sets).
// Class c, channel k of window w:
//   x[t] = amp * sin(2*pi*(2 + c + 0.4 k)*tempo_w * t/L + phi_ck + phi_w)
//          + noise
// with phi_ck = 0.9 c + 0.5 k fixed per class/channel, phi_w uniform in
// [0, 2*pi) per window (shared by all channels), tempo_w = 1 + 0.1*U(-1,1)
// per window (shared by all channels), amp = 1 + 0.2*U(-1,1) per (window,
// channel), and noise ~ N(0, 0.3^2) per sample. The tempo jitter overlaps
// the single-channel frequency bands of neighbouring classes, so the task
// is separable through cross-channel structure but not by raw distances.
// Split is contiguous per class with the same 0.7/0.1/0.2 rule.
WindowedDataset synth_har(int n_classes = 6, std::size_t channels = 3,
                          std::size_t window_len = 128,
                          std::size_t n_per_class = 100,
                          std::uint64_t seed = 0);

}  // namespace ssmhar
