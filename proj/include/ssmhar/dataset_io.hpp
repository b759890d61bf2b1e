#pragma once

#include <string>
#include <vector>

#include "ssmhar/data.hpp"

namespace ssmhar {

// Windowed dataset file, bit-exact across platforms:
//   magic "HARW1"
//   u64 n_windows, u64 n_channels, u64 window_len, u64 n_classes
//   per window: little-endian f32 data (channels x length), u16 label
// Split boundaries, channel stats and window source spans live in a JSON
// sidecar at <path>.json.
void save_windowed_dataset(const WindowedDataset& ds, const std::string& path);
WindowedDataset load_windowed_dataset(const std::string& path);

DatasetManifest load_manifest(const std::string& path);

// CSV adapter for user-supplied dataset exports. Expected header:
// timestamp,label,<channel names per manifest>. NaN cells (empty or "nan")
// pass through for interpolate_missing. Malformed input raises an error
// naming the file, line and column.
RawRecording ingest_csv(const std::string& path, const DatasetManifest& manifest);

}  // namespace ssmhar
