#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ega/signal.hpp"

namespace ega::io {

// EEGB v1 layout:
//   "EEGB" | u32 LE header length | UTF-8 JSON header | f32 LE samples
// Header: {version, channel_names, sample_rate_hz, label, subject_id, n_samples}.
// Samples are channel-major and widen to float64 on load.

signal::Recording read_eegb(const std::filesystem::path& path);
void write_eegb(const std::filesystem::path& path, const signal::Recording& rec);

/// Every *.eegb file in dir, sorted by file name.
std::vector<std::filesystem::path> list_eegb(const std::filesystem::path& dir);

/// CSV with a header row ("time", then channel names) and one row per
/// sample. When sample_rate_hz <= 0 the rate is taken from the first two
/// time stamps (seconds).
signal::Recording read_csv(const std::filesystem::path& path, double sample_rate_hz = 0.0,
                           std::string subject_id = "");

}  // namespace ega::io
