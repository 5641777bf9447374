#include <algorithm>
#include <cctype>
#include <cmath>

#include "ega/errors.hpp"
#include "ega/signal.hpp"

namespace ega::signal {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::vector<std::string> canonical_channel_names() {
  return {kCanonicalChannels.begin(), kCanonicalChannels.end()};
}

void Recording::validate() const {
  if (!(sample_rate_hz > 0.0)) throw FormatError("recording: sample rate must be positive");
  if (samples.size() != channel_names.size() * n_samples)
    throw FormatError("recording: " + std::to_string(samples.size()) + " samples for " +
                      std::to_string(channel_names.size()) + " channels x " + std::to_string(n_samples));
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!std::isfinite(samples[i]))
      throw FormatError("recording '" + subject_id + "': non-finite sample in channel " +
                        channel_names[i / std::max<std::size_t>(n_samples, 1)]);
}

Recording select_channels(const Recording& rec) {
  std::vector<std::size_t> rows;
  std::vector<std::string> missing;
  for (auto name : kCanonicalChannels) {
    const auto key = lower(name);
    auto it = std::find_if(rec.channel_names.begin(), rec.channel_names.end(),
                           [&](const std::string& c) { return lower(c) == key; });
    if (it == rec.channel_names.end())
      missing.emplace_back(name);
    else
      rows.push_back(static_cast<std::size_t>(it - rec.channel_names.begin()));
  }
  if (!missing.empty()) {
    std::string msg = "recording '" + rec.subject_id + "' is missing 10-20 channel(s):";
    for (const auto& m : missing) msg += " " + m;
    throw FormatError(msg);
  }
  Recording out;
  out.channel_names = canonical_channel_names();
  out.sample_rate_hz = rec.sample_rate_hz;
  out.n_samples = rec.n_samples;
  out.label = rec.label;
  out.subject_id = rec.subject_id;
  out.samples.reserve(rows.size() * rec.n_samples);
  for (auto r : rows) {
    const auto ch = rec.channel(r);
    out.samples.insert(out.samples.end(), ch.begin(), ch.end());
  }
  return out;
}

std::vector<Segment> segment(const Recording& rec, const SegmentOptions& opts) {
  if (!(opts.window_s > 0.0)) throw ConfigError("segment: window must be positive");
  const auto window = static_cast<std::size_t>(std::llround(rec.sample_rate_hz * opts.window_s));
  if (window == 0) throw ConfigError("segment: window shorter than one sample");
  std::vector<Segment> out;
  auto emit = [&](std::size_t offset, std::size_t len) {
    Segment s;
    s.n_channels = rec.n_channels();
    s.length = len;
    s.label = rec.label.value_or(0);
    s.subject_id = rec.subject_id;
    s.offset = offset;
    s.samples.reserve(s.n_channels * len);
    for (std::size_t c = 0; c < s.n_channels; ++c) {
      const auto ch = rec.channel(c);
      s.samples.insert(s.samples.end(), ch.begin() + offset, ch.begin() + offset + len);
    }
    out.push_back(std::move(s));
  };
  std::size_t offset = 0;
  for (; offset + window <= rec.n_samples; offset += window) emit(offset, window);
  const std::size_t tail = rec.n_samples - offset;
  if (tail > 0 && static_cast<double>(tail) >= opts.keep_fraction * static_cast<double>(window))
    emit(offset, tail);
  return out;
}

std::vector<Segment> preprocess(const Recording& rec, const PreprocessOptions& opts) {
  Recording r = select_channels(rec);
  r = resample(r, opts.resample_hz);
  if (opts.apply_notch) r = notch_filter(r, opts.filters.notch_hz, opts.filters.notch_q);
  if (opts.apply_bandpass)
    r = bandpass_filter(r, opts.filters.band_lo_hz, opts.filters.band_hi_hz, opts.filters.band_order);
  return segment(r, opts.segments);
}

Recording to_recording(const Segment& seg, double sample_rate_hz) {
  Recording r;
  if (seg.n_channels == kCanonicalChannels.size()) {
    r.channel_names = canonical_channel_names();
  } else {
    for (std::size_t c = 0; c < seg.n_channels; ++c) r.channel_names.push_back("ch" + std::to_string(c));
  }
  r.sample_rate_hz = sample_rate_hz;
  r.n_samples = seg.length;
  r.samples = seg.samples;
  r.label = seg.label;
  r.subject_id = seg.subject_id;
  return r;
}

}  // namespace ega::signal
