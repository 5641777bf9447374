#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ega::signal {

/// Fixed node order of the 19-channel 10-20 montage.
inline constexpr std::array<std::string_view, 19> kCanonicalChannels = {
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz",
    "C4",  "T4",  "T5", "P3", "Pz", "P4", "T6", "O1", "O2"};

std::vector<std::string> canonical_channel_names();

/// Multichannel recording, channel-major samples.
struct Recording {
  std::vector<std::string> channel_names;
  double sample_rate_hz = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> samples;  // channel_names.size() x n_samples
  std::optional<int> label;
  std::string subject_id;

  std::size_t n_channels() const { return channel_names.size(); }
  std::span<double> channel(std::size_t c) { return {samples.data() + c * n_samples, n_samples}; }
  std::span<const double> channel(std::size_t c) const {
    return {samples.data() + c * n_samples, n_samples};
  }
  /// Throws if the invariants (row count, positive rate, finite samples) fail.
  void validate() const;
};

/// Fixed-length window cut from a recording, channels in canonical order.
struct Segment {
  std::size_t n_channels = 0;
  std::size_t length = 0;
  std::vector<double> samples;  // n_channels x length
  int label = 0;
  std::string subject_id;
  std::size_t offset = 0;  // first sample index in the source recording

  std::span<const double> channel(std::size_t c) const {
    return {samples.data() + c * length, length};
  }
};

// ---------------------------------------------------------------------------
// IIR filtering

/// Second-order section, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};
using Sos = std::vector<Biquad>;

/// Second-order IIR notch (bandwidth f0 / q).
Sos design_notch(double f0_hz, double q, double fs_hz);
/// Butterworth band-pass; `order` is the low-pass prototype order, giving
/// `order` second-order sections.
Sos design_butter_bandpass(double lo_hz, double hi_hz, int order, double fs_hz);

std::complex<double> frequency_response(const Sos& sos, double f_hz, double fs_hz);

/// Edge padding for forward-backward filtering. Both pad each end by padlen
/// samples and start each pass from steady-state initial conditions.
///   predict: Burg AR extrapolation from the nearest samples
///   reflect: odd reflection about the end samples
/// padlen = 0 picks the decay time of the slowest pole.
enum class EdgeMethod { predict, reflect };

/// Zero-phase forward-backward filtering.
std::vector<double> filtfilt(const Sos& sos, std::span<const double> x,
                             EdgeMethod method = EdgeMethod::predict, std::size_t padlen = 0);

struct FilterOptions {
  double notch_hz = 50.0;
  double notch_q = 30.0;
  double band_lo_hz = 0.1;
  double band_hi_hz = 100.0;
  int band_order = 4;
};

Recording notch_filter(const Recording& rec, double f0_hz = 50.0, double q = 30.0);
Recording bandpass_filter(const Recording& rec, double lo_hz = 0.1, double hi_hz = 100.0,
                          int order = 4);

// ---------------------------------------------------------------------------
// Resampling

/// Rational polyphase resampler with a Kaiser-windowed sinc kernel. Output
/// length is round(n * target / source). Equal rates return an exact copy.
Recording resample(const Recording& rec, double target_hz);

std::vector<double> resample_channel(std::span<const double> x, double source_hz, double target_hz);

// ---------------------------------------------------------------------------
// Channel selection and segmentation

/// Keeps exactly the 19 canonical channels (case-insensitive match) in
/// canonical order. Throws listing every missing name.
Recording select_channels(const Recording& rec);

struct SegmentOptions {
  double window_s = 60.0;
  /// A trailing remainder is kept as a short segment when it covers at least
  /// this fraction of a window.
  double keep_fraction = 0.5;
};

std::vector<Segment> segment(const Recording& rec, const SegmentOptions& opts = {});

struct PreprocessOptions {
  double resample_hz = 256.0;
  FilterOptions filters;
  SegmentOptions segments;
  bool apply_notch = true;
  bool apply_bandpass = true;
};

/// select -> resample -> notch -> band-pass -> segment
std::vector<Segment> preprocess(const Recording& rec, const PreprocessOptions& opts = {});

Recording to_recording(const Segment& seg, double sample_rate_hz);

}  // namespace ega::signal
