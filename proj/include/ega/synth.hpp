#pragma once

#include <cstdint>
#include <vector>

#include "ega/signal.hpp"

namespace ega::signal {

/// Two-class synthetic task. Class 0: independent band-limited noise per
/// channel. Class 1: the same kind of noise mixed through a fixed spatial
/// coupling matrix C with C C^T = K, K = (1 - coupling) I + coupling *
/// exp(-d^2 / (2 sigma^2)) over electrode geodesic distances d. Every
/// channel of every segment is standardized, so the classes differ only in
/// their cross-channel correlation.
struct SynthSpec {
  std::size_t n_subjects_per_class = 40;
  std::size_t segments_per_subject = 1;
  std::size_t n_channels = 19;
  std::size_t length = 1024;
  double sample_rate_hz = 256.0;
  double band_lo_hz = 1.0;
  double band_hi_hz = 40.0;
  double coupling = 0.8;
  double sigma_rad = 1.0;

  void validate() const;
};

/// Subjects are ordered class 0 then class 1; ids are "c<class>s<index>".
std::vector<Segment> synthesize_dataset(const SynthSpec& spec, std::uint64_t seed);

/// n x n mixing matrix with unit-norm rows.
std::vector<double> coupling_matrix(const SynthSpec& spec);

/// Mean |Pearson r| over all channel pairs of one segment.
double mean_abs_correlation(const Segment& seg);

}  // namespace ega::signal
