#include "ega/synth.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ega/errors.hpp"
#include "ega/montage.hpp"

namespace ega::signal {

namespace {

void standardize(std::span<double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  for (auto& v : x) v = sd > 0.0 ? (v - mean) / sd : 0.0;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_subjects_per_class == 0 || segments_per_subject == 0)
    throw ConfigError("synth: need at least one subject per class and one segment per subject");
  if (n_channels == 0 || n_channels > kCanonicalChannels.size())
    throw ConfigError("synth: n_channels must be in [1, 19]");
  if (length < 8) throw ConfigError("synth: length must be >= 8");
  if (!(coupling >= 0.0 && coupling <= 1.0)) throw ConfigError("synth: coupling must be in [0, 1]");
  if (!(sigma_rad > 0.0)) throw ConfigError("synth: sigma_rad must be positive");
  if (!(band_lo_hz > 0.0 && band_lo_hz < band_hi_hz && band_hi_hz < sample_rate_hz / 2.0))
    throw ConfigError("synth: need 0 < band_lo < band_hi < fs / 2");
}

std::vector<double> coupling_matrix(const SynthSpec& spec) {
  const std::size_t n = spec.n_channels;
  const auto pos = montage::standard_positions();
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = i == j ? 0.0 : montage::geodesic_distance(pos[i].xyz, pos[j].xyz);
      k(i, j) = (i == j ? 1.0 - spec.coupling : 0.0) +
                spec.coupling * std::exp(-d * d / (2.0 * spec.sigma_rad * spec.sigma_rad));
    }
  // The geodesic Gaussian kernel need not be PSD on a sphere; clip before the root.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd c = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = c.row(static_cast<Eigen::Index>(i)).norm();
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / norm;
  }
  return out;
}

std::vector<Segment> synthesize_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n_channels, len = spec.length;
  const auto mix = coupling_matrix(spec);
  const auto sos = design_butter_bandpass(spec.band_lo_hz, spec.band_hi_hz, 2, spec.sample_rate_hz);
  std::vector<Segment> out;
  for (int label = 0; label < 2; ++label)
    for (std::size_t s = 0; s < spec.n_subjects_per_class; ++s) {
      const std::string id = "c" + std::to_string(label) + "s" + std::to_string(s);
      for (std::size_t k = 0; k < spec.segments_per_subject; ++k) {
        std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(label), static_cast<std::uint32_t>(s),
                           static_cast<std::uint32_t>(k)};
        std::mt19937_64 rng(sseq);
        std::normal_distribution<double> gauss;
        std::vector<double> z(n * len);
        for (std::size_t c = 0; c < n; ++c) {
          std::vector<double> white(len);
          for (auto& v : white) v = gauss(rng);
          auto band = filtfilt(sos, white);
          standardize(band);
          std::copy(band.begin(), band.end(), z.begin() + static_cast<std::ptrdiff_t>(c * len));
        }
        Segment seg;
        seg.n_channels = n;
        seg.length = len;
        seg.label = label;
        seg.subject_id = id;
        seg.offset = k * len;
        if (label == 0) {
          seg.samples = std::move(z);
        } else {
          seg.samples.assign(n * len, 0.0);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double m = mix[i * n + j];
              for (std::size_t t = 0; t < len; ++t) seg.samples[i * len + t] += m * z[j * len + t];
            }
          for (std::size_t c = 0; c < n; ++c)
            standardize({seg.samples.data() + c * len, len});
        }
        out.push_back(std::move(seg));
      }
    }
  return out;
}

double mean_abs_correlation(const Segment& seg) {
  const std::size_t n = seg.n_channels, len = seg.length;
  std::vector<double> mean(n, 0.0), sd(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (double v : seg.channel(c)) mean[c] += v;
    mean[c] /= static_cast<double>(len);
    for (double v : seg.channel(c)) sd[c] += (v - mean[c]) * (v - mean[c]);
    sd[c] = std::sqrt(sd[c]);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double cov = 0.0;
      for (std::size_t t = 0; t < len; ++t) cov += (seg.samples[i * len + t] - mean[i]) * (seg.samples[j * len + t] - mean[j]);
      total += std::abs(cov / (sd[i] * sd[j]));
      ++pairs;
    }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

}  // namespace ega::signal
