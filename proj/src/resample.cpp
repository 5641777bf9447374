#include <cmath>
#include <numbers>
#include <numeric>

#include "ega/errors.hpp"
#include "ega/signal.hpp"

namespace ega::signal {

namespace {

constexpr double kKaiserBeta = 8.6;
constexpr double kZeroCrossings = 16.0;
constexpr double kRolloff = 0.9;  // cutoff as a fraction of the lower Nyquist
constexpr std::int64_t kMaxPhases = 1 << 16;

// Rates are quantized to 1 mHz to form the integer ratio up/down.
std::pair<std::int64_t, std::int64_t> rational_ratio(double source_hz, double target_hz) {
  auto up = static_cast<std::int64_t>(std::llround(target_hz * 1000.0));
  auto down = static_cast<std::int64_t>(std::llround(source_hz * 1000.0));
  const auto g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up > kMaxPhases)
    throw ConfigError("resample: ratio " + std::to_string(target_hz) + "/" + std::to_string(source_hz) +
                      " needs too many polyphase branches");
  return {up, down};
}

struct Phase {
  std::int64_t first;  // tap offset relative to floor(input position)
  std::vector<double> taps;
};

std::vector<Phase> build_phases(std::int64_t up, std::int64_t down) {
  // Cutoff in cycles per input sample.
  const double fc = 0.5 * std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kRolloff;
  const double half_width = kZeroCrossings / (2.0 * fc);
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  std::vector<Phase> phases(static_cast<std::size_t>(up));
  for (std::int64_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    Phase ph;
    ph.first = static_cast<std::int64_t>(std::ceil(frac - half_width));
    const auto last = static_cast<std::int64_t>(std::floor(frac + half_width));
    double total = 0.0;
    for (std::int64_t j = ph.first; j <= last; ++j) {
      const double tau = static_cast<double>(j) - frac;
      const double arg = 2.0 * fc * tau;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      const double r = tau / half_width;
      const double win = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      const double v = 2.0 * fc * sinc * win;
      ph.taps.push_back(v);
      total += v;
    }
    for (auto& v : ph.taps) v /= total;
    phases[static_cast<std::size_t>(p)] = std::move(ph);
  }
  return phases;
}

std::vector<double> apply_phases(std::span<const double> x, const std::vector<Phase>& phases,
                                 std::int64_t up, std::int64_t down, std::size_t out_len) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::vector<double> y(out_len);
  for (std::size_t m = 0; m < out_len; ++m) {
    const std::int64_t pos = static_cast<std::int64_t>(m) * down;
    const std::int64_t base = pos / up;
    const auto& ph = phases[static_cast<std::size_t>(pos % up)];
    double s = 0.0;
    for (std::size_t t = 0; t < ph.taps.size(); ++t) {
      const std::int64_t idx = base + ph.first + static_cast<std::int64_t>(t);
      if (idx >= 0 && idx < n) s += ph.taps[t] * x[static_cast<std::size_t>(idx)];
    }
    y[m] = s;
  }
  return y;
}

std::size_t output_length(std::size_t n, double source_hz, double target_hz) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * target_hz / source_hz));
}

}  // namespace

std::vector<double> resample_channel(std::span<const double> x, double source_hz, double target_hz) {
  if (!(source_hz > 0.0) || !(target_hz > 0.0)) throw ConfigError("resample: rates must be positive");
  if (x.empty()) throw std::invalid_argument("resample: empty signal");
  if (source_hz == target_hz) return {x.begin(), x.end()};
  const auto [up, down] = rational_ratio(source_hz, target_hz);
  const auto phases = build_phases(up, down);
  return apply_phases(x, phases, up, down, output_length(x.size(), source_hz, target_hz));
}

Recording resample(const Recording& rec, double target_hz) {
  if (!(target_hz > 0.0)) throw ConfigError("resample: target rate must be positive");
  if (rec.n_samples == 0 || rec.n_channels() == 0) throw std::invalid_argument("resample: empty recording");
  rec.validate();
  if (rec.sample_rate_hz == target_hz) return rec;
  const auto [up, down] = rational_ratio(rec.sample_rate_hz, target_hz);
  const auto phases = build_phases(up, down);
  const std::size_t out_len = output_length(rec.n_samples, rec.sample_rate_hz, target_hz);
  Recording out = rec;
  out.sample_rate_hz = target_hz;
  out.n_samples = out_len;
  out.samples.assign(rec.n_channels() * out_len, 0.0);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto y = apply_phases(rec.channel(c), phases, up, down, out_len);
    std::copy(y.begin(), y.end(), out.channel(c).begin());
  }
  return out;
}

}  // namespace ega::signal
