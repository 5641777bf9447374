#include <algorithm>
#include <cmath>
#include <numbers>

#include "ega/errors.hpp"
#include "ega/signal.hpp"

namespace ega::signal {

namespace {

using cd = std::complex<double>;

constexpr std::size_t kArOrder = 16;
constexpr std::size_t kArWindow = 2048;

// Steady-state TDF-II states for a unit step at the cascade input.
std::vector<std::array<double, 2>> step_states(const Sos& sos) {
  std::vector<std::array<double, 2>> zi(sos.size());
  double u = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    const double denom = 1.0 + s.a1 + s.a2;
    const double y = denom == 0.0 ? 0.0 : (s.b0 + s.b1 + s.b2) / denom * u;
    const double z2 = s.b2 * u - s.a2 * y;
    const double z1 = s.b1 * u - s.a1 * y + z2;
    zi[i] = {z1, z2};
    u = y;
  }
  return zi;
}

void sosfilt_inplace(const Sos& sos, std::vector<double>& x,
                     const std::vector<std::array<double, 2>>& zi, double zi_scale) {
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    double z1 = zi[i][0] * zi_scale, z2 = zi[i][1] * zi_scale;
    for (auto& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

double max_pole_radius(const Sos& sos) {
  double r = 0.0;
  for (const auto& s : sos) {
    const double disc = s.a1 * s.a1 - 4.0 * s.a2;
    if (disc < 0.0) {
      r = std::max(r, std::sqrt(s.a2));
    } else {
      const double sq = std::sqrt(disc);
      r = std::max({r, std::abs((-s.a1 + sq) / 2.0), std::abs((-s.a1 - sq) / 2.0)});
    }
  }
  return r;
}

// Burg estimate of AR coefficients a[0..p] with a[0] = 1, so that
// x[t] ~ -sum_{j>=1} a[j] x[t - j].
std::vector<double> burg(std::span<const double> x, std::size_t order) {
  const std::size_t n = x.size();
  std::vector<double> f(x.begin(), x.end()), bw(x.begin(), x.end()), a(order + 1, 0.0);
  a[0] = 1.0;
  double d = 0.0;
  for (double v : x) d += 2.0 * v * v;
  d -= x[0] * x[0] + x[n - 1] * x[n - 1];
  const double d0 = d;
  for (std::size_t k = 0; k < order && k + 1 < n; ++k) {
    if (!(d > 1e-14 * d0)) break;
    double mu = 0.0;
    for (std::size_t i = 0; i + k + 1 < n; ++i) mu += f[i + k + 1] * bw[i];
    mu = std::clamp(-2.0 * mu / d, -1.0, 1.0);
    for (std::size_t i = 0; i <= (k + 1) / 2; ++i) {
      const double t1 = a[i] + mu * a[k + 1 - i];
      const double t2 = a[k + 1 - i] + mu * a[i];
      a[i] = t1;
      a[k + 1 - i] = t2;
    }
    for (std::size_t i = 0; i + k + 1 < n; ++i) {
      const double t1 = f[i + k + 1] + mu * bw[i];
      const double t2 = bw[i] + mu * f[i + k + 1];
      f[i + k + 1] = t1;
      bw[i] = t2;
    }
    d = (1.0 - mu * mu) * d - f[k + 1] * f[k + 1] - bw[n - k - 2] * bw[n - k - 2];
  }
  return a;
}

// Continues `tail` (oldest first) by `count` samples of AR prediction around
// the tail mean.
std::vector<double> extrapolate(std::span<const double> tail, std::size_t count) {
  double mean = 0.0;
  for (double v : tail) mean += v;
  mean /= static_cast<double>(tail.size());
  std::vector<double> hist(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i) hist[i] = tail[i] - mean;
  const auto a = burg(hist, std::min<std::size_t>(kArOrder, tail.size() / 2));
  const std::size_t p = a.size() - 1;
  hist.reserve(hist.size() + count);
  for (std::size_t t = 0; t < count; ++t) {
    double v = 0.0;
    for (std::size_t j = 1; j <= p && j <= hist.size(); ++j) v -= a[j] * hist[hist.size() - j];
    hist.push_back(v);
  }
  std::vector<double> out(hist.end() - static_cast<std::ptrdiff_t>(count), hist.end());
  for (auto& v : out) v += mean;
  return out;
}

Recording apply_sos(const Recording& rec, const Sos& sos) {
  rec.validate();
  Recording out = rec;
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto y = filtfilt(sos, rec.channel(c));
    std::copy(y.begin(), y.end(), out.channel(c).begin());
  }
  return out;
}

}  // namespace

Sos design_notch(double f0_hz, double q, double fs_hz) {
  if (!(fs_hz > 0.0)) throw ConfigError("notch: sample rate must be positive");
  if (!(f0_hz > 0.0) || f0_hz >= fs_hz / 2.0)
    throw ConfigError("notch: frequency " + std::to_string(f0_hz) + " Hz must lie in (0, " +
                      std::to_string(fs_hz / 2.0) + ") Hz");
  if (!(q > 0.0)) throw ConfigError("notch: q must be positive");
  const double w0 = 2.0 * std::numbers::pi * f0_hz / fs_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double c = -2.0 * std::cos(w0);
  return {Biquad{1.0 / a0, c / a0, 1.0 / a0, c / a0, (1.0 - alpha) / a0}};
}

Sos design_butter_bandpass(double lo_hz, double hi_hz, int order, double fs_hz) {
  if (!(fs_hz > 0.0)) throw ConfigError("bandpass: sample rate must be positive");
  if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs_hz / 2.0))
    throw ConfigError("bandpass: need 0 < lo < hi < fs/2, got lo=" + std::to_string(lo_hz) +
                      " hi=" + std::to_string(hi_hz) + " fs=" + std::to_string(fs_hz));
  if (order < 1) throw ConfigError("bandpass: order must be >= 1");
  const double k = 2.0 * fs_hz;
  const double wl = k * std::tan(std::numbers::pi * lo_hz / fs_hz);
  const double wh = k * std::tan(std::numbers::pi * hi_hz / fs_hz);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  std::vector<cd> upper;
  std::vector<double> real;
  for (int i = 0; i < order; ++i) {
    const cd p = std::polar(1.0, std::numbers::pi * (2.0 * i + order + 1) / (2.0 * order));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0sq);
    for (const cd s : {half + root, half - root}) {
      const cd z = (k + s) / (k - s);
      if (std::abs(z.imag()) < 1e-14)
        real.push_back(z.real());
      else if (z.imag() > 0.0)
        upper.push_back(z);
    }
  }
  Sos sos;
  for (const auto& z : upper) sos.push_back(Biquad{1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  std::sort(real.begin(), real.end());
  for (std::size_t i = 0; i + 1 < real.size(); i += 2)
    sos.push_back(Biquad{1.0, 0.0, -1.0, -(real[i] + real[i + 1]), real[i] * real[i + 1]});
  if (sos.size() != static_cast<std::size_t>(order))
    throw NumericFault("bandpass design produced an unexpected pole layout");

  // Unit gain at the (prewarped) geometric band center.
  const double wc = 2.0 * std::atan(std::sqrt(w0sq) / k);
  const double fc = wc * fs_hz / (2.0 * std::numbers::pi);
  const double g = std::abs(frequency_response(sos, fc, fs_hz));
  sos[0].b0 /= g;
  sos[0].b1 /= g;
  sos[0].b2 /= g;
  return sos;
}

std::complex<double> frequency_response(const Sos& sos, double f_hz, double fs_hz) {
  const cd z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
  const cd z2 = z1 * z1;
  cd h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

std::vector<double> filtfilt(const Sos& sos, std::span<const double> x, EdgeMethod method,
                             std::size_t padlen) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (padlen == 0) {
    // Samples for the slowest mode to decay by 1e-6.
    const double r = max_pole_radius(sos);
    padlen = r <= 0.0 ? 3 * 2 * sos.size()
                      : static_cast<std::size_t>(std::ceil(std::log(1e-6) / std::log(r)));
  }
  if (method == EdgeMethod::reflect) padlen = std::min(padlen, n - 1);

  std::vector<double> ext(n + 2 * padlen);
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(padlen));
  if (method == EdgeMethod::reflect) {
    for (std::size_t i = 0; i < padlen; ++i) ext[i] = 2.0 * x[0] - x[padlen - i];
    for (std::size_t i = 0; i < padlen; ++i) ext[padlen + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  } else if (n < 8) {
    std::fill(ext.begin(), ext.begin() + static_cast<std::ptrdiff_t>(padlen), x[0]);
    std::fill(ext.end() - static_cast<std::ptrdiff_t>(padlen), ext.end(), x[n - 1]);
  } else {
    const std::size_t w = std::min(n, kArWindow);
    const auto after = extrapolate(x.subspan(n - w), padlen);
    std::copy(after.begin(), after.end(), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n));
    std::vector<double> head(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(w));
    std::reverse(head.begin(), head.end());
    const auto before = extrapolate(head, padlen);
    for (std::size_t i = 0; i < padlen; ++i) ext[padlen - 1 - i] = before[i];
  }

  const auto zi = step_states(sos);
  sosfilt_inplace(sos, ext, zi, ext.front());
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext, zi, ext.front());
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

Recording notch_filter(const Recording& rec, double f0_hz, double q) {
  return apply_sos(rec, design_notch(f0_hz, q, rec.sample_rate_hz));
}

Recording bandpass_filter(const Recording& rec, double lo_hz, double hi_hz, int order) {
  return apply_sos(rec, design_butter_bandpass(lo_hz, hi_hz, order, rec.sample_rate_hz));
}

}  // namespace ega::signal
