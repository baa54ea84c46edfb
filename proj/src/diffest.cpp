#include "fnode/diffest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fnode/errors.hpp"

namespace fnode::diffest {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr Eigen::Index kMinSpectralLength = 16;

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

// In-place iterative radix-2 transform with e^{-2 pi i kn/N} kernel (forward).
void fft_pow2(std::vector<cd>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<cd> tw(half);
    for (std::size_t k = 0; k < half; ++k)
      tw[k] = std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(k) / static_cast<double>(len));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Chirp-z (Bluestein) for arbitrary lengths.
std::vector<cd> fft_any(const std::vector<cd>& x) {
  const std::size_t n = x.size();
  if (n <= 1) return x;
  if (is_pow2(n)) {
    std::vector<cd> a = x;
    fft_pow2(a, false);
    return a;
  }
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;

  // w_k = exp(-i pi k^2 / n); k^2 reduced mod 2n keeps the angle small.
  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = std::polar(1.0, -kPi * static_cast<double>(k2) / static_cast<double>(n));
  }
  std::vector<cd> a(m, cd{}), b(m, cd{});
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_pow2(a, true);

  std::vector<cd> out(n);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
  return out;
}

void require_length(Eigen::Index n, Eigen::Index min, const char* what) {
  if (n < min)
    throw InvalidInput(std::string(what) + " needs at least " + std::to_string(min) + " samples");
}

}  // namespace

void DiffConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  if (sigma && !(*sigma > 0.0)) throw InvalidInput("sigma must be positive");
  if (mirror_len && *mirror_len < 1) throw InvalidInput("mirror_len must be at least 1");
  if (boundary_margin && *boundary_margin < 0)
    throw InvalidInput("boundary_margin must be non-negative");
  if (fd_order != 1 && fd_order != 2) throw InvalidInput("fd_order must be 1 or 2");
}

Detrended detrend(SeriesRef series, double dt) {
  const Eigen::Index n = series.size();
  require_length(n, 2, "detrend");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  // Centered normal equations: b = S_tz / S_tt, a = mean(z) - b mean(t).
  const double t_mean = 0.5 * static_cast<double>(n - 1) * dt;
  const double z_mean = series.mean();
  double stt = 0.0, stz = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double tc = static_cast<double>(i) * dt - t_mean;
    stt += tc * tc;
    stz += tc * (series[i] - z_mean);
  }
  Detrended out;
  out.fit.b = stz / stt;
  out.fit.a = z_mean - out.fit.b * t_mean;
  out.residual.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.residual[i] = series[i] - (out.fit.a + out.fit.b * static_cast<double>(i) * dt);
  return out;
}

double cosine_taper(int t, int mirror_len) {
  return 0.5 * (1.0 - std::cos(kPi * static_cast<double>(t) / static_cast<double>(mirror_len)));
}

VectorXd mirror_extend(SeriesRef series, int mirror_len) {
  const Eigen::Index n = series.size();
  if (mirror_len < 1 || mirror_len > n - 1)
    throw InvalidInput("mirror_len must lie in [1, N-1]");
  const Eigen::Index m = mirror_len;
  VectorXd ext(n + 2 * m);
  ext.segment(m, n) = series;
  for (Eigen::Index j = 1; j <= m; ++j) {
    const double w = cosine_taper(static_cast<int>(m - j), mirror_len);
    ext[m - j] = w * series[j];
    ext[m + n - 1 + j] = w * series[n - 1 - j];
  }
  return ext;
}

VectorXd tukey_window(Eigen::Index n, double alpha) {
  require_length(n, 4, "tukey_window");
  VectorXd w(n);
  const double len = static_cast<double>(n - 1);
  const double edge = alpha * len / 2.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    if (t < edge)
      w[i] = 0.5 * (1.0 + std::cos(kPi * (edge - t) / edge));
    else if (t <= len - edge)
      w[i] = 1.0;
    else
      w[i] = 0.5 * (1.0 + std::cos(kPi * (t - (len - edge)) / edge));
  }
  return w;
}

Eigen::Index signed_bin(Eigen::Index k, Eigen::Index n) { return k < (n + 1) / 2 ? k : k - n; }

VectorXd gaussian_gain(Eigen::Index n, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("sigma must be positive");
  VectorXd g(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ratio = static_cast<double>(signed_bin(k, n)) / sigma;
    g[k] = std::exp(-0.5 * ratio * ratio);
  }
  return g;
}

VectorXcd dft(const Eigen::Ref<const VectorXcd>& x) {
  std::vector<cd> buf(x.data(), x.data() + x.size());
  const std::vector<cd> out = fft_any(buf);
  return Eigen::Map<const VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

VectorXcd dft(SeriesRef x) { return dft(VectorXcd(x.cast<cd>())); }

VectorXcd idft(const Eigen::Ref<const VectorXcd>& spectrum) {
  const Eigen::Index n = spectrum.size();
  if (n == 0) return {};
  VectorXcd out = dft(VectorXcd(spectrum.conjugate())).conjugate();
  return out / static_cast<double>(n);
}

SpectralPlan SpectralPlan::make(Eigen::Index n, double dt, double alpha, double sigma) {
  SpectralPlan plan;
  plan.n = n;
  plan.dt = dt;
  plan.window = tukey_window(n, alpha);
  plan.filter = gaussian_gain(n, sigma);
  plan.angular_freqs.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    // The unpaired Nyquist bin of an even transform has no odd counterpart.
    const bool nyquist = (n % 2 == 0) && k == n / 2;
    plan.angular_freqs[k] =
        nyquist ? 0.0 : 2.0 * kPi * static_cast<double>(signed_bin(k, n)) / (static_cast<double>(n) * dt);
  }
  return plan;
}

namespace {

VectorXd differentiate_in_frequency(const VectorXd& signal, const SpectralPlan& plan,
                                    bool apply_window_and_filter) {
  VectorXcd spec = apply_window_and_filter ? dft(VectorXd(signal.cwiseProduct(plan.window)))
                                           : dft(signal);
  const cd j{0.0, 1.0};
  for (Eigen::Index k = 0; k < plan.n; ++k) {
    const double gain = apply_window_and_filter ? plan.filter[k] : 1.0;
    spec[k] *= j * plan.angular_freqs[k] * gain;
  }
  return idft(spec).real();
}

}  // namespace

VectorXd spectral_derivative(SeriesRef series, double dt, const DiffConfig& config) {
  config.validate();
  const Eigen::Index n = series.size();
  require_length(n, kMinSpectralLength, "spectral_derivative");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  if (!series.allFinite()) throw InvalidInput("series contains non-finite values");

  const Detrended d = detrend(series, dt);
  const int m = config.mirror_len.value_or(static_cast<int>(n / 4));
  const VectorXd ext = mirror_extend(d.residual, m);
  const Eigen::Index n_ext = ext.size();
  const double sigma = config.sigma.value_or(static_cast<double>(n_ext) / 20.0);
  const SpectralPlan plan = SpectralPlan::make(n_ext, dt, config.alpha, sigma);

  const VectorXd deriv = differentiate_in_frequency(ext, plan, true);
  return deriv.segment(m, n).array() + d.fit.b;
}

VectorXd naive_spectral_derivative(SeriesRef series, double dt) {
  const Eigen::Index n = series.size();
  require_length(n, 4, "naive_spectral_derivative");
  const SpectralPlan plan = SpectralPlan::make(n, dt, 1.0, 1.0);
  return differentiate_in_frequency(series, plan, false);
}

VectorXd fd_derivative(SeriesRef series, double dt, int order) {
  const Eigen::Index n = series.size();
  require_length(n, 3, "fd_derivative");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  if (order != 1 && order != 2) throw InvalidInput("fd order must be 1 or 2");
  VectorXd d(n);
  if (order == 2) {
    for (Eigen::Index i = 1; i + 1 < n; ++i) d[i] = (series[i + 1] - series[i - 1]) / (2.0 * dt);
    d[0] = (series[1] - series[0]) / dt;
  } else {
    for (Eigen::Index i = 0; i + 1 < n; ++i) d[i] = (series[i + 1] - series[i]) / dt;
  }
  d[n - 1] = (series[n - 1] - series[n - 2]) / dt;
  return d;
}

VectorXd hybrid_derivative(SeriesRef series, double dt, const DiffConfig& config) {
  config.validate();
  if (config.method == Method::FiniteDifference) return fd_derivative(series, dt, config.fd_order);

  const Eigen::Index n = series.size();
  const VectorXd spectral = spectral_derivative(series, dt, config);
  const VectorXd fd = fd_derivative(series, dt, config.fd_order);
  const Eigen::Index margin =
      config.boundary_margin.value_or(std::max<int>(5, static_cast<int>(n / 50)));
  if (margin == 0) return spectral;
  VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index edge = std::min(i, n - 1 - i);
    const double w = std::min(1.0, static_cast<double>(edge) / static_cast<double>(margin));
    out[i] = w * spectral[i] + (1.0 - w) * fd[i];
  }
  return out;
}

Eigen::MatrixXd accel_targets(const integrate::Trajectory& traj, const DiffConfig& config) {
  traj.validate();
  const Eigen::Index nz = traj.n_z();
  Eigen::MatrixXd out(traj.rows(), nz);
  for (Eigen::Index c = 0; c < nz; ++c)
    out.col(c) = hybrid_derivative(traj.states.col(nz + c), traj.dt, config);
  return out;
}

}  // namespace fnode::diffest
