#pragma once

// Acceleration targets from sampled trajectories.
//
// The spectral path removes a least-squares trend, extends the residual with
// cosine-tapered mirror images, applies a Tukey window, differentiates in the
// frequency domain under a Gaussian low-pass, crops back to the original
// samples and restores the trend slope. Finite differences cover the ends of
// the record, where the spectral estimate is least reliable.

#include <complex>
#include <optional>

#include <Eigen/Dense>

#include "fnode/integrate.hpp"

namespace fnode::diffest {

using Eigen::VectorXcd;
using Eigen::VectorXd;
using SeriesRef = Eigen::Ref<const VectorXd>;

enum class Method { SpectralHybrid, FiniteDifference };

struct DiffConfig {
  Method method = Method::SpectralHybrid;
  double alpha = 0.2;                  // Tukey taper fraction
  std::optional<double> sigma;         // Gaussian bandwidth in bins; default N_ext / 20
  std::optional<int> mirror_len;       // default N / 4
  std::optional<int> boundary_margin;  // default max(5, N / 50)
  int fd_order = 2;                    // 2: central interior, 1: one-sided everywhere

  void validate() const;
};

struct TrendFit {
  double a = 0.0;  // intercept
  double b = 0.0;  // slope per unit time
};

struct Detrended {
  VectorXd residual;
  TrendFit fit;
};

/// Least-squares line through (i dt, z_i). Requires at least two samples.
Detrended detrend(SeriesRef series, double dt);

/// Cosine taper weight 0.5 (1 - cos(pi t / M)), t in [0, M].
double cosine_taper(int t, int mirror_len);

/// Extends by `mirror_len` tapered reflections on each side (reflection about
/// the end samples). Result length N + 2 mirror_len.
VectorXd mirror_extend(SeriesRef series, int mirror_len);

/// Tukey window over n samples with taper fraction alpha.
VectorXd tukey_window(Eigen::Index n, double alpha);

/// exp(-0.5 (k / sigma)^2) at the signed frequency index of each DFT bin.
VectorXd gaussian_gain(Eigen::Index n, double sigma);

/// Signed frequency index of bin k for an n-point transform (k - n for k >= n/2).
Eigen::Index signed_bin(Eigen::Index k, Eigen::Index n);

/// Unnormalized forward transform, X_k = sum_n x_n e^{-2 pi i k n / N}. Any length.
VectorXcd dft(const Eigen::Ref<const VectorXcd>& x);
VectorXcd dft(SeriesRef x);
/// Inverse including the 1/N factor.
VectorXcd idft(const Eigen::Ref<const VectorXcd>& spectrum);

/// Precomputed window, filter and angular frequencies for one transform length.
struct SpectralPlan {
  Eigen::Index n = 0;  // transform length
  double dt = 0.0;
  VectorXd window;
  VectorXd filter;
  VectorXd angular_freqs;

  static SpectralPlan make(Eigen::Index n, double dt, double alpha, double sigma);
};

/// Full spectral pipeline. Requires at least 16 samples.
VectorXd spectral_derivative(SeriesRef series, double dt, const DiffConfig& config = {});

/// Plain DFT -> i omega -> inverse DFT, with no preprocessing. Reference for
/// measuring how much the pipeline suppresses boundary artefacts.
VectorXd naive_spectral_derivative(SeriesRef series, double dt);

/// order 2: central differences inside, one-sided first-order at both ends.
/// order 1: forward differences, backward at the last sample.
VectorXd fd_derivative(SeriesRef series, double dt, int order = 2);

/// Differentiates each velocity column once. Output is N x n_z.
Eigen::MatrixXd accel_targets(const integrate::Trajectory& traj, const DiffConfig& config = {});

/// Hybrid estimate for a single series (spectral interior, finite differences
/// cross-faded linearly over the boundary margin).
VectorXd hybrid_derivative(SeriesRef series, double dt, const DiffConfig& config = {});

}  // namespace fnode::diffest
