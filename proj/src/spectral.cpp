#include "smd/spectral.hpp"

#include <cmath>

#include "smd/errors.hpp"
#include "smd/kernels.hpp"
#include "smd/parallel.hpp"

namespace smd {

DctBasis dct_basis(long frames) {
  if (frames < 1) throw InvalidSize("dct_basis requires T >= 1");
  DctBasis b;
  b.frames = frames;
  b.w = Tensor({frames, frames});
  const double pi = 3.14159265358979323846264338327950288;
  double c0 = 1.0 / std::sqrt(static_cast<double>(frames));
  double ck = std::sqrt(2.0 / static_cast<double>(frames));
  for (long k = 0; k < frames; ++k) {
    double c = k == 0 ? c0 : ck;
    for (long t = 0; t < frames; ++t)
      b.w.at(k, t) = c * std::cos(pi * (2 * t + 1) * k / (2.0 * frames));
  }
  b.w_inv = Tensor({frames, frames});
  for (long i = 0; i < frames; ++i)
    for (long j = 0; j < frames; ++j) b.w_inv.at(i, j) = b.w.at(j, i);
  return b;
}

SpectralMotion residual_encode(const Tensor& motion, const Tensor& x_ref, const DctBasis& basis,
                               long keep) {
  if (motion.rank() != 3 || motion.shape[2] != 3)
    throw ShapeMismatch("motion must be T x V x 3, got " + motion.shape_str());
  long t = motion.shape[0], v = motion.shape[1];
  if (t != basis.frames)
    throw ShapeMismatch("motion has " + std::to_string(t) + " frames, basis expects " +
                        std::to_string(basis.frames));
  if (x_ref.numel() != v * 3)
    throw ShapeMismatch("x_ref must be V x 3, got " + x_ref.shape_str());
  if (keep < 0 || keep > t) throw ShapeMismatch("keep must be in [0, T]");

  long d = v * 3;
  Tensor residual({t, v, 3});
  for (long i = 0; i < t; ++i)
    for (long j = 0; j < d; ++j) residual.data[i * d + j] = motion.data[i * d + j] - x_ref.data[j];

  SpectralMotion sm;
  sm.kept = keep;
  sm.frames = t;
  sm.x_ref = x_ref.reshaped({v, 3});
  sm.coeffs = Tensor({keep, v, 3});
  // Only the first `keep` rows of W are needed.
  kern::matmul(basis.w.data.data(), residual.data.data(), sm.coeffs.data.data(), keep, t, d,
               threads());
  return sm;
}

Tensor residual_decode(const SpectralMotion& sm, const DctBasis& basis) {
  if (sm.frames != basis.frames)
    throw ShapeMismatch("spectral motion frames " + std::to_string(sm.frames) +
                        " do not match basis " + std::to_string(basis.frames));
  if (sm.coeffs.rank() != 3 || sm.coeffs.shape[0] != sm.kept)
    throw ShapeMismatch("coeffs must be N x V x 3, got " + sm.coeffs.shape_str());
  long t = sm.frames, v = sm.coeffs.shape[1], n = sm.kept, d = v * 3;

  // X = W^T-restricted-to-first-N-columns * chi; materialize the T x N slice.
  Tensor wt({t, n});
  for (long i = 0; i < t; ++i)
    for (long k = 0; k < n; ++k) wt.at(i, k) = basis.w.at(k, i);
  Tensor out({t, v, 3});
  if (n > 0)
    kern::matmul(wt.data.data(), sm.coeffs.data.data(), out.data.data(), t, n, d, threads());
  for (long i = 0; i < t; ++i)
    for (long j = 0; j < d; ++j) out.data[i * d + j] += sm.x_ref.data[j];
  return out;
}

Tensor repeat_pad(const Tensor& history, long future_frames) {
  if (history.rank() != 3 || history.shape[2] != 3)
    throw ShapeMismatch("history must be H x V x 3, got " + history.shape_str());
  long h = history.shape[0], v = history.shape[1], d = v * 3;
  if (h < 1) throw ShapeMismatch("history must contain at least one frame");
  Tensor out({h + future_frames, v, 3});
  std::copy(history.data.begin(), history.data.end(), out.data.begin());
  const double* last = history.data.data() + (h - 1) * d;
  for (long i = h; i < h + future_frames; ++i)
    std::copy(last, last + d, out.data.data() + i * d);
  return out;
}

SpectralMotion build_condition(const Tensor& history, long future_frames, const DctBasis& basis,
                               long keep) {
  long h = history.shape[0];
  if (h + future_frames != basis.frames)
    throw ShapeMismatch("H + F = " + std::to_string(h + future_frames) +
                        " does not match basis frames " + std::to_string(basis.frames));
  Tensor padded = repeat_pad(history, future_frames);
  long v = history.shape[1], d = v * 3;
  Tensor x_ref({v, 3});
  std::copy(history.data.data() + (h - 1) * d, history.data.data() + h * d, x_ref.data.begin());
  SpectralMotion sm = residual_encode(padded, x_ref, basis, keep);
  sm.history = h;
  return sm;
}

}  // namespace smd
