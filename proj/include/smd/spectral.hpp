#pragma once

#include "smd/tensor.hpp"

namespace smd {

// Orthonormal DCT-II basis over the time axis. Row 0 is the constant vector
// 1/sqrt(T), so subtracting a constant pose from every frame moves only the
// DC coefficient.
struct DctBasis {
  long frames = 0;
  Tensor w;      // T x T, w[k][t] = c_k cos(pi (2t+1) k / 2T)
  Tensor w_inv;  // transpose of w
};

DctBasis dct_basis(long frames);

// Truncated residual-DCT coefficients plus the reference pose needed for
// lossless decode.
struct SpectralMotion {
  Tensor coeffs;   // N x V x 3
  long kept = 0;   // N
  long frames = 0; // original T
  long history = 0;  // H when built from a history, 0 otherwise
  Tensor x_ref;    // V x 3
};

// chi = W * (X - 1 x_ref^T), keeping the lowest `keep` frequency rows.
SpectralMotion residual_encode(const Tensor& motion, const Tensor& x_ref, const DctBasis& basis,
                               long keep);
// X = W^T * pad(chi) + 1 x_ref^T.
Tensor residual_decode(const SpectralMotion& sm, const DctBasis& basis);

// History padded with future_frames copies of its last frame.
Tensor repeat_pad(const Tensor& history, long future_frames);

// Diffusion condition: repeat-pad the history, then residual-encode against
// its last frame (whose residual is identically zero on the padded part).
SpectralMotion build_condition(const Tensor& history, long future_frames, const DctBasis& basis,
                               long keep);

}  // namespace smd
