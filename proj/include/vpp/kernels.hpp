#pragma once

#include <cstddef>

// Data-parallel inner loops. `kernels` holds the OpenMP versions used by the
// library; `reference` holds plain serial loops kept for testing and for the
// benchmark baseline. Both share signatures. Every parallel kernel partitions
// over output rows only, so each output element is summed in the same order
// regardless of thread count.

namespace vpp::kernels {

// c[n x m] (+)= a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate);
// c[k x m] (+)= a[n x k]^T * b[n x m]
void gemm_tn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate);
// c[n x k] (+)= a[n x m] * b[k x m]^T
void gemm_nt(const double* a, const double* b, double* c, int n, int m, int k, bool accumulate);

// Bilinear resampling with half-pixel centers and edge clamping; interleaved channels.
void resize_bilinear(const double* src, int in_h, int in_w, int channels, double* dst, int out_h,
                     int out_w);

// out = alpha * x + (1 - alpha) * (prompt * mask); mask has one entry per pixel.
void overlay_blend(const double* x, const double* prompt, const unsigned char* mask,
                   std::size_t pixels, int channels, double alpha, double* out);

// In place per-channel (v - mean) / std.
void standardize(double* data, std::size_t pixels, int channels, const double* mean,
                 const double* stddev);
// In place per-channel v * std + mean.
void destandardize(double* data, std::size_t pixels, int channels, const double* mean,
                   const double* stddev);

}  // namespace vpp::kernels

namespace vpp::reference {

void gemm_nn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, int n, int m, int k, bool accumulate);
void resize_bilinear(const double* src, int in_h, int in_w, int channels, double* dst, int out_h,
                     int out_w);
void overlay_blend(const double* x, const double* prompt, const unsigned char* mask,
                   std::size_t pixels, int channels, double alpha, double* out);
void standardize(double* data, std::size_t pixels, int channels, const double* mean,
                 const double* stddev);
void destandardize(double* data, std::size_t pixels, int channels, const double* mean,
                   const double* stddev);

}  // namespace vpp::reference
