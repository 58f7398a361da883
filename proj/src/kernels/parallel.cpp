#include <algorithm>
#include <cmath>
#include <cstring>

#include "vpp/kernels.hpp"

namespace vpp::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long kParallelWork = 1L << 15;
}  // namespace

void gemm_nn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate) {
#pragma omp parallel for schedule(static) if (long(n) * k * m > kParallelWork)
  for (int i = 0; i < n; ++i) {
    double* ci = c + std::size_t(i) * m;
    if (!accumulate) std::fill(ci, ci + m, 0.0);
    const double* ai = a + std::size_t(i) * k;
    for (int p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      const double* bp = b + std::size_t(p) * m;
      for (int j = 0; j < m; ++j) ci[j] += s * bp[j];
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate) {
#pragma omp parallel for schedule(static) if (long(n) * k * m > kParallelWork)
  for (int i = 0; i < k; ++i) {
    double* ci = c + std::size_t(i) * m;
    if (!accumulate) std::fill(ci, ci + m, 0.0);
    for (int r = 0; r < n; ++r) {
      const double s = a[std::size_t(r) * k + i];
      if (s == 0.0) continue;
      const double* br = b + std::size_t(r) * m;
      for (int j = 0; j < m; ++j) ci[j] += s * br[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int n, int m, int k, bool accumulate) {
#pragma omp parallel for schedule(static) if (long(n) * k * m > kParallelWork)
  for (int i = 0; i < n; ++i) {
    const double* ai = a + std::size_t(i) * m;
    double* ci = c + std::size_t(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* bj = b + std::size_t(j) * m;
      double s = 0.0;
      for (int p = 0; p < m; ++p) s += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

void resize_bilinear(const double* src, int in_h, int in_w, int channels, double* dst, int out_h,
                     int out_w) {
  const double sy = double(in_h) / out_h;
  const double sx = double(in_w) / out_w;
#pragma omp parallel for schedule(static) if (long(out_h) * out_w * channels > kParallelWork)
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(in_h - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(in_w - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      const double* p00 = src + (std::size_t(y0) * in_w + x0) * channels;
      const double* p01 = src + (std::size_t(y0) * in_w + x1) * channels;
      const double* p10 = src + (std::size_t(y1) * in_w + x0) * channels;
      const double* p11 = src + (std::size_t(y1) * in_w + x1) * channels;
      double* o = dst + (std::size_t(y) * out_w + x) * channels;
      for (int c = 0; c < channels; ++c) {
        const double top = p00[c] + (p01[c] - p00[c]) * wx;
        const double bot = p10[c] + (p11[c] - p10[c]) * wx;
        o[c] = top + (bot - top) * wy;
      }
    }
  }
}

void overlay_blend(const double* x, const double* prompt, const unsigned char* mask,
                   std::size_t pixels, int channels, double alpha, double* out) {
  const double beta = 1.0 - alpha;
#pragma omp parallel for schedule(static) if (pixels * channels > std::size_t(kParallelWork))
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      const double masked = mask[p] ? prompt[i] : 0.0;
      out[i] = alpha * x[i] + beta * masked;
    }
  }
}

void standardize(double* data, std::size_t pixels, int channels, const double* mean,
                 const double* stddev) {
#pragma omp parallel for schedule(static) if (pixels * channels > std::size_t(kParallelWork))
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < channels; ++c) {
      double& v = data[p * channels + c];
      v = (v - mean[c]) / stddev[c];
    }
  }
}

void destandardize(double* data, std::size_t pixels, int channels, const double* mean,
                   const double* stddev) {
#pragma omp parallel for schedule(static) if (pixels * channels > std::size_t(kParallelWork))
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < channels; ++c) {
      double& v = data[p * channels + c];
      v = v * stddev[c] + mean[c];
    }
  }
}

}  // namespace vpp::kernels
