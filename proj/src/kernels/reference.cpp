#include <algorithm>

#include "vpp/kernels.hpp"

namespace vpp::reference {

void gemm_nn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
      c[i * m + j] = accumulate ? c[i * m + j] + s : s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int n, int k, int m, bool accumulate) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += a[r * k + i] * b[r * m + j];
      c[i * m + j] = accumulate ? c[i * m + j] + s : s;
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int n, int m, int k, bool accumulate) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int p = 0; p < m; ++p) s += a[i * m + p] * b[j * m + p];
      c[i * k + j] = accumulate ? c[i * k + j] + s : s;
    }
  }
}

void resize_bilinear(const double* src, int in_h, int in_w, int channels, double* dst, int out_h,
                     int out_w) {
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double fy = (y + 0.5) * in_h / out_h - 0.5;
      double fx = (x + 0.5) * in_w / out_w - 0.5;
      fy = std::clamp(fy, 0.0, double(in_h - 1));
      fx = std::clamp(fx, 0.0, double(in_w - 1));
      const int y0 = int(fy), x0 = int(fx);
      const int y1 = std::min(y0 + 1, in_h - 1), x1 = std::min(x0 + 1, in_w - 1);
      const double wy = fy - y0, wx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        auto px = [&](int yy, int xx) { return src[(yy * in_w + xx) * channels + c]; };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                         wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        dst[(y * out_w + x) * channels + c] = v;
      }
    }
  }
}

void overlay_blend(const double* x, const double* prompt, const unsigned char* mask,
                   std::size_t pixels, int channels, double alpha, double* out) {
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      const double masked = mask[p] ? prompt[i] : 0.0;
      out[i] = alpha * x[i] + (1.0 - alpha) * masked;
    }
  }
}

void standardize(double* data, std::size_t pixels, int channels, const double* mean,
                 const double* stddev) {
  for (std::size_t i = 0; i < pixels * channels; ++i) {
    data[i] = (data[i] - mean[i % channels]) / stddev[i % channels];
  }
}

void destandardize(double* data, std::size_t pixels, int channels, const double* mean,
                   const double* stddev) {
  for (std::size_t i = 0; i < pixels * channels; ++i) {
    data[i] = data[i] * stddev[i % channels] + mean[i % channels];
  }
}

}  // namespace vpp::reference
