#include "ranet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ranet/simd.hpp"

namespace ranet::kernels {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require_nchw(const Tensor& x, const char* what) {
  if (x.ndim() != 4) fail(std::string(what) + " expects a 4-D NCHW tensor, got " + shape_str(x.shape));
}

// Gathers one sample's padded patches into col[P, C*kh*kw], P = out_h*out_w.
// Patch layout is channel-major then kernel row then kernel column, matching
// a flattened weight row.
void im2col(const float* x, int C, int H, int W, int kh, int kw, int stride, const ConvGeometry& g,
            float* col) {
  const int ckk = C * kh * kw;
  for (int oh = 0; oh < g.out_h; ++oh) {
    for (int ow = 0; ow < g.out_w; ++ow) {
      float* row = col + static_cast<std::size_t>(oh * g.out_w + ow) * ckk;
      const int h0 = oh * stride - g.pad_top;
      const int w0 = ow * stride - g.pad_left;
      for (int c = 0; c < C; ++c) {
        const float* plane = x + static_cast<std::size_t>(c) * H * W;
        for (int i = 0; i < kh; ++i) {
          const int h = h0 + i;
          float* dst = row + (c * kh + i) * kw;
          if (h < 0 || h >= H) {
            std::fill(dst, dst + kw, 0.0f);
            continue;
          }
          for (int j = 0; j < kw; ++j) {
            const int w = w0 + j;
            dst[j] = (w >= 0 && w < W) ? plane[h * W + w] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-adds a col gradient back onto the (unpadded) input plane set.
void col2im_acc(const float* col, int C, int H, int W, int kh, int kw, int stride,
                const ConvGeometry& g, float* gx) {
  const int ckk = C * kh * kw;
  for (int oh = 0; oh < g.out_h; ++oh) {
    for (int ow = 0; ow < g.out_w; ++ow) {
      const float* row = col + static_cast<std::size_t>(oh * g.out_w + ow) * ckk;
      const int h0 = oh * stride - g.pad_top;
      const int w0 = ow * stride - g.pad_left;
      for (int c = 0; c < C; ++c) {
        float* plane = gx + static_cast<std::size_t>(c) * H * W;
        for (int i = 0; i < kh; ++i) {
          const int h = h0 + i;
          if (h < 0 || h >= H) continue;
          const float* src = row + (c * kh + i) * kw;
          for (int j = 0; j < kw; ++j) {
            const int w = w0 + j;
            if (w >= 0 && w < W) plane[h * W + w] += src[j];
          }
        }
      }
    }
  }
}

}  // namespace

ConvGeometry conv2d_geometry(int in_h, int in_w, int kh, int kw, int stride, Padding pad) {
  if (kh < 1 || kw < 1) fail("kernel size must be >= 1");
  if (stride < 1) fail("stride must be >= 1");
  ConvGeometry g;
  if (pad == Padding::same) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const int total_h = std::max((g.out_h - 1) * stride + kh - in_h, 0);
    const int total_w = std::max((g.out_w - 1) * stride + kw - in_w, 0);
    g.pad_top = total_h / 2;   // extra row goes to the bottom
    g.pad_left = total_w / 2;  // extra column goes to the right
  } else {
    if (in_h < kh || in_w < kw)
      fail("valid convolution window " + std::to_string(kh) + "x" + std::to_string(kw) +
           " exceeds input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    g.out_h = (in_h - kh) / stride + 1;
    g.out_w = (in_w - kw) / stride + 1;
  }
  return g;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, Padding pad) {
  require_nchw(x, "conv2d");
  require_nchw(w, "conv2d weight");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C)
    fail("conv2d channel mismatch: input " + shape_str(x.shape) + " vs weight " + shape_str(w.shape));
  if (b.ndim() != 1 || b.dim(0) != K)
    fail("conv2d bias " + shape_str(b.shape) + " must be [" + std::to_string(K) + "]");

  const ConvGeometry g = conv2d_geometry(H, W, kh, kw, stride, pad);
  const int P = g.out_h * g.out_w;
  const int ckk = C * kh * kw;
  Tensor out({N, K, g.out_h, g.out_w});
  std::vector<float> col(static_cast<std::size_t>(P) * ckk);
  const auto& S = simd::active();

  for (int n = 0; n < N; ++n) {
    im2col(x.ptr() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh, kw, stride, g, col.data());
    for (int k = 0; k < K; ++k) {
      const float* wrow = w.ptr() + static_cast<std::size_t>(k) * ckk;
      const float bk = b.data[static_cast<std::size_t>(k)];
      float* orow = out.ptr() + (static_cast<std::size_t>(n) * K + k) * P;
      for (int p = 0; p < P; ++p)
        orow[p] = S.dot(wrow, col.data() + static_cast<std::size_t>(p) * ckk, static_cast<std::size_t>(ckk)) + bk;
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy, int stride, Padding pad,
                     Tensor* gx, Tensor* gw, Tensor* gb) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int K = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const ConvGeometry g = conv2d_geometry(H, W, kh, kw, stride, pad);
  const int P = g.out_h * g.out_w;
  const int ckk = C * kh * kw;
  const auto& S = simd::active();

  std::vector<float> col;
  if (gw != nullptr) col.resize(static_cast<std::size_t>(P) * ckk);
  std::vector<float> dcol;
  if (gx != nullptr) dcol.resize(static_cast<std::size_t>(P) * ckk);

  for (int n = 0; n < N; ++n) {
    const float* gyn = gy.ptr() + static_cast<std::size_t>(n) * K * P;
    if (gb != nullptr)
      for (int k = 0; k < K; ++k)
        gb->data[static_cast<std::size_t>(k)] += S.sum(gyn + static_cast<std::size_t>(k) * P, static_cast<std::size_t>(P));

    if (gw != nullptr) {
      im2col(x.ptr() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh, kw, stride, g, col.data());
      for (int p = 0; p < P; ++p) {
        const float* cp = col.data() + static_cast<std::size_t>(p) * ckk;
        for (int k = 0; k < K; ++k) {
          const float gv = gyn[static_cast<std::size_t>(k) * P + p];
          if (gv != 0.0f)
            S.axpy(gw->ptr() + static_cast<std::size_t>(k) * ckk, gv, cp, static_cast<std::size_t>(ckk));
        }
      }
    }

    if (gx != nullptr) {
      std::fill(dcol.begin(), dcol.end(), 0.0f);
      for (int p = 0; p < P; ++p) {
        float* dp = dcol.data() + static_cast<std::size_t>(p) * ckk;
        for (int k = 0; k < K; ++k) {
          const float gv = gyn[static_cast<std::size_t>(k) * P + p];
          if (gv != 0.0f) S.axpy(dp, gv, w.ptr() + static_cast<std::size_t>(k) * ckk, static_cast<std::size_t>(ckk));
        }
      }
      col2im_acc(dcol.data(), C, H, W, kh, kw, stride, g, gx->ptr() + static_cast<std::size_t>(n) * C * H * W);
    }
  }
}

Tensor maxpool2d_forward(const Tensor& x, int window, int stride, std::vector<int>* argmax) {
  require_nchw(x, "maxpool2d");
  if (window < 1 || stride < 1) fail("maxpool2d window and stride must be >= 1");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (window > H || window > W)
    fail("maxpool2d window " + std::to_string(window) + " exceeds spatial dims " + std::to_string(H) + "x" +
         std::to_string(W));
  const int oh = (H - window) / stride + 1;
  const int ow = (W - window) / stride + 1;
  Tensor out({N, C, oh, ow});
  if (argmax != nullptr) argmax->assign(out.numel(), 0);

  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float* plane = x.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++o) {
          const int h0 = i * stride, w0 = j * stride;
          float best = plane[h0 * W + w0];
          int best_idx = h0 * W + w0;
          for (int a = 0; a < window; ++a)
            for (int b = 0; b < window; ++b) {
              const int idx = (h0 + a) * W + (w0 + b);
              if (plane[idx] > best) {  // strict: first occurrence wins ties
                best = plane[idx];
                best_idx = idx;
              }
            }
          out.data[o] = best;
          if (argmax != nullptr) (*argmax)[o] = static_cast<int>(base) + best_idx;
        }
    }
  return out;
}

void maxpool2d_backward(const Tensor& x, const Tensor& gy, const std::vector<int>& argmax, Tensor* gx) {
  (void)x;
  if (gx == nullptr) return;
  for (std::size_t o = 0; o < gy.numel(); ++o)
    gx->data[static_cast<std::size_t>(argmax[o])] += gy.data[o];
}

Tensor avgpool2d_forward(const Tensor& x, int window) {
  require_nchw(x, "avgpool2d");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (window < 1 || H % window != 0 || W % window != 0)
    fail("avgpool2d window " + std::to_string(window) + " must divide spatial dims " + std::to_string(H) + "x" +
         std::to_string(W));
  const int oh = H / window, ow = W / window;
  const float inv = 1.0f / (static_cast<float>(window) * static_cast<float>(window));
  Tensor out({N, C, oh, ow});
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float* plane = x.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++o) {
          float acc = 0.0f;
          for (int a = 0; a < window; ++a)
            for (int b = 0; b < window; ++b) acc += plane[(i * window + a) * W + (j * window + b)];
          out.data[o] = acc * inv;
        }
    }
  return out;
}

void avgpool2d_backward(const Tensor& x, const Tensor& gy, int window, Tensor* gx) {
  if (gx == nullptr) return;
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int oh = H / window, ow = W / window;
  const float inv = 1.0f / (static_cast<float>(window) * static_cast<float>(window));
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      float* plane = gx->ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++o) {
          const float g = gy.data[o] * inv;
          for (int a = 0; a < window; ++a)
            for (int b = 0; b < window; ++b) plane[(i * window + a) * W + (j * window + b)] += g;
        }
    }
}

namespace {

void require_bn_shapes(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_nchw(x, "batchnorm2d");
  const int C = x.dim(1);
  if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C)
    fail("batchnorm2d gamma/beta must be [" + std::to_string(C) + "], got " + shape_str(gamma.shape) + " and " +
         shape_str(beta.shape));
}

}  // namespace

Tensor batchnorm2d_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, float eps, float momentum,
                         BatchNormSaved* saved) {
  require_bn_shapes(x, gamma, beta);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const double m = static_cast<double>(N) * static_cast<double>(plane);
  const auto& S = simd::active();

  Tensor out(x.shape);
  std::vector<float> tmp(plane);
  if (saved != nullptr) {
    saved->mean.assign(static_cast<std::size_t>(C), 0.0f);
    saved->inv_std.assign(static_cast<std::size_t>(C), 0.0f);
  }

  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n)
      acc += S.sum(x.ptr() + (static_cast<std::size_t>(n) * C + c) * plane, plane);
    const float mean = static_cast<float>(acc / m);

    double var_acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const float* p = x.ptr() + (static_cast<std::size_t>(n) * C + c) * plane;
      S.axb(tmp.data(), p, 1.0f, -mean, plane);
      var_acc += S.dot(tmp.data(), tmp.data(), plane);
    }
    const float var = static_cast<float>(var_acc / m);
    const float inv_std = 1.0f / std::sqrt(var + eps);

    const float a = gamma.data[static_cast<std::size_t>(c)] * inv_std;
    const float b = beta.data[static_cast<std::size_t>(c)] - mean * a;
    for (int n = 0; n < N; ++n)
      S.axb(out.ptr() + (static_cast<std::size_t>(n) * C + c) * plane,
            x.ptr() + (static_cast<std::size_t>(n) * C + c) * plane, a, b, plane);

    running_mean.data[static_cast<std::size_t>(c)] =
        momentum * running_mean.data[static_cast<std::size_t>(c)] + (1.0f - momentum) * mean;
    running_var.data[static_cast<std::size_t>(c)] =
        momentum * running_var.data[static_cast<std::size_t>(c)] + (1.0f - momentum) * var;

    if (saved != nullptr) {
      saved->mean[static_cast<std::size_t>(c)] = mean;
      saved->inv_std[static_cast<std::size_t>(c)] = inv_std;
    }
  }
  return out;
}

Tensor batchnorm2d_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& running_mean, const Tensor& running_var, float eps) {
  require_bn_shapes(x, gamma, beta);
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const auto& S = simd::active();
  Tensor out(x.shape);
  for (int c = 0; c < C; ++c) {
    const float inv_std = 1.0f / std::sqrt(running_var.data[static_cast<std::size_t>(c)] + eps);
    const float a = gamma.data[static_cast<std::size_t>(c)] * inv_std;
    const float b = beta.data[static_cast<std::size_t>(c)] - running_mean.data[static_cast<std::size_t>(c)] * a;
    for (int n = 0; n < N; ++n)
      S.axb(out.ptr() + (static_cast<std::size_t>(n) * C + c) * plane,
            x.ptr() + (static_cast<std::size_t>(n) * C + c) * plane, a, b, plane);
  }
  return out;
}

void batchnorm2d_train_backward(const Tensor& x, const Tensor& gamma, const Tensor& gy,
                                const BatchNormSaved& saved, Tensor* gx, Tensor* ggamma, Tensor* gbeta) {
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const double m = static_cast<double>(N) * static_cast<double>(plane);
  const auto& S = simd::active();

  std::vector<float> xhat(plane);
  std::vector<float> part(plane);
  for (int c = 0; c < C; ++c) {
    const float mean = saved.mean[static_cast<std::size_t>(c)];
    const float inv_std = saved.inv_std[static_cast<std::size_t>(c)];

    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
      sum_dy += S.sum(gy.ptr() + off, plane);
      S.axb(xhat.data(), x.ptr() + off, inv_std, -mean * inv_std, plane);
      sum_dy_xhat += S.dot(gy.ptr() + off, xhat.data(), plane);
    }
    if (gbeta != nullptr) gbeta->data[static_cast<std::size_t>(c)] += static_cast<float>(sum_dy);
    if (ggamma != nullptr) ggamma->data[static_cast<std::size_t>(c)] += static_cast<float>(sum_dy_xhat);

    if (gx != nullptr) {
      const float a = gamma.data[static_cast<std::size_t>(c)] * inv_std;
      const float c1 = static_cast<float>(sum_dy / m);
      const float c2 = static_cast<float>(sum_dy_xhat / m);
      for (int n = 0; n < N; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
        S.axb(xhat.data(), x.ptr() + off, inv_std, -mean * inv_std, plane);
        // dx += a * (dy - c1 - xhat * c2)
        S.axb(part.data(), gy.ptr() + off, a, -a * c1, plane);
        S.axpy(part.data(), -a * c2, xhat.data(), plane);
        S.add(gx->ptr() + off, gx->ptr() + off, part.data(), plane);
      }
    }
  }
}

void batchnorm2d_eval_backward(const Tensor& x, const Tensor& gamma, const Tensor& gy,
                               const Tensor& running_mean, const Tensor& running_var, float eps,
                               Tensor* gx, Tensor* ggamma, Tensor* gbeta) {
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const auto& S = simd::active();
  std::vector<float> xhat(plane);
  for (int c = 0; c < C; ++c) {
    const float mean = running_mean.data[static_cast<std::size_t>(c)];
    const float inv_std = 1.0f / std::sqrt(running_var.data[static_cast<std::size_t>(c)] + eps);
    const float a = gamma.data[static_cast<std::size_t>(c)] * inv_std;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
      if (gbeta != nullptr) gbeta->data[static_cast<std::size_t>(c)] += S.sum(gy.ptr() + off, plane);
      if (ggamma != nullptr) {
        S.axb(xhat.data(), x.ptr() + off, inv_std, -mean * inv_std, plane);
        ggamma->data[static_cast<std::size_t>(c)] += S.dot(gy.ptr() + off, xhat.data(), plane);
      }
      if (gx != nullptr) S.axpy(gx->ptr() + off, a, gy.ptr() + off, plane);
    }
  }
}

Tensor relu_forward(const Tensor& x) {
  Tensor out(x.shape);
  simd::active().relu(out.ptr(), x.ptr(), x.numel());
  return out;
}

void relu_backward(const Tensor& x, const Tensor& gy, Tensor* gx) {
  if (gx == nullptr) return;
  simd::active().relu_grad_acc(gx->ptr(), x.ptr(), gy.ptr(), x.numel());
}

Tensor sigmoid_forward(const Tensor& x) {
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = 1.0f / (1.0f + std::exp(-x.data[i]));
  return out;
}

void sigmoid_backward(const Tensor& y, const Tensor& gy, Tensor* gx) {
  if (gx == nullptr) return;
  for (std::size_t i = 0; i < y.numel(); ++i) gx->data[i] += y.data[i] * (1.0f - y.data[i]) * gy.data[i];
}

Tensor softmax_forward(const Tensor& x) {
  if (x.ndim() != 2) fail("softmax expects a 2-D batch x classes tensor, got " + shape_str(x.shape));
  const int N = x.dim(0), C = x.dim(1);
  const auto& S = simd::active();
  Tensor out(x.shape);
  for (int n = 0; n < N; ++n) {
    const float* row = x.ptr() + static_cast<std::size_t>(n) * C;
    float* orow = out.ptr() + static_cast<std::size_t>(n) * C;
    const float mx = S.max(row, static_cast<std::size_t>(C));
    float acc = 0.0f;
    for (int c = 0; c < C; ++c) {
      orow[c] = std::exp(row[c] - mx);
      acc += orow[c];
    }
    const float inv = 1.0f / acc;
    for (int c = 0; c < C; ++c) orow[c] *= inv;
  }
  return out;
}

void softmax_backward(const Tensor& y, const Tensor& gy, Tensor* gx) {
  if (gx == nullptr) return;
  const int N = y.dim(0), C = y.dim(1);
  for (int n = 0; n < N; ++n) {
    const float* yr = y.ptr() + static_cast<std::size_t>(n) * C;
    const float* gr = gy.ptr() + static_cast<std::size_t>(n) * C;
    float* xr = gx->ptr() + static_cast<std::size_t>(n) * C;
    float s = 0.0f;
    for (int c = 0; c < C; ++c) s += gr[c] * yr[c];
    for (int c = 0; c < C; ++c) xr[c] += yr[c] * (gr[c] - s);
  }
}

namespace {

struct Lerp {
  int lo, hi;
  float w_hi;  // weight of hi tap; lo gets 1 - w_hi
};

// Half-pixel source coordinate, clamped to the edge.
Lerp resample_tap(int dst, int src_extent, int dst_extent) {
  const float s = (static_cast<float>(dst) + 0.5f) * static_cast<float>(src_extent) / static_cast<float>(dst_extent) - 0.5f;
  const float sc = std::max(s, 0.0f);
  int lo = static_cast<int>(sc);
  if (lo > src_extent - 1) lo = src_extent - 1;
  const int hi = std::min(lo + 1, src_extent - 1);
  return {lo, hi, sc - static_cast<float>(lo)};
}

std::vector<Lerp> resample_taps(int src_extent, int dst_extent) {
  std::vector<Lerp> taps(static_cast<std::size_t>(dst_extent));
  for (int d = 0; d < dst_extent; ++d) taps[static_cast<std::size_t>(d)] = resample_tap(d, src_extent, dst_extent);
  return taps;
}

}  // namespace

Tensor resize_bilinear_forward(const Tensor& x, int out_h, int out_w) {
  require_nchw(x, "resize_bilinear");
  if (out_h < 1 || out_w < 1) fail("resize_bilinear target size must be >= 1");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out({N, C, out_h, out_w});
  const auto hx = resample_taps(H, out_h);
  const auto wx = resample_taps(W, out_w);

  for (int nc = 0; nc < N * C; ++nc) {
    const float* src = x.ptr() + static_cast<std::size_t>(nc) * H * W;
    float* dst = out.ptr() + static_cast<std::size_t>(nc) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      const Lerp& a = hx[static_cast<std::size_t>(i)];
      for (int j = 0; j < out_w; ++j) {
        const Lerp& b = wx[static_cast<std::size_t>(j)];
        const float v00 = src[a.lo * W + b.lo], v01 = src[a.lo * W + b.hi];
        const float v10 = src[a.hi * W + b.lo], v11 = src[a.hi * W + b.hi];
        const float top = v00 + (v01 - v00) * b.w_hi;
        const float bot = v10 + (v11 - v10) * b.w_hi;
        dst[i * out_w + j] = top + (bot - top) * a.w_hi;
      }
    }
  }
  return out;
}

void resize_bilinear_backward(const Tensor& x, const Tensor& gy, Tensor* gx) {
  if (gx == nullptr) return;
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int out_h = gy.dim(2), out_w = gy.dim(3);
  const auto hx = resample_taps(H, out_h);
  const auto wx = resample_taps(W, out_w);
  for (int nc = 0; nc < N * C; ++nc) {
    float* dst = gx->ptr() + static_cast<std::size_t>(nc) * H * W;
    const float* g = gy.ptr() + static_cast<std::size_t>(nc) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      const Lerp& a = hx[static_cast<std::size_t>(i)];
      for (int j = 0; j < out_w; ++j) {
        const Lerp& b = wx[static_cast<std::size_t>(j)];
        const float gv = g[i * out_w + j];
        dst[a.lo * W + b.lo] += (1.0f - a.w_hi) * (1.0f - b.w_hi) * gv;
        dst[a.lo * W + b.hi] += (1.0f - a.w_hi) * b.w_hi * gv;
        dst[a.hi * W + b.lo] += a.w_hi * (1.0f - b.w_hi) * gv;
        dst[a.hi * W + b.hi] += a.w_hi * b.w_hi * gv;
      }
    }
  }
}

Tensor upsample_bilinear2x_forward(const Tensor& x) {
  require_nchw(x, "upsample_bilinear2x");
  return resize_bilinear_forward(x, 2 * x.dim(2), 2 * x.dim(3));
}

void upsample_bilinear2x_backward(const Tensor& x, const Tensor& gy, Tensor* gx) {
  resize_bilinear_backward(x, gy, gx);
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(0))
    fail("dense dimension mismatch: input " + shape_str(x.shape) + " vs weight " + shape_str(w.shape));
  const int N = x.dim(0), D = x.dim(1), M = w.dim(1);
  if (b.ndim() != 1 || b.dim(0) != M)
    fail("dense bias " + shape_str(b.shape) + " must be [" + std::to_string(M) + "]");
  const auto& S = simd::active();
  Tensor out({N, M});
  for (int n = 0; n < N; ++n) {
    float* orow = out.ptr() + static_cast<std::size_t>(n) * M;
    std::copy(b.data.begin(), b.data.end(), orow);
    const float* xrow = x.ptr() + static_cast<std::size_t>(n) * D;
    for (int d = 0; d < D; ++d)
      if (xrow[d] != 0.0f)
        S.axpy(orow, xrow[d], w.ptr() + static_cast<std::size_t>(d) * M, static_cast<std::size_t>(M));
  }
  return out;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor* gx, Tensor* gw, Tensor* gb) {
  const int N = x.dim(0), D = x.dim(1), M = w.dim(1);
  const auto& S = simd::active();
  for (int n = 0; n < N; ++n) {
    const float* xrow = x.ptr() + static_cast<std::size_t>(n) * D;
    const float* grow = gy.ptr() + static_cast<std::size_t>(n) * M;
    if (gb != nullptr) S.axpy(gb->ptr(), 1.0f, grow, static_cast<std::size_t>(M));
    for (int d = 0; d < D; ++d) {
      const float* wrow = w.ptr() + static_cast<std::size_t>(d) * M;
      if (gx != nullptr)
        gx->data[static_cast<std::size_t>(n) * D + d] += S.dot(grow, wrow, static_cast<std::size_t>(M));
      if (gw != nullptr && xrow[d] != 0.0f)
        S.axpy(gw->ptr() + static_cast<std::size_t>(d) * M, xrow[d], grow, static_cast<std::size_t>(M));
    }
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    fail(std::string(what) + " shape mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace

Tensor add_forward(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape);
  simd::active().add(out.ptr(), a.ptr(), b.ptr(), a.numel());
  return out;
}

Tensor mul_forward(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape);
  simd::active().mul(out.ptr(), a.ptr(), b.ptr(), a.numel());
  return out;
}

Tensor add_scalar_forward(const Tensor& a, float s) {
  Tensor out(a.shape);
  simd::active().axb(out.ptr(), a.ptr(), 1.0f, s, a.numel());
  return out;
}

namespace {

constexpr float kBceClipLo = 1e-7f;
constexpr float kBceClipHi = 1.0f - 1e-7f;

}  // namespace

float bce_loss_forward(const Tensor& probs, const Tensor& targets) {
  require_same_shape(probs, targets, "bce_loss");
  if (probs.ndim() != 2) fail("bce_loss expects 2-D batch x classes tensors, got " + shape_str(probs.shape));
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.numel(); ++i) {
    const double p = std::clamp(probs.data[i], kBceClipLo, kBceClipHi);
    const double y = targets.data[i];
    acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return static_cast<float>(-acc / static_cast<double>(probs.numel()));
}

void bce_loss_backward(const Tensor& probs, const Tensor& targets, float gloss, Tensor* gprobs) {
  if (gprobs == nullptr) return;
  const float scale = -gloss / static_cast<float>(probs.numel());
  for (std::size_t i = 0; i < probs.numel(); ++i) {
    const float p = probs.data[i];
    if (p < kBceClipLo || p > kBceClipHi) continue;  // clip region: zero gradient
    const float y = targets.data[i];
    gprobs->data[i] += scale * (y / p - (1.0f - y) / (1.0f - p));
  }
}

}  // namespace ranet::kernels
