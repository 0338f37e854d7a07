#pragma once

#include <vector>

#include "ranet/tensor.hpp"

// Forward and backward kernels for every network operation. All functions are
// pure (no global state) and safe to call concurrently on distinct tensors.
// Backward kernels accumulate (+=) into the provided gradient tensors; null
// outputs skip that gradient entirely.

namespace ranet::kernels {

enum class Padding { same, valid };

struct ConvGeometry {
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

// Output size and padding for a convolution-style window sweep.
// same: out = ceil(in/stride), asymmetric padding puts the extra row/column
// at the bottom/right. valid: out = floor((in-k)/stride) + 1.
ConvGeometry conv2d_geometry(int in_h, int in_w, int kh, int kw, int stride, Padding pad);

// Cross-correlation (no kernel flip). x:[N,C,H,W] w:[K,C,kh,kw] b:[K].
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, Padding pad);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gy, int stride, Padding pad,
                     Tensor* gx, Tensor* gw, Tensor* gb);

// Max pooling; ties go to the first occurrence in row-major scan order.
// argmax, when given, receives the flat input index feeding each output.
Tensor maxpool2d_forward(const Tensor& x, int window, int stride, std::vector<int>* argmax = nullptr);
void maxpool2d_backward(const Tensor& x, const Tensor& gy, const std::vector<int>& argmax, Tensor* gx);

// Average pooling; window must divide both spatial dims (window == dim is the
// global pool).
Tensor avgpool2d_forward(const Tensor& x, int window);
void avgpool2d_backward(const Tensor& x, const Tensor& gy, int window, Tensor* gx);

struct BatchNormSaved {
  std::vector<float> mean;     // per channel, batch statistics used forward
  std::vector<float> inv_std;  // per channel, 1/sqrt(var + eps)
};

// Train mode: normalize with batch statistics over (N,H,W) per channel and
// update running stats in place: running = momentum*running + (1-momentum)*batch.
Tensor batchnorm2d_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, float eps, float momentum,
                         BatchNormSaved* saved);
Tensor batchnorm2d_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& running_mean, const Tensor& running_var, float eps);
void batchnorm2d_train_backward(const Tensor& x, const Tensor& gamma, const Tensor& gy,
                                const BatchNormSaved& saved, Tensor* gx, Tensor* ggamma, Tensor* gbeta);
void batchnorm2d_eval_backward(const Tensor& x, const Tensor& gamma, const Tensor& gy,
                               const Tensor& running_mean, const Tensor& running_var, float eps,
                               Tensor* gx, Tensor* ggamma, Tensor* gbeta);

Tensor relu_forward(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& gy, Tensor* gx);

Tensor sigmoid_forward(const Tensor& x);
void sigmoid_backward(const Tensor& y, const Tensor& gy, Tensor* gx);  // takes forward output

// Row softmax with per-row max subtraction. x:[N,C].
Tensor softmax_forward(const Tensor& x);
void softmax_backward(const Tensor& y, const Tensor& gy, Tensor* gx);

// Bilinear resampling with half-pixel source mapping
// src = (dst + 0.5) * in/out - 0.5, clamped to the source extent.
Tensor resize_bilinear_forward(const Tensor& x, int out_h, int out_w);
void resize_bilinear_backward(const Tensor& x, const Tensor& gy, Tensor* gx);

// 2x upsampling, the out = 2*in special case of the resize above.
Tensor upsample_bilinear2x_forward(const Tensor& x);
void upsample_bilinear2x_backward(const Tensor& x, const Tensor& gy, Tensor* gx);

// x:[N,D] w:[D,M] b:[M] -> x.w + b.
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor* gx, Tensor* gw, Tensor* gb);

// Elementwise; shapes must match exactly (no broadcasting).
Tensor add_forward(const Tensor& a, const Tensor& b);
Tensor mul_forward(const Tensor& a, const Tensor& b);
Tensor add_scalar_forward(const Tensor& a, float s);

// Mean binary cross-entropy over all N*C terms, probabilities clipped to
// [1e-7, 1-1e-7]. Gradient is zero where the clip is active.
float bce_loss_forward(const Tensor& probs, const Tensor& targets);
void bce_loss_backward(const Tensor& probs, const Tensor& targets, float gloss, Tensor* gprobs);

}  // namespace ranet::kernels
