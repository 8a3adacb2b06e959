#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "occdist/parallel.hpp"
#include "occdist/tensor.hpp"

namespace occdist {

namespace detail {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
bool track(const BasicTape<T>* tape, bool any_requires) {
  return tape != nullptr && any_requires;
}

// Scatters a padded-column matrix back onto an image gradient (the adjoint of
// im2col). cols is [C*kh*kw x outH*outW], row-major.
template <typename T>
void col2im_accumulate(const std::vector<T>& cols, T* grad, std::size_t channels,
                       std::size_t height, std::size_t width, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad, std::size_t out_h,
                       std::size_t out_w) {
  const std::size_t positions = out_h * out_w;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        const T* src = cols.data() + row * positions;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            grad[(c * height + static_cast<std::size_t>(ih)) * width +
                 static_cast<std::size_t>(iw)] += src[oh * out_w + ow];
          }
        }
      }
    }
  }
}

template <typename T>
void im2col(const T* image, std::vector<T>& cols, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t pad, std::size_t out_h, std::size_t out_w) {
  const std::size_t positions = out_h * out_w;
  cols.assign(channels * kh * kw * positions, T(0));
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        T* dst = cols.data() + row * positions;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          const T* src_row = image + (c * height + static_cast<std::size_t>(ih)) * width;
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            dst[oh * out_w + ow] = src_row[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

}  // namespace detail

// C[m x n] = A[m x k] * B[k x n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b,
                      BasicTape<T>* tape = nullptr) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  BasicTensor<T> out({a.dim(0), b.dim(1)});
  detail::ConstMatMap<T> ma(a.data().data(), m, k);
  detail::ConstMatMap<T> mb(b.data().data(), k, n);
  detail::MatMap<T> mc(out.data().data(), m, n);
  mc.noalias() = ma * mb;

  if (detail::track(tape, a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a = a, b = b, out, m, k, n]() mutable {
      detail::ConstMatMap<T> gc(out.grad().data(), m, n);
      if (a.requires_grad()) {
        detail::ConstMatMap<T> mb(b.data().data(), k, n);
        detail::MatMap<T> ga(a.grad().data(), m, k);
        ga.noalias() += gc * mb.transpose();
      }
      if (b.requires_grad()) {
        detail::ConstMatMap<T> ma(a.data().data(), m, k);
        detail::MatMap<T> gb(b.grad().data(), k, n);
        gb.noalias() += ma.transpose() * gc;
      }
    });
  }
  return out;
}

// Cross-correlation convolution. input is [C,H,W] or [B,C,H,W]; kernels are
// [Cout,Cin,kh,kw]. Output spatial size is floor((H+2p-kh)/stride)+1. The
// per-image GEMMs run in parallel; gradient reduction over the batch is
// serialized in image order so results do not depend on the schedule.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, int stride,
                      int padding, BasicTape<T>* tape = nullptr) {
  if (stride < 1) throw ParameterError("conv2d: stride must be positive");
  if (padding < 0) throw ParameterError("conv2d: padding must be non-negative");
  if (kernels.rank() != 4) {
    throw DimensionError("conv2d: kernels must be [Cout,Cin,kh,kw], got " +
                         shape_to_string(kernels.shape()));
  }
  const bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3) {
    throw DimensionError("conv2d: input must be [C,H,W] or [B,C,H,W], got " +
                         shape_to_string(input.shape()));
  }
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t cin = input.dim(batched ? 1 : 0);
  const std::size_t height = input.dim(batched ? 2 : 1);
  const std::size_t width = input.dim(batched ? 3 : 2);
  const std::size_t cout = kernels.dim(0);
  const std::size_t kh = kernels.dim(2);
  const std::size_t kw = kernels.dim(3);
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv2d: kernel channels " + shape_to_string(kernels.shape()) +
                         " do not match input " + shape_to_string(input.shape()));
  }
  const std::size_t pad = static_cast<std::size_t>(padding);
  const std::size_t str = static_cast<std::size_t>(stride);
  if (kh > height + 2 * pad || kw > width + 2 * pad) {
    throw DimensionError("conv2d: kernel " + shape_to_string(kernels.shape()) +
                         " larger than padded input " + shape_to_string(input.shape()));
  }
  const std::size_t out_h = (height + 2 * pad - kh) / str + 1;
  const std::size_t out_w = (width + 2 * pad - kw) / str + 1;
  const std::size_t positions = out_h * out_w;
  const std::size_t krows = cin * kh * kw;
  const std::size_t image_size = cin * height * width;
  const std::size_t out_image_size = cout * positions;

  BasicTensor<T> out(batched ? std::vector<std::size_t>{batch, cout, out_h, out_w}
                             : std::vector<std::size_t>{cout, out_h, out_w});

  const bool rec = detail::track(tape, input.requires_grad() || kernels.requires_grad());
  // im2col buffers are kept for the backward pass when recording.
  auto cols_cache = std::make_shared<std::vector<std::vector<T>>>(batch);

  parallel_for(batch, [&](std::size_t img) {
    std::vector<T> local_cols;
    std::vector<T>& cols = rec ? (*cols_cache)[img] : local_cols;
    detail::im2col(input.data().data() + img * image_size, cols, cin, height, width, kh, kw,
                   str, pad, out_h, out_w);
    detail::ConstMatMap<T> mk(kernels.data().data(), static_cast<Eigen::Index>(cout),
                              static_cast<Eigen::Index>(krows));
    detail::ConstMatMap<T> mcols(cols.data(), static_cast<Eigen::Index>(krows),
                                 static_cast<Eigen::Index>(positions));
    detail::MatMap<T> mout(out.data().data() + img * out_image_size,
                           static_cast<Eigen::Index>(cout),
                           static_cast<Eigen::Index>(positions));
    mout.noalias() = mk * mcols;
  });

  if (rec) {
    out.set_requires_grad(true);
    tape->record([input = input, kernels = kernels, out, cols_cache, batch, cin, height, width,
                  cout, kh, kw, str, pad, out_h, out_w, positions, krows, image_size,
                  out_image_size]() mutable {
      std::vector<std::vector<T>> kernel_grads;
      if (kernels.requires_grad()) kernel_grads.assign(batch, std::vector<T>());
      parallel_for(batch, [&](std::size_t img) {
        const std::vector<T>& cols = (*cols_cache)[img];
        detail::ConstMatMap<T> gout(out.grad().data() + img * out_image_size,
                                    static_cast<Eigen::Index>(cout),
                                    static_cast<Eigen::Index>(positions));
        if (kernels.requires_grad()) {
          kernel_grads[img].assign(cout * krows, T(0));
          detail::ConstMatMap<T> mcols(cols.data(), static_cast<Eigen::Index>(krows),
                                       static_cast<Eigen::Index>(positions));
          detail::MatMap<T> gk(kernel_grads[img].data(), static_cast<Eigen::Index>(cout),
                               static_cast<Eigen::Index>(krows));
          gk.noalias() = gout * mcols.transpose();
        }
        if (input.requires_grad()) {
          std::vector<T> gcols(krows * positions);
          detail::ConstMatMap<T> mk(kernels.data().data(), static_cast<Eigen::Index>(cout),
                                    static_cast<Eigen::Index>(krows));
          detail::MatMap<T> gc(gcols.data(), static_cast<Eigen::Index>(krows),
                               static_cast<Eigen::Index>(positions));
          gc.noalias() = mk.transpose() * gout;
          detail::col2im_accumulate(gcols, input.grad().data() + img * image_size, cin, height,
                                    width, kh, kw, str, pad, out_h, out_w);
        }
      });
      if (kernels.requires_grad()) {
        auto& kg = kernels.grad();
        for (std::size_t img = 0; img < batch; ++img) {
          const auto& part = kernel_grads[img];
          for (std::size_t i = 0; i < part.size(); ++i) kg[i] += part[i];
        }
      }
    });
  }
  return out;
}

// Elementwise max(0, x). Subgradient at 0 is 0.
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x, BasicTape<T>* tape = nullptr) {
  BasicTensor<T> out(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] > T(0) ? xd[i] : T(0);
  if (detail::track(tape, x.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, out]() mutable {
      const auto& xd = x.data();
      const auto& og = out.grad();
      auto& xg = x.grad();
      for (std::size_t i = 0; i < xd.size(); ++i)
        if (xd[i] > T(0)) xg[i] += og[i];
    });
  }
  return out;
}

// Max pooling over [C,H,W] or [B,C,H,W]. The gradient is routed to the argmax
// position; ties break to the first element in row-major order.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& x, int window, int stride,
                         BasicTape<T>* tape = nullptr) {
  if (window < 1 || stride < 1) {
    throw ParameterError("maxpool2d: window and stride must be positive");
  }
  const bool batched = x.rank() == 4;
  if (!batched && x.rank() != 3) {
    throw DimensionError("maxpool2d: input must be [C,H,W] or [B,C,H,W], got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t channels = x.dim(batched ? 1 : 0);
  const std::size_t height = x.dim(batched ? 2 : 1);
  const std::size_t width = x.dim(batched ? 3 : 2);
  const std::size_t win = static_cast<std::size_t>(window);
  const std::size_t str = static_cast<std::size_t>(stride);
  if (win > height || win > width) {
    throw DimensionError("maxpool2d: window " + std::to_string(window) +
                         " exceeds input " + shape_to_string(x.shape()));
  }
  const std::size_t out_h = (height - win) / str + 1;
  const std::size_t out_w = (width - win) / str + 1;
  BasicTensor<T> out(batched ? std::vector<std::size_t>{batch, channels, out_h, out_w}
                             : std::vector<std::size_t>{channels, out_h, out_w});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());

  const std::size_t planes = batch * channels;
  parallel_for(planes, [&](std::size_t plane) {
    const T* src = x.data().data() + plane * height * width;
    T* dst = out.data().data() + plane * out_h * out_w;
    std::uint32_t* arg = argmax->data() + plane * out_h * out_w;
    for (std::size_t oh = 0; oh < out_h; ++oh) {
      for (std::size_t ow = 0; ow < out_w; ++ow) {
        std::size_t best = (oh * str) * width + (ow * str);
        T best_val = src[best];
        for (std::size_t ki = 0; ki < win; ++ki) {
          for (std::size_t kj = 0; kj < win; ++kj) {
            const std::size_t idx = (oh * str + ki) * width + (ow * str + kj);
            if (src[idx] > best_val) {
              best_val = src[idx];
              best = idx;
            }
          }
        }
        dst[oh * out_w + ow] = best_val;
        arg[oh * out_w + ow] = static_cast<std::uint32_t>(best);
      }
    }
  });

  if (detail::track(tape, x.requires_grad())) {
    out.set_requires_grad(true);
    const std::size_t plane_in = height * width;
    const std::size_t plane_out = out_h * out_w;
    tape->record([x = x, out, argmax, planes, plane_in, plane_out]() mutable {
      const auto& og = out.grad();
      auto& xg = x.grad();
      for (std::size_t plane = 0; plane < planes; ++plane) {
        for (std::size_t i = 0; i < plane_out; ++i) {
          xg[plane * plane_in + (*argmax)[plane * plane_out + i]] += og[plane * plane_out + i];
        }
      }
    });
  }
  return out;
}

// softmax(logits / tau), row-wise for 2-D input. Stabilized by subtracting the
// row maximum before exponentiation.
template <typename T>
BasicTensor<T> softmax_with_temperature(const BasicTensor<T>& logits, double tau,
                                        BasicTape<T>* tape = nullptr) {
  if (!(tau > 0.0)) throw ParameterError("softmax_with_temperature: tau must be positive");
  const bool batched = logits.rank() == 2;
  if (!batched && logits.rank() != 1) {
    throw DimensionError("softmax_with_temperature: input must be [n] or [B,n], got " +
                         shape_to_string(logits.shape()));
  }
  const std::size_t rows = batched ? logits.dim(0) : 1;
  const std::size_t n = logits.dim(batched ? 1 : 0);
  if (n < 1) throw DimensionError("softmax_with_temperature: empty logit vector");
  BasicTensor<T> out(logits.shape());
  const T inv_tau = static_cast<T>(1.0 / tau);
  const auto& zd = logits.data();
  auto& pd = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = zd.data() + r * n;
    T* p = pd.data() + r * n;
    T zmax = z[0];
    for (std::size_t i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::exp((z[i] - zmax) * inv_tau);
      total += p[i];
    }
    const T inv_total = T(1) / total;
    for (std::size_t i = 0; i < n; ++i) p[i] *= inv_total;
  }

  if (detail::track(tape, logits.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([logits = logits, out, rows, n, inv_tau]() mutable {
      const auto& pd = out.data();
      const auto& pg = out.grad();
      auto& zg = logits.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* p = pd.data() + r * n;
        const T* g = pg.data() + r * n;
        T dot = T(0);
        for (std::size_t i = 0; i < n; ++i) dot += g[i] * p[i];
        for (std::size_t i = 0; i < n; ++i) zg[r * n + i] += inv_tau * p[i] * (g[i] - dot);
      }
    });
  }
  return out;
}

// Elementwise a + b.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b,
                   BasicTape<T>* tape = nullptr) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (detail::track(tape, a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a = a, b = b, out]() mutable {
      const auto& og = out.grad();
      if (a.requires_grad()) {
        auto& ag = a.grad();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
      }
      if (b.requires_grad()) {
        auto& bg = b.grad();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
      }
    });
  }
  return out;
}

// Elementwise a * b.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b,
                   BasicTape<T>* tape = nullptr) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (detail::track(tape, a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a = a, b = b, out]() mutable {
      const auto& og = out.grad();
      if (a.requires_grad()) {
        auto& ag = a.grad();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto& bg = b.grad();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * a.data()[i];
      }
    });
  }
  return out;
}

// c * x for a compile-time-free scalar coefficient.
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double c, BasicTape<T>* tape = nullptr) {
  BasicTensor<T> out(x.shape());
  const T cv = static_cast<T>(c);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = cv * x.data()[i];
  if (detail::track(tape, x.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, out, cv]() mutable {
      const auto& og = out.grad();
      auto& xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i) xg[i] += cv * og[i];
    });
  }
  return out;
}

// Adds a [n] bias row-wise to a [B,n] matrix.
template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias,
                        BasicTape<T>* tape = nullptr) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias: expected [B,n] and [n], got " +
                         shape_to_string(x.shape()) + " and " + shape_to_string(bias.shape()));
  }
  const std::size_t rows = x.dim(0), n = x.dim(1);
  BasicTensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i)
      out.data()[r * n + i] = x.data()[r * n + i] + bias.data()[i];
  if (detail::track(tape, x.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, bias = bias, out, rows, n]() mutable {
      const auto& og = out.grad();
      if (x.requires_grad()) {
        auto& xg = x.grad();
        for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i];
      }
      if (bias.requires_grad()) {
        auto& bg = bias.grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t i = 0; i < n; ++i) bg[i] += og[r * n + i];
      }
    });
  }
  return out;
}

// Adds a per-channel [C] bias to a [B,C,H,W] or [C,H,W] feature map.
template <typename T>
BasicTensor<T> add_channel_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias,
                                BasicTape<T>* tape = nullptr) {
  const bool batched = x.rank() == 4;
  if ((!batched && x.rank() != 3) || bias.rank() != 1 ||
      bias.dim(0) != x.dim(batched ? 1 : 0)) {
    throw DimensionError("add_channel_bias: expected [B,C,H,W] and [C], got " +
                         shape_to_string(x.shape()) + " and " + shape_to_string(bias.shape()));
  }
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t channels = bias.dim(0);
  const std::size_t plane = x.size() / (batch * channels);
  BasicTensor<T> out(x.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * plane;
      const T bv = bias.data()[c];
      for (std::size_t i = 0; i < plane; ++i) out.data()[base + i] = x.data()[base + i] + bv;
    }
  if (detail::track(tape, x.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, bias = bias, out, batch, channels, plane]() mutable {
      const auto& og = out.grad();
      if (x.requires_grad()) {
        auto& xg = x.grad();
        for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i];
      }
      if (bias.requires_grad()) {
        auto& bg = bias.grad();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * plane;
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) acc += og[base + i];
            bg[c] += acc;
          }
      }
    });
  }
  return out;
}

// Sum of all elements, as a scalar tensor.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x, BasicTape<T>* tape = nullptr) {
  T total = T(0);
  for (const T v : x.data()) total += v;
  BasicTensor<T> out = BasicTensor<T>::scalar(total);
  if (detail::track(tape, x.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, out]() mutable {
      const T g = out.grad()[0];
      auto& xg = x.grad();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g;
    });
  }
  return out;
}

// Selects one element by flat index, as a scalar tensor.
template <typename T>
BasicTensor<T> pick(const BasicTensor<T>& x, std::size_t flat_index,
                    BasicTape<T>* tape = nullptr) {
  if (flat_index >= x.size()) {
    throw DimensionError("pick: index " + std::to_string(flat_index) +
                         " out of range for " + shape_to_string(x.shape()));
  }
  BasicTensor<T> out = BasicTensor<T>::scalar(x.data()[flat_index]);
  if (detail::track(tape, x.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, out, flat_index]() mutable { x.grad()[flat_index] += out.grad()[0]; });
  }
  return out;
}

// Copies data into a new shape with the same element count.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, std::vector<std::size_t> shape,
                       BasicTape<T>* tape = nullptr) {
  if (BasicTensor<T>::count(shape) != x.size()) {
    throw DimensionError("reshape: cannot reshape " + shape_to_string(x.shape()) + " to " +
                         shape_to_string(shape));
  }
  BasicTensor<T> out = BasicTensor<T>::from_data(std::move(shape), x.data());
  if (detail::track(tape, x.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x = x, out]() mutable {
      const auto& og = out.grad();
      auto& xg = x.grad();
      for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i];
    });
  }
  return out;
}

}  // namespace occdist
