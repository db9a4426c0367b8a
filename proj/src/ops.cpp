#include "triq/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <string>

#include "triq/error.hpp"

namespace triq::ops {
namespace {

bool tracking(GradTape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in result");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_to_string(t.shape()));
  }
}

Tensor finish(Tensor out, const char* op) {
  check_finite(out, op);
  return out;
}

// Adds `src` into the gradient of `dst` if it participates in differentiation.
void accumulate(const Tensor& dst, std::span<const double> src) {
  if (!dst.requires_grad()) return;
  auto g = dst.grad_mut();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, GradTape* tape) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto o = out.data_mut();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  finish(out, "add");
  if (tracking(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, [a, b, out]() mutable {
      accumulate(a, out.grad());
      accumulate(b, out.grad());
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias, GradTape* tape) {
  require_rank(bias, 1, "add_bias");
  const std::size_t n = bias.numel();
  if (x.shape().back() != n) {
    throw DimensionError("add_bias: last axis of " + shape_to_string(x.shape()) + " vs bias " +
                         shape_to_string(bias.shape()));
  }
  Tensor out(x.shape());
  auto o = out.data_mut();
  auto in = x.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] + bv[i % n];
  finish(out, "add_bias");
  if (tracking(tape, {&x, &bias})) {
    out.set_requires_grad(true);
    tape->record(out, [x, bias, out, n]() mutable {
      auto g = out.grad();
      accumulate(x, g);
      if (bias.requires_grad()) {
        auto gb = bias.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, GradTape* tape) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto o = out.data_mut();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  finish(out, "mul");
  if (tracking(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_mut();
        auto y = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor, GradTape* tape) {
  Tensor out(x.shape());
  auto o = out.data_mut();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] * factor;
  finish(out, "scale");
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out, factor]() mutable {
      auto g = out.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor sum(const Tensor& x, GradTape* tape) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = finish(Tensor::scalar(total), "sum");
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out]() mutable {
      const double g = out.grad()[0];
      for (double& gx : x.grad_mut()) gx += g;
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor out({m, n});
  auto o = out.data_mut();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = o.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = x[i * k + p];
      const double* brow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  finish(out, "matmul");
  if (tracking(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out, [a, b, out, m, k, n]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_mut();
        auto y = b.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        auto x = a.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double av = x[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x, GradTape* tape) {
  require_rank(x, 2, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out({n, m});
  auto o = out.data_mut();
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[j * m + i] = in[i * n + j];
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out, m, n]() mutable {
      auto g = out.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

Tensor gelu(const Tensor& x, GradTape* tape) {
  Tensor out(x.shape());
  auto o = out.data_mut();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = 0.5 * in[i] * std::erfc(-in[i] / std::numbers::sqrt2);
  }
  finish(out, "gelu");
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad_mut();
      auto in = x.data();
      const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-in[i] / std::numbers::sqrt2);
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * in[i] * in[i]);
        gx[i] += g[i] * (cdf + in[i] * pdf);
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, GradTape* tape) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  Tensor out(x.shape());
  auto o = out.data_mut();
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * n;
    double* dst = o.data() + r * n;
    const double hi = *std::max_element(src, src + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(src[j] - hi);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  finish(out, "softmax");
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out, n, rows]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad_mut();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, GradTape* tape) {
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gamma/beta must have shape [" + std::to_string(d) + "]");
  }
  const std::size_t rows = x.numel() / d;
  Tensor out(x.shape());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto o = out.data_mut();
  auto in = x.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += src[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (src[j] - mean) * (src[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (src[j] - mean) * inv_std[r];
      o[r * d + j] = gm[j] * xhat[r * d + j] + bt[j];
    }
  }
  finish(out, "layer_norm");
  if (tracking(tape, {&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape->record(out, [x, gamma, beta, out, d, rows, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)]() mutable {
      auto g = out.grad();
      auto gm = gamma.data();
      if (gamma.requires_grad()) {
        auto gg = gamma.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
      }
      if (beta.requires_grad()) {
        auto gb = beta.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
      }
      if (x.requires_grad()) {
        auto gx = x.grad_mut();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_dxhat = 0.0;
          double mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[r * d + j] * gm[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[r * d + j];
          }
          mean_dxhat *= inv_d;
          mean_dxhat_xhat *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[r * d + j] * gm[j];
            gx[r * d + j] += inv_std[r] * (dxh - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t zero_pad,
              GradTape* tape) {
  require_rank(input, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  if (stride == 0) throw ParameterError("conv2d: stride must be positive");
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t k = kernels.dim(0), cout = kernels.dim(3);
  if (kernels.dim(1) != k) throw DimensionError("conv2d: kernels must be square");
  if (kernels.dim(2) != cin) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(kernels.dim(2)) + " input channels, got " +
                         std::to_string(cin));
  }
  if (k > h + 2 * zero_pad || k > w + 2 * zero_pad) {
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                         shape_to_string(input.shape()));
  }
  const std::size_t oh = (h + 2 * zero_pad - k) / stride + 1;
  const std::size_t ow = (w + 2 * zero_pad - k) / stride + 1;
  Tensor out({oh, ow, cout});
  auto o = out.data_mut();
  auto in = input.data();
  auto kr = kernels.data();
  const auto ph = static_cast<std::ptrdiff_t>(h), pw = static_cast<std::ptrdiff_t>(w);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* dst = o.data() + (oy * ow + ox) * cout;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(zero_pad);
        if (iy < 0 || iy >= ph) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(zero_pad);
          if (ix < 0 || ix >= pw) continue;
          const double* src = in.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          const double* ker = kr.data() + (ky * k + kx) * cin * cout;
          for (std::size_t c = 0; c < cin; ++c) {
            const double v = src[c];
            const double* kc = ker + c * cout;
            for (std::size_t co = 0; co < cout; ++co) dst[co] += v * kc[co];
          }
        }
      }
    }
  }
  finish(out, "conv2d");
  if (tracking(tape, {&input, &kernels})) {
    out.set_requires_grad(true);
    tape->record(out, [input, kernels, out, stride, zero_pad, h, w, cin, k, cout, oh, ow]() mutable {
      auto g = out.grad();
      auto in = input.data();
      auto kr = kernels.data();
      std::span<double> gin = input.requires_grad() ? input.grad_mut() : std::span<double>();
      std::span<double> gk = kernels.requires_grad() ? kernels.grad_mut() : std::span<double>();
      const auto ph = static_cast<std::ptrdiff_t>(h), pw = static_cast<std::ptrdiff_t>(w);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double* go = g.data() + (oy * ow + ox) * cout;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(zero_pad);
            if (iy < 0 || iy >= ph) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(zero_pad);
              if (ix < 0 || ix >= pw) continue;
              const std::size_t in_off = (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
              const std::size_t k_off = (ky * k + kx) * cin * cout;
              for (std::size_t c = 0; c < cin; ++c) {
                if (!gin.empty()) {
                  const double* kc = kr.data() + k_off + c * cout;
                  double acc = 0.0;
                  for (std::size_t co = 0; co < cout; ++co) acc += go[co] * kc[co];
                  gin[in_off + c] += acc;
                }
                if (!gk.empty()) {
                  const double v = in[in_off + c];
                  double* gkc = gk.data() + k_off + c * cout;
                  for (std::size_t co = 0; co < cout; ++co) gkc[co] += v * go[co];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, std::size_t pool, GradTape* tape) {
  if (pool == 0) throw ParameterError("maxpool2d: pool size must be positive");
  require_rank(input, 3, "maxpool2d");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const std::size_t oh = (h + pool - 1) / pool, ow = (w + pool - 1) / pool;
  Tensor out({oh, ow, c});
  std::vector<std::size_t> argmax(out.numel());
  auto o = out.data_mut();
  auto in = input.data();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t oi = (oy * ow + ox) * c + ch;
        std::size_t best = (oy * pool * w + ox * pool) * c + ch;
        for (std::size_t y = oy * pool; y < std::min(h, (oy + 1) * pool); ++y) {
          for (std::size_t x = ox * pool; x < std::min(w, (ox + 1) * pool); ++x) {
            const std::size_t ii = (y * w + x) * c + ch;
            if (in[ii] > in[best]) best = ii;
          }
        }
        argmax[oi] = best;
        o[oi] = in[best];
      }
    }
  }
  if (tracking(tape, {&input})) {
    out.set_requires_grad(true);
    tape->record(out, [input, out, argmax = std::move(argmax)]() mutable {
      auto g = out.grad();
      auto gin = input.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gin[argmax[i]] += g[i];
    });
  }
  return out;
}

Tensor pad_bottom_right(const Tensor& input, std::size_t height, std::size_t width, GradTape* tape) {
  require_rank(input, 3, "pad_bottom_right");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (height < h || width < w) throw DimensionError("pad_bottom_right: target smaller than input");
  Tensor out({height, width, c});
  auto o = out.data_mut();
  auto in = input.data();
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(in.data() + y * w * c, w * c, o.data() + y * width * c);
  }
  if (tracking(tape, {&input})) {
    out.set_requires_grad(true);
    tape->record(out, [input, out, h, w, c, width]() mutable {
      auto g = out.grad();
      auto gin = input.grad_mut();
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t i = 0; i < w * c; ++i) gin[y * w * c + i] += g[y * width * c + i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape, GradTape* tape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out]() mutable { accumulate(x, out.grad()); });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count, GradTape* tape) {
  require_rank(x, 2, "slice_rows");
  const std::size_t n = x.dim(1);
  if (count == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_to_string(x.shape()));
  }
  auto in = x.data();
  Tensor out({count, n}, std::vector<double>(in.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                             in.begin() + static_cast<std::ptrdiff_t>((begin + count) * n)));
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out, begin, n]() mutable {
      auto g = out.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count, GradTape* tape) {
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (count == 0 || begin + count > n) throw DimensionError("slice_cols: column range out of bounds");
  Tensor out({m, count});
  auto o = out.data_mut();
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) o[i * count + j] = in[i * n + begin + j];
  if (tracking(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out, [x, out, m, n, begin, count]() mutable {
      auto g = out.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += g[i * count + j];
    });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts, GradTape* tape) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].dim(1);
  std::size_t rows = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != n) throw DimensionError("concat_rows: column counts differ");
    rows += p.dim(0);
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> values;
  values.reserve(rows * n);
  for (const Tensor& p : parts) values.insert(values.end(), p.data().begin(), p.data().end());
  Tensor out({rows, n}, std::move(values));
  if (tape && any_grad) {
    out.set_requires_grad(true);
    tape->record(out, [inputs = std::vector<Tensor>(parts.begin(), parts.end()), out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (Tensor& p : inputs) {
        if (p.requires_grad()) accumulate(p, g.subspan(offset, p.numel()));
        offset += p.numel();
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts, GradTape* tape) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].dim(0);
  std::size_t cols = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) throw DimensionError("concat_cols: row counts differ");
    cols += p.dim(1);
    any_grad = any_grad || p.requires_grad();
  }
  Tensor out({m, cols});
  auto o = out.data_mut();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.dim(1);
    auto src = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < pc; ++j) o[i * cols + offset + j] = src[i * pc + j];
    offset += pc;
  }
  if (tape && any_grad) {
    out.set_requires_grad(true);
    tape->record(out, [inputs = std::vector<Tensor>(parts.begin(), parts.end()), out, m, cols]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (Tensor& p : inputs) {
        const std::size_t pc = p.dim(1);
        if (p.requires_grad()) {
          auto gp = p.grad_mut();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * cols + offset + j];
        }
        offset += pc;
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, GradTape* tape) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.numel());
  const double survivor_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = keep(rng) ? survivor_scale : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)), tape);
}

Tensor cross_entropy(const Tensor& pred, std::span<const double> target, double floor, GradTape* tape) {
  if (pred.numel() != target.size()) {
    throw DimensionError("cross_entropy: prediction has " + std::to_string(pred.numel()) + " entries, target " +
                         std::to_string(target.size()));
  }
  auto p = pred.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(p[i], floor));
  }
  Tensor out = finish(Tensor::scalar(loss), "cross_entropy");
  if (tracking(tape, {&pred})) {
    out.set_requires_grad(true);
    tape->record(out, [pred, out, t = std::vector<double>(target.begin(), target.end()), floor]() mutable {
      const double g = out.grad()[0];
      auto p = pred.data();
      auto gp = pred.grad_mut();
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (t[i] != 0.0 && p[i] > floor) gp[i] -= g * t[i] / p[i];
      }
    });
  }
  return out;
}

}  // namespace triq::ops
