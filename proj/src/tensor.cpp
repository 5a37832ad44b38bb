// Copyright 2026 The voxid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "voxid/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "voxid/errors.hpp"
#include "voxid/util.hpp"

namespace voxid::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
Buffer<T>& ensure_grad(Node<T>& node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), T(0));
  return node.grad;
}

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> tensors) {
  for (const auto* t : tensors) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void require_rank(const Shape& shape, std::size_t rank, const char* op, const char* what) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " +
                     std::to_string(rank) + ", got " + shape_string(shape));
  }
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

struct ConvGeometry {
  std::size_t batch, height, width, in_ch;
  std::size_t kh, kw, out_ch;
  std::size_t out_h, out_w;
  std::size_t pad_top, pad_left;
  std::size_t patch() const { return kh * kw * in_ch; }
  std::size_t positions() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      T* row = col + (oy * g.out_w + ox) * patch;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          T* dst = row + (ky * g.kw + kx) * g.in_ch;
          if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.height) ||
              ix >= static_cast<std::ptrdiff_t>(g.width)) {
            std::fill(dst, dst + g.in_ch, T(0));
          } else {
            const T* src = x + (static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)) * g.in_ch;
            std::copy(src, src + g.in_ch, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const T* row = col + (oy * g.out_w + ox) * patch;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
          const T* src = row + (ky * g.kw + kx) * g.in_ch;
          T* dst = dx + (static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)) * g.in_ch;
          for (std::size_t c = 0; c < g.in_ch; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// --- Tensor -----------------------------------------------------------------

template <typename T>
Tensor<T>::Tensor(Shape shape, const std::vector<T>& values, bool requires_grad)
    : Tensor(std::move(shape), Buffer<T>(values.begin(), values.end()), requires_grad) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, Buffer<T> values, bool requires_grad)
    : node_(std::make_shared<Node<T>>()) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), Buffer<T>(n, value), requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  return ensure_grad(*node_);
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return ensure_grad(*node_);
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

// --- Tape -------------------------------------------------------------------

template <typename T>
Tensor<T> Tape<T>::make_output(Shape shape, Buffer<T> values, bool requires_grad) {
  Tensor<T> out(std::move(shape), std::move(values), requires_grad);
  out.node()->producer = this;
  return out;
}

template <typename T>
void Tape<T>::record(const Tensor<T>& output, std::function<void()> backward) {
  entries_.push_back({output.node(), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.node()->producer != this) {
    throw StateError("backward called without a recorded forward pass for this loss");
  }
  if (loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  ensure_grad(*loss.node())[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from the loss
    it->backward();
  }
}

// --- ops --------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, Padding padding) {
  require_rank(input.shape(), 4, "conv2d", "input");
  require_rank(kernel.shape(), 4, "conv2d", "kernel");
  if (kernel.dim(2) != input.dim(3)) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) +
                     " has " + std::to_string(input.dim(3)) +
                     " channels but kernel " + shape_string(kernel.shape()) +
                     " expects " + std::to_string(kernel.dim(2)));
  }
  if (bias.size() != kernel.dim(3)) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) +
                     " does not match kernel " + shape_string(kernel.shape()));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 kernel.dim(0), kernel.dim(1), kernel.dim(3), 0, 0, 0, 0};
  if (padding == Padding::kValid) {
    if (g.height < g.kh || g.width < g.kw) {
      throw ShapeError("conv2d: input " + shape_string(input.shape()) +
                       " is smaller than kernel " + shape_string(kernel.shape()));
    }
    g.out_h = g.height - g.kh + 1;
    g.out_w = g.width - g.kw + 1;
  } else {
    g.out_h = g.height;
    g.out_w = g.width;
    g.pad_top = (g.kh - 1) / 2;
    g.pad_left = (g.kw - 1) / 2;
  }

  const std::size_t in_stride = g.height * g.width * g.in_ch;
  const std::size_t out_stride = g.positions() * g.out_ch;
  Buffer<T> out(g.batch * out_stride);
  Buffer<T> col(g.positions() * g.patch());
  ConstMatMap<T> k(kernel.data().data(), static_cast<Eigen::Index>(g.patch()),
                   static_cast<Eigen::Index>(g.out_ch));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data().data(),
                                                          static_cast<Eigen::Index>(g.out_ch));
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.data().data() + n * in_stride, g, col.data());
    ConstMatMap<T> c(col.data(), static_cast<Eigen::Index>(g.positions()),
                     static_cast<Eigen::Index>(g.patch()));
    MatMap<T> o(out.data() + n * out_stride, static_cast<Eigen::Index>(g.positions()),
                static_cast<Eigen::Index>(g.out_ch));
    o.noalias() = c * k;
    o.rowwise() += b;
  }

  const bool rg = any_requires_grad<T>({&input, &kernel, &bias});
  auto result = tape.make_output({g.batch, g.out_h, g.out_w, g.out_ch}, std::move(out), rg);
  if (rg) {
    tape.record(result, [g, in = input.node(), ker = kernel.node(), bi = bias.node(),
                         res = result.node()] {
      const std::size_t in_stride = g.height * g.width * g.in_ch;
      const std::size_t out_stride = g.positions() * g.out_ch;
      const auto P = static_cast<Eigen::Index>(g.positions());
      const auto K = static_cast<Eigen::Index>(g.patch());
      const auto O = static_cast<Eigen::Index>(g.out_ch);
      Buffer<T> col(g.positions() * g.patch());
      Buffer<T> dcol(in->requires_grad ? col.size() : 0);
      ConstMatMap<T> k(ker->value.data(), K, O);
      for (std::size_t n = 0; n < g.batch; ++n) {
        ConstMatMap<T> dout(res->grad.data() + n * out_stride, P, O);
        if (bi->requires_grad) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(ensure_grad(*bi).data(), O);
          db += dout.colwise().sum();
        }
        if (ker->requires_grad) {
          im2col(in->value.data() + n * in_stride, g, col.data());
          ConstMatMap<T> c(col.data(), P, K);
          MatMap<T> dk(ensure_grad(*ker).data(), K, O);
          dk.noalias() += c.transpose() * dout;
        }
        if (in->requires_grad) {
          MatMap<T> dc(dcol.data(), P, K);
          dc.noalias() = dout * k.transpose();
          col2im_add(dcol.data(), g, ensure_grad(*in).data() + n * in_stride);
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> maxpool2d(Tape<T>& tape, const Tensor<T>& input) {
  require_rank(input.shape(), 4, "maxpool2d", "input");
  const std::size_t B = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  if (H < 2 || W < 2) {
    throw ShapeError("maxpool2d: input " + shape_string(input.shape()) +
                     " is smaller than the 2x2 pool");
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  Buffer<T> out(B * Ho * Wo * C);
  std::vector<std::size_t> argmax(out.size());
  const T* x = input.data().data();
  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = ((n * H + 2 * oy) * W + 2 * ox) * C + c;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = ((n * H + 2 * oy + dy) * W + 2 * ox + dx) * C + c;
              if (x[idx] > x[best]) best = idx;
            }
          }
          const std::size_t o = ((n * Ho + oy) * Wo + ox) * C + c;
          out[o] = x[best];
          argmax[o] = best;
        }
      }
    }
  }
  auto result = tape.make_output({B, Ho, Wo, C}, std::move(out), input.requires_grad());
  if (input.requires_grad()) {
    tape.record(result, [in = input.node(), res = result.node(), argmax = std::move(argmax)] {
      auto& dx = ensure_grad(*in);
      for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += res->grad[o];
    });
  }
  return result;
}

template <typename T>
Tensor<T> dense(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "dense", "input");
  require_rank(weight.shape(), 2, "dense", "weight");
  if (input.dim(1) != weight.dim(0) || bias.size() != weight.dim(1)) {
    throw ShapeError("dense: input " + shape_string(input.shape()) + ", weight " +
                     shape_string(weight.shape()) + " and bias " +
                     shape_string(bias.shape()) + " are incompatible");
  }
  const auto B = static_cast<Eigen::Index>(input.dim(0));
  const auto F = static_cast<Eigen::Index>(weight.dim(0));
  const auto O = static_cast<Eigen::Index>(weight.dim(1));
  Buffer<T> out(static_cast<std::size_t>(B * O));
  {
    ConstMatMap<T> x(input.data().data(), B, F);
    ConstMatMap<T> w(weight.data().data(), F, O);
    MatMap<T> y(out.data(), B, O);
    y.noalias() = x * w;
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(), O);
  }
  const bool rg = any_requires_grad<T>({&input, &weight, &bias});
  auto result = tape.make_output({input.dim(0), weight.dim(1)}, std::move(out), rg);
  if (rg) {
    tape.record(result, [B, F, O, in = input.node(), w = weight.node(), bi = bias.node(),
                         res = result.node()] {
      ConstMatMap<T> dy(res->grad.data(), B, O);
      if (in->requires_grad) {
        MatMap<T> dx(ensure_grad(*in).data(), B, F);
        dx.noalias() += dy * ConstMatMap<T>(w->value.data(), F, O).transpose();
      }
      if (w->requires_grad) {
        MatMap<T> dw(ensure_grad(*w).data(), F, O);
        dw.noalias() += ConstMatMap<T>(in->value.data(), B, F).transpose() * dy;
      }
      if (bi->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(ensure_grad(*bi).data(), O) +=
            dy.colwise().sum();
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& input, Activation act) {
  Buffer<T> out(input.size());
  const auto x = input.data();
  if (act == Activation::kRelu) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  }
  auto result = tape.make_output(input.shape(), std::move(out), input.requires_grad());
  if (input.requires_grad()) {
    tape.record(result, [act, in = input.node(), res = result.node()] {
      auto& dx = ensure_grad(*in);
      const auto& dy = res->grad;
      if (act == Activation::kRelu) {
        for (std::size_t i = 0; i < dx.size(); ++i) {
          if (in->value[i] > T(0)) dx[i] += dy[i];
        }
      } else {
        for (std::size_t i = 0; i < dx.size(); ++i) {
          const T y = res->value[i];
          dx[i] += dy[i] * (T(1) - y * y);
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> lstm_sequence(Tape<T>& tape, const Tensor<T>& input, const LstmParams<T>& p) {
  require_rank(input.shape(), 3, "lstm", "input");
  require_rank(p.kernel.shape(), 2, "lstm", "kernel");
  require_rank(p.recurrent.shape(), 2, "lstm", "recurrent kernel");
  const std::size_t B = input.dim(0), Tn = input.dim(1), F = input.dim(2);
  const std::size_t U = p.recurrent.dim(0);
  if (Tn == 0) throw ShapeError("lstm: sequence length must be at least 1");
  if (p.kernel.dim(0) != F || p.kernel.dim(1) != 4 * U || p.recurrent.dim(1) != 4 * U ||
      p.bias.size() != 4 * U) {
    throw ShapeError("lstm: input " + shape_string(input.shape()) + " with kernel " +
                     shape_string(p.kernel.shape()) + ", recurrent " +
                     shape_string(p.recurrent.shape()) + ", bias " +
                     shape_string(p.bias.shape()) + " is inconsistent");
  }
  const auto eB = static_cast<Eigen::Index>(B);
  const auto eF = static_cast<Eigen::Index>(F);
  const auto eU = static_cast<Eigen::Index>(U);
  const auto eG = static_cast<Eigen::Index>(4 * U);
  const auto rows = static_cast<Eigen::Index>(B * Tn);

  // gates: activated i, f, g, o per (b, t) row; cells: c_t per row.
  auto gates = std::make_shared<Buffer<T>>(B * Tn * 4 * U);
  auto cells = std::make_shared<Buffer<T>>(B * Tn * U);
  Buffer<T> hidden(B * Tn * U);
  {
    MatMap<T> z(gates->data(), rows, eG);
    z.noalias() = ConstMatMap<T>(input.data().data(), rows, eF) *
                  ConstMatMap<T>(p.kernel.data().data(), eF, eG);
    z.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(p.bias.data().data(), eG);
  }
  ConstMatMap<T> rec(p.recurrent.data().data(), eU, eG);
  RowMat<T> hu(eB, eG);
  for (std::size_t t = 0; t < Tn; ++t) {
    if (t > 0) {
      ConstStridedMap<T> h_prev(hidden.data() + (t - 1) * U, eB, eU,
                                Eigen::OuterStride<>(static_cast<Eigen::Index>(Tn * U)));
      hu.noalias() = h_prev * rec;
    } else {
      hu.setZero();
    }
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t r = b * Tn + t;
      T* z = gates->data() + r * 4 * U;
      const T* c_prev = t > 0 ? cells->data() + (r - 1) * U : nullptr;
      T* c = cells->data() + r * U;
      T* h = hidden.data() + r * U;
      for (std::size_t u = 0; u < U; ++u) {
        const auto bu = static_cast<Eigen::Index>(b);
        const T i = sigmoid(z[u] + hu(bu, static_cast<Eigen::Index>(u)));
        const T f = sigmoid(z[U + u] + hu(bu, static_cast<Eigen::Index>(U + u)));
        const T g = std::tanh(z[2 * U + u] + hu(bu, static_cast<Eigen::Index>(2 * U + u)));
        const T o = sigmoid(z[3 * U + u] + hu(bu, static_cast<Eigen::Index>(3 * U + u)));
        z[u] = i;
        z[U + u] = f;
        z[2 * U + u] = g;
        z[3 * U + u] = o;
        c[u] = (c_prev ? f * c_prev[u] : T(0)) + i * g;
        h[u] = o * std::tanh(c[u]);
      }
    }
  }

  const bool rg = any_requires_grad<T>({&input, &p.kernel, &p.recurrent, &p.bias});
  auto result = tape.make_output({B, Tn, U}, std::move(hidden), rg);
  if (rg) {
    tape.record(result, [=, in = input.node(), ker = p.kernel.node(),
                         rk = p.recurrent.node(), bi = p.bias.node(), res = result.node()] {
      Buffer<T> dz(B * Tn * 4 * U);
      RowMat<T> dh_next = RowMat<T>::Zero(eB, eU);
      RowMat<T> dc_next = RowMat<T>::Zero(eB, eU);
      ConstMatMap<T> rec(rk->value.data(), eU, eG);
      const auto& dout = res->grad;
      for (std::size_t t = Tn; t-- > 0;) {
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t r = b * Tn + t;
          const T* gt = gates->data() + r * 4 * U;
          const T* c = cells->data() + r * U;
          const T* c_prev = t > 0 ? cells->data() + (r - 1) * U : nullptr;
          T* d = dz.data() + r * 4 * U;
          const auto bu = static_cast<Eigen::Index>(b);
          for (std::size_t u = 0; u < U; ++u) {
            const auto eu = static_cast<Eigen::Index>(u);
            const T i = gt[u], f = gt[U + u], g = gt[2 * U + u], o = gt[3 * U + u];
            const T tc = std::tanh(c[u]);
            const T dh = dout[r * U + u] + dh_next(bu, eu);
            const T dc = dh * o * (T(1) - tc * tc) + dc_next(bu, eu);
            const T cp = c_prev ? c_prev[u] : T(0);
            d[u] = dc * g * i * (T(1) - i);
            d[U + u] = dc * cp * f * (T(1) - f);
            d[2 * U + u] = dc * i * (T(1) - g * g);
            d[3 * U + u] = dh * tc * o * (T(1) - o);
            dc_next(bu, eu) = dc * f;
          }
        }
        ConstStridedMap<T> dzt(dz.data() + t * 4 * U, eB, eG,
                               Eigen::OuterStride<>(static_cast<Eigen::Index>(Tn * 4 * U)));
        dh_next.noalias() = dzt * rec.transpose();
        if (rk->requires_grad && t > 0) {
          ConstStridedMap<T> h_prev(res->value.data() + (t - 1) * U, eB, eU,
                                    Eigen::OuterStride<>(static_cast<Eigen::Index>(Tn * U)));
          MatMap<T>(ensure_grad(*rk).data(), eU, eG).noalias() += h_prev.transpose() * dzt;
        }
      }
      ConstMatMap<T> dzm(dz.data(), rows, eG);
      if (ker->requires_grad) {
        MatMap<T>(ensure_grad(*ker).data(), eF, eG).noalias() +=
            ConstMatMap<T>(in->value.data(), rows, eF).transpose() * dzm;
      }
      if (bi->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(ensure_grad(*bi).data(), eG) +=
            dzm.colwise().sum();
      }
      if (in->requires_grad) {
        MatMap<T>(ensure_grad(*in).data(), rows, eF).noalias() +=
            dzm * ConstMatMap<T>(ker->value.data(), eF, eG).transpose();
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> batchnorm(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& gamma,
                    const Tensor<T>& beta, BatchNormState<T>& state, Mode mode) {
  if (input.shape().size() < 2) {
    throw ShapeError("batchnorm: input must have rank >= 2, got " + shape_string(input.shape()));
  }
  const std::size_t F = input.shape().back();
  const std::size_t N = input.size() / F;
  if (gamma.size() != F || beta.size() != F || state.running_mean.size() != F ||
      state.running_var.size() != F) {
    throw ShapeError("batchnorm: parameters do not match feature width " + std::to_string(F));
  }
  if (mode == Mode::kTrain && input.dim(0) < 2) {
    throw InvalidArgumentError("batchnorm: train mode requires a batch of at least 2");
  }
  const T eps = static_cast<T>(kBatchNormEpsilon);
  const T momentum = static_cast<T>(kBatchNormMomentum);
  const auto x = input.data();
  Buffer<T> mean(F, T(0)), inv_std(F);
  if (mode == Mode::kTrain) {
    std::vector<double> acc(F, 0.0), acc2(F, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) acc[f] += x[n * F + f];
    }
    for (std::size_t f = 0; f < F; ++f) acc[f] /= static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        const double d = x[n * F + f] - acc[f];
        acc2[f] += d * d;
      }
    }
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t f = 0; f < F; ++f) {
      const double var = acc2[f] / static_cast<double>(N);
      mean[f] = static_cast<T>(acc[f]);
      inv_std[f] = static_cast<T>(1.0 / std::sqrt(var + kBatchNormEpsilon));
      rm[f] = momentum * rm[f] + (T(1) - momentum) * static_cast<T>(acc[f]);
      rv[f] = momentum * rv[f] + (T(1) - momentum) * static_cast<T>(var);
    }
  } else {
    const auto rm = state.running_mean.data();
    const auto rv = state.running_var.data();
    for (std::size_t f = 0; f < F; ++f) {
      mean[f] = rm[f];
      inv_std[f] = T(1) / std::sqrt(rv[f] + eps);
    }
  }
  Buffer<T> xhat(input.size()), out(input.size());
  const auto gm = gamma.data();
  const auto bt = beta.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t i = n * F + f;
      xhat[i] = (x[i] - mean[f]) * inv_std[f];
      out[i] = gm[f] * xhat[i] + bt[f];
    }
  }
  const bool rg = any_requires_grad<T>({&input, &gamma, &beta});
  auto result = tape.make_output(input.shape(), std::move(out), rg);
  if (rg) {
    tape.record(result, [=, xhat = std::move(xhat), inv_std = std::move(inv_std),
                         in = input.node(), gnode = gamma.node(), bnode = beta.node(),
                         res = result.node()] {
      const auto& dy = res->grad;
      Buffer<T> sum_dy(F, T(0)), sum_dy_xhat(F, T(0));
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t f = 0; f < F; ++f) {
          sum_dy[f] += dy[n * F + f];
          sum_dy_xhat[f] += dy[n * F + f] * xhat[n * F + f];
        }
      }
      if (gnode->requires_grad) {
        auto& dg = ensure_grad(*gnode);
        for (std::size_t f = 0; f < F; ++f) dg[f] += sum_dy_xhat[f];
      }
      if (bnode->requires_grad) {
        auto& db = ensure_grad(*bnode);
        for (std::size_t f = 0; f < F; ++f) db[f] += sum_dy[f];
      }
      if (in->requires_grad) {
        auto& dx = ensure_grad(*in);
        const auto& g = gnode->value;
        if (mode == Mode::kTrain) {
          const T inv_n = T(1) / static_cast<T>(N);
          for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t f = 0; f < F; ++f) {
              const std::size_t i = n * F + f;
              dx[i] += g[f] * inv_std[f] * inv_n *
                       (static_cast<T>(N) * dy[i] - sum_dy[f] - xhat[i] * sum_dy_xhat[f]);
            }
          }
        } else {
          for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t f = 0; f < F; ++f) dx[n * F + f] += dy[n * F + f] * g[f] * inv_std[f];
          }
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& input, double rate, Mode mode,
                  std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgumentError("dropout rate must be in [0, 1)");
  }
  if (mode == Mode::kInfer || rate == 0.0) {
    return reshape(tape, input, input.shape());
  }
  std::mt19937_64 rng(seed);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Buffer<T> mask(input.size());
  Buffer<T> out(input.size());
  const auto x = input.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? T(0) : scale;
    out[i] = x[i] * mask[i];
  }
  auto result = tape.make_output(input.shape(), std::move(out), input.requires_grad());
  if (input.requires_grad()) {
    tape.record(result, [in = input.node(), res = result.node(), mask = std::move(mask)] {
      auto& dx = ensure_grad(*in);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += res->grad[i] * mask[i];
    });
  }
  return result;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& input, Shape shape) {
  if (shape_size(shape) != input.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(input.shape()) + " as " +
                     shape_string(shape));
  }
  Buffer<T> values(input.data().begin(), input.data().end());
  auto result = tape.make_output(std::move(shape), std::move(values), input.requires_grad());
  if (input.requires_grad()) {
    tape.record(result, [in = input.node(), res = result.node()] {
      auto& dx = ensure_grad(*in);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += res->grad[i];
    });
  }
  return result;
}

template <typename T>
Tensor<T> feature_map_to_sequence(Tape<T>& tape, const Tensor<T>& input) {
  require_rank(input.shape(), 4, "reshape_to_sequence", "input");
  const std::size_t B = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  Buffer<T> out(input.size());
  const auto x = input.data();
  // out[b, w, h*C + c] = in[b, h, w, c]
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        const T* src = x.data() + ((b * H + h) * W + w) * C;
        T* dst = out.data() + (b * W + w) * H * C + h * C;
        std::copy(src, src + C, dst);
      }
    }
  }
  auto result = tape.make_output({B, W, H * C}, std::move(out), input.requires_grad());
  if (input.requires_grad()) {
    tape.record(result, [B, H, W, C, in = input.node(), res = result.node()] {
      auto& dx = ensure_grad(*in);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
          for (std::size_t w = 0; w < W; ++w) {
            const T* src = res->grad.data() + (b * W + w) * H * C + h * C;
            T* dst = dx.data() + ((b * H + h) * W + w) * C;
            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input) {
  T total = T(0);
  for (T v : input.data()) total += v;
  auto result = tape.make_output({1}, {total}, input.requires_grad());
  if (input.requires_grad()) {
    tape.record(result, [in = input.node(), res = result.node()] {
      auto& dx = ensure_grad(*in);
      for (auto& d : dx) d += res->grad[0];
    });
  }
  return result;
}

template <typename T>
Tensor<T> inner(Tape<T>& tape, const Tensor<T>& input, std::span<const T> weights) {
  if (weights.size() != input.size()) {
    throw ShapeError("inner: weight count does not match " + shape_string(input.shape()));
  }
  T total = T(0);
  const auto x = input.data();
  for (std::size_t i = 0; i < x.size(); ++i) total += x[i] * weights[i];
  auto result = tape.make_output({1}, {total}, input.requires_grad());
  if (input.requires_grad()) {
    Buffer<T> w(weights.begin(), weights.end());
    tape.record(result, [in = input.node(), res = result.node(), w = std::move(w)] {
      auto& dx = ensure_grad(*in);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += res->grad[0] * w[i];
    });
  }
  return result;
}

template <typename T>
std::vector<T> softmax(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax", "logits");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  std::vector<T> p(B * K);
  const auto z = logits.data();
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = z.data() + b * K;
    const T mx = *std::max_element(row, row + K);
    T total = T(0);
    for (std::size_t k = 0; k < K; ++k) {
      p[b * K + k] = std::exp(row[k] - mx);
      total += p[b * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) p[b * K + k] /= total;
  }
  return p;
}

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                            std::span<const std::size_t> labels) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy", "logits");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for a batch of " + std::to_string(B));
  }
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= K) {
      throw IndexError("label " + std::to_string(labels[b]) + " at position " +
                       std::to_string(b) + " is outside [0, " + std::to_string(K) + ")");
    }
  }
  CrossEntropyResult<T> r;
  r.probabilities = softmax(logits);
  const auto z = logits.data();
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = z.data() + b * K;
    const T mx = *std::max_element(row, row + K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += std::exp(static_cast<double>(row[k] - mx));
    loss += static_cast<double>(mx) + std::log(total) - static_cast<double>(row[labels[b]]);
  }
  loss /= static_cast<double>(B);
  r.loss = tape.make_output({1}, {static_cast<T>(loss)}, logits.requires_grad());
  if (logits.requires_grad()) {
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    tape.record(r.loss, [B, K, probs = r.probabilities, lab = std::move(lab),
                         in = logits.node(), res = r.loss.node()] {
      auto& dx = ensure_grad(*in);
      const T g = res->grad[0] / static_cast<T>(B);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t k = 0; k < K; ++k) {
          const T target = k == lab[b] ? T(1) : T(0);
          dx[b * K + k] += g * (probs[b * K + k] - target);
        }
      }
    });
  }
  return r;
}

#define VOXID_INSTANTIATE(T)                                                          \
  template class Tensor<T>;                                                           \
  template class Tape<T>;                                                             \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&,             \
                            const Tensor<T>&, Padding);                               \
  template Tensor<T> maxpool2d(Tape<T>&, const Tensor<T>&);                           \
  template Tensor<T> dense(Tape<T>&, const Tensor<T>&, const Tensor<T>&,              \
                           const Tensor<T>&);                                         \
  template Tensor<T> activation(Tape<T>&, const Tensor<T>&, Activation);              \
  template Tensor<T> lstm_sequence(Tape<T>&, const Tensor<T>&, const LstmParams<T>&); \
  template Tensor<T> batchnorm(Tape<T>&, const Tensor<T>&, const Tensor<T>&,          \
                               const Tensor<T>&, BatchNormState<T>&, Mode);           \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, Mode, std::uint64_t); \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                      \
  template Tensor<T> feature_map_to_sequence(Tape<T>&, const Tensor<T>&);             \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                 \
  template Tensor<T> inner(Tape<T>&, const Tensor<T>&, std::span<const T>);           \
  template std::vector<T> softmax(const Tensor<T>&);                                  \
  template CrossEntropyResult<T> softmax_cross_entropy(Tape<T>&, const Tensor<T>&,    \
                                                       std::span<const std::size_t>);

VOXID_INSTANTIATE(float)
VOXID_INSTANTIATE(double)

#undef VOXID_INSTANTIATE

}  // namespace voxid::nn
