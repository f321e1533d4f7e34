#include "blm/tensor/ops.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "blm/error.hpp"
#include "blm/kernels/kernels.hpp"

namespace blm {

namespace {

using kernels::Trans;

std::string describe(const char* op, const char* lhs, const Shape& a, const char* rhs,
                     const Shape& b) {
  return std::string(op) + ": " + lhs + " " + to_string(a) + " incompatible with " + rhs + " " +
         to_string(b);
}

int as_int(std::int64_t v) { return static_cast<int>(v); }

// Valid-correlation geometry expressed on 3 spatial axes; 2-D ops use a unit
// depth axis. "big" is the larger spatial extent (conv input, transposed-conv
// output), "small" the other side.
struct ConvGeometry {
  int batch = 0;
  int big_channels = 0;    // Cin for conv, Cout for transposed conv
  int small_channels = 0;  // Cout for conv, Cin for transposed conv
  int big[3] = {1, 1, 1};
  int kernel[3] = {1, 1, 1};
  int small[3] = {1, 1, 1};

  int big_spatial() const { return big[0] * big[1] * big[2]; }
  int small_spatial() const { return small[0] * small[1] * small[2]; }
  int kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
  int col_rows() const { return big_channels * kernel_volume(); }
};

// col[(c,a,b,e), (z,y,x)] = big[c, z+a, y+b, x+e]
template <class T>
void im2col(const ConvGeometry& g, const T* big, T* col) {
  const int od = g.small[0], oh = g.small[1], ow = g.small[2];
  const int bw = g.big[2];
  const int plane = g.big[1] * g.big[2];
  int row = 0;
  for (int c = 0; c < g.big_channels; ++c) {
    const T* channel = big + static_cast<std::ptrdiff_t>(c) * g.big_spatial();
    for (int a = 0; a < g.kernel[0]; ++a) {
      for (int b = 0; b < g.kernel[1]; ++b) {
        for (int e = 0; e < g.kernel[2]; ++e, ++row) {
          T* out = col + static_cast<std::ptrdiff_t>(row) * g.small_spatial();
          for (int z = 0; z < od; ++z) {
            for (int y = 0; y < oh; ++y) {
              const T* src = channel + static_cast<std::ptrdiff_t>(z + a) * plane +
                             static_cast<std::ptrdiff_t>(y + b) * bw + e;
              // Rows are often only a few elements wide; a plain loop beats memmove.
              for (int x = 0; x < ow; ++x) out[x] = src[x];
              out += ow;
            }
          }
        }
      }
    }
  }
}

// big[c, z+a, y+b, x+e] += col[(c,a,b,e), (z,y,x)]
template <class T>
void col2im_add(const ConvGeometry& g, const T* col, T* big) {
  const int od = g.small[0], oh = g.small[1], ow = g.small[2];
  const int bw = g.big[2];
  const int plane = g.big[1] * g.big[2];
  int row = 0;
  for (int c = 0; c < g.big_channels; ++c) {
    T* channel = big + static_cast<std::ptrdiff_t>(c) * g.big_spatial();
    for (int a = 0; a < g.kernel[0]; ++a) {
      for (int b = 0; b < g.kernel[1]; ++b) {
        for (int e = 0; e < g.kernel[2]; ++e, ++row) {
          const T* in = col + static_cast<std::ptrdiff_t>(row) * g.small_spatial();
          for (int z = 0; z < od; ++z) {
            for (int y = 0; y < oh; ++y) {
              T* dst = channel + static_cast<std::ptrdiff_t>(z + a) * plane +
                       static_cast<std::ptrdiff_t>(y + b) * bw + e;
              for (int x = 0; x < ow; ++x) dst[x] += in[x];
              in += ow;
            }
          }
        }
      }
    }
  }
}

// Checks ranks/channels and fills the geometry. `spatial_dims` is 2 or 3.
ConvGeometry conv_geometry(const char* op, const Shape& x, const Shape& k, const Shape& bias,
                           int spatial_dims, bool transposed) {
  const std::size_t rank = static_cast<std::size_t>(spatial_dims) + 2;
  if (x.size() != rank) throw DimensionError(describe(op, "input", x, "kernel", k));
  if (k.size() != rank) throw DimensionError(describe(op, "kernel", k, "input", x));
  const std::int64_t in_ch = transposed ? k[0] : k[1];
  const std::int64_t out_ch = transposed ? k[1] : k[0];
  if (x[1] != in_ch) throw DimensionError(describe(op, "input", x, "kernel", k));
  if (bias.size() != 1 || bias[0] != out_ch) {
    throw DimensionError(describe(op, "bias", bias, "kernel", k));
  }
  ConvGeometry g;
  g.batch = as_int(x[0]);
  g.big_channels = as_int(transposed ? out_ch : in_ch);
  g.small_channels = as_int(transposed ? in_ch : out_ch);
  const int offset = 3 - spatial_dims;
  for (int i = 0; i < spatial_dims; ++i) {
    const std::int64_t in = x[2 + i];
    const std::int64_t kk = k[2 + i];
    g.kernel[offset + i] = as_int(kk);
    if (transposed) {
      g.small[offset + i] = as_int(in);
      g.big[offset + i] = as_int(in + kk - 1);
    } else {
      if (kk > in) {
        throw DimensionError(std::string(op) + ": kernel " + to_string(k) +
                             " larger than input " + to_string(x));
      }
      g.big[offset + i] = as_int(in);
      g.small[offset + i] = as_int(in - kk + 1);
    }
  }
  return g;
}

Shape output_shape(const ConvGeometry& g, int spatial_dims, bool transposed) {
  Shape out{g.batch, transposed ? g.big_channels : g.small_channels};
  const int offset = 3 - spatial_dims;
  for (int i = 0; i < spatial_dims; ++i) {
    out.push_back(transposed ? g.big[offset + i] : g.small[offset + i]);
  }
  return out;
}

template <class T>
BasicTensor<T> conv_forward(const char* op, const BasicTensor<T>& x, const BasicTensor<T>& k,
                            const BasicTensor<T>& bias, int spatial_dims) {
  const ConvGeometry g = conv_geometry(op, x.shape(), k.shape(), bias.shape(), spatial_dims, false);
  const int rows = g.col_rows();
  const int cols = g.small_spatial();
  const std::size_t in_stride = static_cast<std::size_t>(g.big_channels) * g.big_spatial();
  const std::size_t out_stride = static_cast<std::size_t>(g.small_channels) * cols;

  std::vector<T> out(static_cast<std::size_t>(g.batch) * out_stride);
  std::vector<T> col(static_cast<std::size_t>(rows) * cols);
  const T* xd = x.data().data();
  const T* kd = k.data().data();
  const T* bd = bias.data().data();
  for (int n = 0; n < g.batch; ++n) {
    im2col(g, xd + n * in_stride, col.data());
    T* y = out.data() + n * out_stride;
    kernels::gemm<T>(Trans::kNo, Trans::kNo, g.small_channels, cols, rows, kd, rows, col.data(),
                     cols, false, y, cols);
    for (int c = 0; c < g.small_channels; ++c) {
      T* yc = y + static_cast<std::ptrdiff_t>(c) * cols;
      for (int q = 0; q < cols; ++q) yc[q] += bd[c];
    }
  }

  return autograd::make_result<T>(
      output_shape(g, spatial_dims, false), std::move(out), {x, k, bias},
      [x, k, bias, g](const detail::Node<T>& self) {
        const int rows = g.col_rows();
        const int cols = g.small_spatial();
        const std::size_t in_stride = static_cast<std::size_t>(g.big_channels) * g.big_spatial();
        const std::size_t out_stride = static_cast<std::size_t>(g.small_channels) * cols;
        auto dx = autograd::grad_sink(x);
        auto dk = autograd::grad_sink(k);
        auto db = autograd::grad_sink(bias);
        const T* dy = self.grad.data();
        std::vector<T> col(static_cast<std::size_t>(rows) * cols);
        for (int n = 0; n < g.batch; ++n) {
          const T* dyn = dy + n * out_stride;
          if (!dk.empty()) {
            im2col(g, x.data().data() + n * in_stride, col.data());
            kernels::gemm<T>(Trans::kNo, Trans::kYes, g.small_channels, rows, cols, dyn, cols,
                             col.data(), cols, true, dk.data(), rows);
          }
          if (!db.empty()) {
            for (int c = 0; c < g.small_channels; ++c) {
              const T* row = dyn + static_cast<std::ptrdiff_t>(c) * cols;
              T acc = T(0);
              for (int q = 0; q < cols; ++q) acc += row[q];
              db[c] += acc;
            }
          }
          if (!dx.empty()) {
            kernels::gemm<T>(Trans::kYes, Trans::kNo, rows, cols, g.small_channels,
                             k.data().data(), rows, dyn, cols, false, col.data(), cols);
            col2im_add(g, col.data(), dx.data() + n * in_stride);
          }
        }
      });
}

template <class T>
BasicTensor<T> conv_transpose_forward(const char* op, const BasicTensor<T>& x,
                                      const BasicTensor<T>& k, const BasicTensor<T>& bias,
                                      int spatial_dims) {
  const ConvGeometry g = conv_geometry(op, x.shape(), k.shape(), bias.shape(), spatial_dims, true);
  const int rows = g.col_rows();  // Cout·K
  const int cols = g.small_spatial();
  const std::size_t in_stride = static_cast<std::size_t>(g.small_channels) * cols;
  const std::size_t out_stride = static_cast<std::size_t>(g.big_channels) * g.big_spatial();

  std::vector<T> out(static_cast<std::size_t>(g.batch) * out_stride, T(0));
  std::vector<T> col(static_cast<std::size_t>(rows) * cols);
  const T* xd = x.data().data();
  const T* kd = k.data().data();
  const T* bd = bias.data().data();
  for (int n = 0; n < g.batch; ++n) {
    // col[Cout·K, P] = Wᵀ·x_n with W viewed as [Cin, Cout·K]
    kernels::gemm<T>(Trans::kYes, Trans::kNo, rows, cols, g.small_channels, kd, rows,
                     xd + n * in_stride, cols, false, col.data(), cols);
    T* y = out.data() + n * out_stride;
    col2im_add(g, col.data(), y);
    for (int c = 0; c < g.big_channels; ++c) {
      T* yc = y + static_cast<std::ptrdiff_t>(c) * g.big_spatial();
      for (int q = 0; q < g.big_spatial(); ++q) yc[q] += bd[c];
    }
  }

  return autograd::make_result<T>(
      output_shape(g, spatial_dims, true), std::move(out), {x, k, bias},
      [x, k, bias, g](const detail::Node<T>& self) {
        const int rows = g.col_rows();
        const int cols = g.small_spatial();
        const std::size_t in_stride = static_cast<std::size_t>(g.small_channels) * cols;
        const std::size_t out_stride = static_cast<std::size_t>(g.big_channels) * g.big_spatial();
        auto dx = autograd::grad_sink(x);
        auto dk = autograd::grad_sink(k);
        auto db = autograd::grad_sink(bias);
        std::vector<T> col(static_cast<std::size_t>(rows) * cols);
        for (int n = 0; n < g.batch; ++n) {
          const T* dyn = self.grad.data() + n * out_stride;
          if (!dx.empty() || !dk.empty()) im2col(g, dyn, col.data());
          if (!dx.empty()) {
            kernels::gemm<T>(Trans::kNo, Trans::kNo, g.small_channels, cols, rows,
                             k.data().data(), rows, col.data(), cols, true,
                             dx.data() + n * in_stride, cols);
          }
          if (!dk.empty()) {
            kernels::gemm<T>(Trans::kNo, Trans::kYes, g.small_channels, rows, cols,
                             x.data().data() + n * in_stride, cols, col.data(), cols, true,
                             dk.data(), rows);
          }
          if (!db.empty()) {
            for (int c = 0; c < g.big_channels; ++c) {
              const T* row = dyn + static_cast<std::ptrdiff_t>(c) * g.big_spatial();
              T acc = T(0);
              for (int q = 0; q < g.big_spatial(); ++q) acc += row[q];
              db[c] += acc;
            }
          }
        }
      });
}

// y[..., j, i] = x[..., i, j]
template <class T>
BasicTensor<T> swap_inner_axes(const BasicTensor<T>& x) {
  Shape shape = x.shape();
  const std::size_t r = shape.size();
  const std::int64_t h = shape[r - 2], w = shape[r - 1];
  const std::int64_t outer = static_cast<std::int64_t>(x.numel()) / (h * w);
  std::swap(shape[r - 2], shape[r - 1]);
  std::vector<T> y(x.numel());
  const T* xd = x.data().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) y[(o * w + j) * h + i] = xd[(o * h + i) * w + j];
    }
  }
  return autograd::make_result<T>(std::move(shape), std::move(y), {x},
                                  [x, outer, h, w](const detail::Node<T>& self) {
                                    auto dx = autograd::grad_sink(x);
                                    for (std::int64_t o = 0; o < outer; ++o) {
                                      for (std::int64_t i = 0; i < h; ++i) {
                                        for (std::int64_t j = 0; j < w; ++j) {
                                          dx[(o * h + i) * w + j] += self.grad[(o * w + j) * h + i];
                                        }
                                      }
                                    }
                                  });
}

// im2col and col2im move rows as long as the innermost output extent. When
// that extent is the shorter of the last two, running on swapped axes gives
// the same result with longer rows.
template <class T>
bool prefer_swapped(const char* op, const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& bias,
                    int spatial_dims, bool transposed) {
  const ConvGeometry g = conv_geometry(op, x.shape(), k.shape(), bias.shape(), spatial_dims, transposed);
  return g.small[2] < g.small[1];
}

}  // namespace

Shape conv_output_shape(const Shape& input, const Shape& kernel, bool transposed) {
  const int spatial = static_cast<int>(kernel.size()) - 2;
  if (spatial != 2 && spatial != 3) {
    throw DimensionError(describe("conv", "kernel", kernel, "input", input));
  }
  const Shape bias{transposed ? kernel[1] : kernel[0]};
  const ConvGeometry g = conv_geometry(transposed ? "conv_transpose" : "conv", input, kernel, bias,
                                       spatial, transposed);
  return output_shape(g, spatial, transposed);
}

template <class T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw DimensionError(describe("linear", "input", xs, "weight", ws));
  }
  if (bias.shape().size() != 1 || bias.shape()[0] != ws[0]) {
    throw DimensionError(describe("linear", "bias", bias.shape(), "weight", ws));
  }
  const int batch = as_int(xs[0]);
  const int in = as_int(xs[1]);
  const int out = as_int(ws[0]);
  std::vector<T> y(static_cast<std::size_t>(batch) * out);
  kernels::gemm<T>(Trans::kNo, Trans::kYes, batch, out, in, x.data().data(), in, w.data().data(),
                   in, false, y.data(), out);
  const T* bd = bias.data().data();
  for (int b = 0; b < batch; ++b) {
    T* row = y.data() + static_cast<std::ptrdiff_t>(b) * out;
    for (int o = 0; o < out; ++o) row[o] += bd[o];
  }
  return autograd::make_result<T>(
      Shape{batch, out}, std::move(y), {x, w, bias},
      [x, w, bias, batch, in, out](const detail::Node<T>& self) {
        const T* dy = self.grad.data();
        if (auto dx = autograd::grad_sink(x); !dx.empty()) {
          kernels::gemm<T>(Trans::kNo, Trans::kNo, batch, in, out, dy, out, w.data().data(), in,
                           true, dx.data(), in);
        }
        if (auto dw = autograd::grad_sink(w); !dw.empty()) {
          kernels::gemm<T>(Trans::kYes, Trans::kNo, out, in, batch, dy, out, x.data().data(), in,
                           true, dw.data(), in);
        }
        if (auto db = autograd::grad_sink(bias); !db.empty()) {
          for (int b = 0; b < batch; ++b) {
            const T* row = dy + static_cast<std::ptrdiff_t>(b) * out;
            for (int o = 0; o < out; ++o) db[o] += row[o];
          }
        }
      });
}

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& bias) {
  if (prefer_swapped("conv2d", x, k, bias, 2, false)) {
    return swap_inner_axes(conv_forward("conv2d", swap_inner_axes(x), swap_inner_axes(k), bias, 2));
  }
  return conv_forward("conv2d", x, k, bias, 2);
}

template <class T>
BasicTensor<T> conv3d(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& bias) {
  if (prefer_swapped("conv3d", x, k, bias, 3, false)) {
    return swap_inner_axes(conv_forward("conv3d", swap_inner_axes(x), swap_inner_axes(k), bias, 3));
  }
  return conv_forward("conv3d", x, k, bias, 3);
}

template <class T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& x, const BasicTensor<T>& k,
                                const BasicTensor<T>& bias) {
  if (prefer_swapped("conv_transpose2d", x, k, bias, 2, true)) {
    return swap_inner_axes(
        conv_transpose_forward("conv_transpose2d", swap_inner_axes(x), swap_inner_axes(k), bias, 2));
  }
  return conv_transpose_forward("conv_transpose2d", x, k, bias, 2);
}

template <class T>
BasicTensor<T> conv_transpose3d(const BasicTensor<T>& x, const BasicTensor<T>& k,
                                const BasicTensor<T>& bias) {
  if (prefer_swapped("conv_transpose3d", x, k, bias, 3, true)) {
    return swap_inner_axes(
        conv_transpose_forward("conv_transpose3d", swap_inner_axes(x), swap_inner_axes(k), bias, 3));
  }
  return conv_transpose_forward("conv_transpose3d", x, k, bias, 3);
}

template <class T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope) {
  std::vector<T> y(x.data().begin(), x.data().end());
  for (auto& v : y) v = v > T(0) ? v : slope * v;
  return autograd::make_result<T>(x.shape(), std::move(y), {x}, [x, slope](const detail::Node<T>& self) {
    auto dx = autograd::grad_sink(x);
    const auto xv = x.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] += xv[i] > T(0) ? self.grad[i] : slope * self.grad[i];
    }
  });
}

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (numel(shape) != static_cast<std::int64_t>(x.numel())) {
    throw DimensionError(describe("reshape", "input", x.shape(), "target", shape));
  }
  std::vector<T> y(x.data().begin(), x.data().end());
  return autograd::make_result<T>(std::move(shape), std::move(y), {x},
                                  [x](const detail::Node<T>& self) {
                                    auto dx = autograd::grad_sink(x);
                                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
                                  });
}

template <class T>
BasicTensor<T> slice_columns(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count) {
  const Shape& s = x.shape();
  if (s.size() != 2 || begin < 0 || count <= 0 || begin + count > s[1]) {
    throw DimensionError("slice_columns: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside input " + to_string(s));
  }
  const std::int64_t rows = s[0];
  const std::int64_t width = s[1];
  std::vector<T> y(static_cast<std::size_t>(rows * count));
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().data() + r * width + begin, count, y.data() + r * count);
  }
  return autograd::make_result<T>(
      Shape{rows, count}, std::move(y), {x}, [x, rows, width, begin, count](const detail::Node<T>& self) {
        auto dx = autograd::grad_sink(x);
        for (std::int64_t r = 0; r < rows; ++r) {
          for (std::int64_t c = 0; c < count; ++c) dx[r * width + begin + c] += self.grad[r * count + c];
        }
      });
}

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T total = T(0);
  for (const T v : x.data()) total += v;
  return autograd::make_result<T>(Shape{1}, {total}, {x}, [x](const detail::Node<T>& self) {
    auto dx = autograd::grad_sink(x);
    for (auto& g : dx) g += self.grad[0];
  });
}

template <class T>
BasicTensor<T> inner_product(const BasicTensor<T>& x, const BasicTensor<T>& weights) {
  if (x.shape() != weights.shape()) {
    throw DimensionError(describe("inner_product", "input", x.shape(), "weights", weights.shape()));
  }
  T total = T(0);
  for (std::size_t i = 0; i < x.numel(); ++i) total += x.data()[i] * weights.data()[i];
  return autograd::make_result<T>(Shape{1}, {total}, {x}, [x, weights](const detail::Node<T>& self) {
    auto dx = autograd::grad_sink(x);
    const auto wv = weights.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[0] * wv[i];
  });
}

template <class T>
BasicTensor<T> weighted_sum(const std::vector<std::pair<BasicTensor<T>, T>>& terms) {
  if (terms.empty()) throw ContractError("weighted_sum needs at least one term");
  const Shape& shape = terms.front().first.shape();
  std::vector<T> y(terms.front().first.numel(), T(0));
  std::vector<BasicTensor<T>> inputs;
  for (const auto& [t, coeff] : terms) {
    if (t.shape() != shape) {
      throw DimensionError(describe("weighted_sum", "term", t.shape(), "term", shape));
    }
    const auto v = t.data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += coeff * v[i];
    inputs.push_back(t);
  }
  return autograd::make_result<T>(shape, std::move(y), inputs, [terms](const detail::Node<T>& self) {
    for (const auto& [t, coeff] : terms) {
      auto dt = autograd::grad_sink(t);
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += coeff * self.grad[i];
    }
  });
}

#define BLM_INSTANTIATE_OPS(T)                                                                  \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&);                                        \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&);                                        \
  template BasicTensor<T> conv3d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&);                                        \
  template BasicTensor<T> conv_transpose2d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                           const BasicTensor<T>&);                              \
  template BasicTensor<T> conv_transpose3d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                           const BasicTensor<T>&);                              \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                                 \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                \
  template BasicTensor<T> slice_columns(const BasicTensor<T>&, std::int64_t, std::int64_t);     \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                           \
  template BasicTensor<T> inner_product(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> weighted_sum(const std::vector<std::pair<BasicTensor<T>, T>>&);

BLM_INSTANTIATE_OPS(float)
BLM_INSTANTIATE_OPS(double)

#undef BLM_INSTANTIATE_OPS

}  // namespace blm
