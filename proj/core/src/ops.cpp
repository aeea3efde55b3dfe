#include "metaviewer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

namespace metaviewer::ops {
namespace {

Tape& tape_of(const Var& v, const char* op) {
  if (!v.valid()) throw std::invalid_argument(fmt::format("{}: operand is not attached to a tape", op));
  return *v.tape();
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shapes {} and {} differ", op, shape_string(a.shape()), shape_string(b.shape())));
  }
}

void require_rank(const char* op, const Var& x, std::size_t rank) {
  if (x.value().rank() != rank) {
    throw ShapeError(fmt::format("{}: expected rank {}, got shape {}", op, rank, shape_string(x.shape())));
  }
}

// (outer, axis, inner) factorization around `axis`.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename Fwd, typename Deriv>
Var unary(const char* op, const Var& x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return tape_of(x, op).record(op, std::move(out), {x}, [deriv](const BackwardArgs& a) {
    if (Tensor* g = a.in_grads[0]) {
      const Tensor& in = *a.in_values[0];
      for (std::size_t i = 0; i < in.size(); ++i) (*g)[i] += a.grad_out[i] * deriv(in[i], a.out[i]);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value() + b.value();
  return tape_of(a, "add").record("add", std::move(out), {a, b}, [](const BackwardArgs& args) {
    if (args.in_grads[0]) *args.in_grads[0] += args.grad_out;
    if (args.in_grads[1]) *args.in_grads[1] += args.grad_out;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value() - b.value();
  return tape_of(a, "sub").record("sub", std::move(out), {a, b}, [](const BackwardArgs& args) {
    if (args.in_grads[0]) *args.in_grads[0] += args.grad_out;
    if (args.in_grads[1]) *args.in_grads[1] -= args.grad_out;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return tape_of(a, "mul").record("mul", std::move(out), {a, b}, [](const BackwardArgs& args) {
    const Tensor& x = *args.in_values[0];
    const Tensor& y = *args.in_values[1];
    if (Tensor* g = args.in_grads[0]) {
      for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += args.grad_out[i] * y[i];
    }
    if (Tensor* g = args.in_grads[1]) {
      for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += args.grad_out[i] * x[i];
    }
  });
}

Var maximum(const Var& a, const Var& b) {
  require_same_shape("maximum", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::max(av[i], bv[i]);
  return tape_of(a, "maximum").record("maximum", std::move(out), {a, b}, [](const BackwardArgs& args) {
    const Tensor& x = *args.in_values[0];
    const Tensor& y = *args.in_values[1];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool first = x[i] >= y[i];
      Tensor* g = args.in_grads[first ? 0 : 1];
      if (g) (*g)[i] += args.grad_out[i];
    }
  });
}

Var scale(const Var& x, double s) {
  Tensor out = x.value() * s;
  return tape_of(x, "scale").record("scale", std::move(out), {x}, [s](const BackwardArgs& args) {
    if (Tensor* g = args.in_grads[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * args.grad_out[i];
    }
  });
}

Var divide(const Var& x, double s) {
  if (s == 0.0) throw std::invalid_argument("divide: division by zero");
  return scale(x, 1.0 / s);
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError(fmt::format("matmul: shapes {} and {} do not chain", shape_string(a.shape()), shape_string(b.shape())));
  }
  const double* A = a.value().data();
  const double* B = b.value().data();
  Tensor out(Shape{n, m});
  double* C = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * m;
      double* crow = C + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return tape_of(a, "matmul").record("matmul", std::move(out), {a, b}, [n, k, m](const BackwardArgs& args) {
    const double* A = args.in_values[0]->data();
    const double* B = args.in_values[1]->data();
    const double* G = args.grad_out.data();
    if (Tensor* ga = args.in_grads[0]) {
      double* GA = ga->data();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += G[i * m + j] * B[p * m + j];
          GA[i * k + p] += s;
        }
      }
    }
    if (Tensor* gb = args.in_grads[1]) {
      double* GB = gb->data();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) GB[p * m + j] += aip * G[i * m + j];
        }
      }
    }
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  require_rank("affine", x, 2);
  require_rank("affine", w, 2);
  require_rank("affine", b, 1);
  const std::size_t n = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[1];
  if (w.shape()[0] != in || b.shape()[0] != out_dim) {
    throw ShapeError(fmt::format("affine: input {} weight {} bias {}", shape_string(x.shape()), shape_string(w.shape()),
                                 shape_string(b.shape())));
  }
  const double* X = x.value().data();
  const double* W = w.value().data();
  const double* Bv = b.value().data();
  Tensor out(Shape{n, out_dim});
  double* Y = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* yrow = Y + i * out_dim;
    std::copy_n(Bv, out_dim, yrow);
    for (std::size_t p = 0; p < in; ++p) {
      const double xip = X[i * in + p];
      if (xip == 0.0) continue;
      const double* wrow = W + p * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) yrow[j] += xip * wrow[j];
    }
  }
  return tape_of(x, "affine").record("affine", std::move(out), {x, w, b}, [n, in, out_dim](const BackwardArgs& args) {
    const double* X = args.in_values[0]->data();
    const double* W = args.in_values[1]->data();
    const double* G = args.grad_out.data();
    if (Tensor* gx = args.in_grads[0]) {
      double* GX = gx->data();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < in; ++p) {
          double s = 0.0;
          const double* wrow = W + p * out_dim;
          const double* grow = G + i * out_dim;
          for (std::size_t j = 0; j < out_dim; ++j) s += grow[j] * wrow[j];
          GX[i * in + p] += s;
        }
      }
    }
    if (Tensor* gw = args.in_grads[1]) {
      double* GW = gw->data();
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G + i * out_dim;
        for (std::size_t p = 0; p < in; ++p) {
          const double xip = X[i * in + p];
          if (xip == 0.0) continue;
          double* gwrow = GW + p * out_dim;
          for (std::size_t j = 0; j < out_dim; ++j) gwrow[j] += xip * grow[j];
        }
      }
    }
    if (Tensor* gb = args.in_grads[2]) {
      double* GB = gb->data();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < out_dim; ++j) GB[j] += G[i * out_dim + j];
      }
    }
  });
}

Var relu(const Var& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Var exp(const Var& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Var log(const Var& x) {
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) throw std::domain_error(fmt::format("log: non-positive input {} at index {}", xv[i], i));
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return tape_of(x, "sum").record("sum", Tensor::scalar(s), {x}, [](const BackwardArgs& args) {
    if (Tensor* g = args.in_grads[0]) {
      const double go = args.grad_out[0];
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += go;
    }
  });
}

Var mean(const Var& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return divide(sum(x), static_cast<double>(x.size()));
}

Var sum_axis(const Var& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw ShapeError(fmt::format("sum_axis: axis {} out of range for {}", axis, shape_string(s)));
  const AxisSplit sp = split_at(s, axis);
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  const double* X = x.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const double* src = X + (o * sp.extent + e) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  return tape_of(x, "sum_axis").record("sum_axis", std::move(out), {x}, [sp](const BackwardArgs& args) {
    if (Tensor* g = args.in_grads[0]) {
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t e = 0; e < sp.extent; ++e) {
          double* dst = g->data() + (o * sp.extent + e) * sp.inner;
          const double* src = args.grad_out.data() + o * sp.inner;
          for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
      }
    }
  });
}

Var mean_axis(const Var& x, std::size_t axis) {
  if (axis >= x.shape().size()) {
    throw ShapeError(fmt::format("mean_axis: axis {} out of range for {}", axis, shape_string(x.shape())));
  }
  const std::size_t extent = x.shape()[axis];
  if (extent == 0) throw ShapeError("mean_axis: empty axis");
  return divide(sum_axis(x, axis), static_cast<double>(extent));
}

Var squared_error(const Var& a, const Var& b) {
  require_same_shape("squared_error", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return tape_of(a, "squared_error").record("squared_error", Tensor::scalar(s), {a, b}, [](const BackwardArgs& args) {
    const Tensor& x = *args.in_values[0];
    const Tensor& y = *args.in_values[1];
    const double go = args.grad_out[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = 2.0 * go * (x[i] - y[i]);
      if (args.in_grads[0]) (*args.in_grads[0])[i] += d;
      if (args.in_grads[1]) (*args.in_grads[1])[i] -= d;
    }
  });
}

Var cosine_similarity(const Var& a, const Var& b) {
  require_rank("cosine_similarity", a, 2);
  require_rank("cosine_similarity", b, 2);
  const std::size_t n = a.shape()[0], m = b.shape()[0], d = a.shape()[1];
  if (b.shape()[1] != d) {
    throw ShapeError(fmt::format("cosine_similarity: shapes {} and {} differ in feature dim", shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
  auto row_norms = [d](const Tensor& t, const char* which) {
    std::vector<double> norms(t.dim(0));
    for (std::size_t r = 0; r < t.dim(0); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += t[r * d + c] * t[r * d + c];
      norms[r] = std::sqrt(s);
      if (norms[r] == 0.0) throw std::domain_error(fmt::format("cosine_similarity: zero-norm row {} in {}", r, which));
    }
    return norms;
  };
  std::vector<double> na = row_norms(a.value(), "first operand");
  std::vector<double> nb = row_norms(b.value(), "second operand");
  const double* A = a.value().data();
  const double* B = b.value().data();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += A[i * d + c] * B[j * d + c];
      out[i * m + j] = dot / (na[i] * nb[j]);
    }
  }
  return tape_of(a, "cosine_similarity")
      .record("cosine_similarity", std::move(out), {a, b}, [n, m, d, na, nb](const BackwardArgs& args) {
        const double* A = args.in_values[0]->data();
        const double* B = args.in_values[1]->data();
        const double* S = args.out.data();
        const double* G = args.grad_out.data();
        // dS_ij/da_i = b_j/(|a_i||b_j|) - S_ij a_i/|a_i|^2
        if (Tensor* ga = args.in_grads[0]) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const double g = G[i * m + j];
              if (g == 0.0) continue;
              const double c1 = g / (na[i] * nb[j]);
              const double c2 = g * S[i * m + j] / (na[i] * na[i]);
              for (std::size_t c = 0; c < d; ++c) (*ga)[i * d + c] += c1 * B[j * d + c] - c2 * A[i * d + c];
            }
          }
        }
        if (Tensor* gb = args.in_grads[1]) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const double g = G[i * m + j];
              if (g == 0.0) continue;
              const double c1 = g / (na[i] * nb[j]);
              const double c2 = g * S[i * m + j] / (nb[j] * nb[j]);
              for (std::size_t c = 0; c < d; ++c) (*gb)[j * d + c] += c1 * A[i * d + c] - c2 * B[j * d + c];
            }
          }
        }
      });
}

Var cosine(const Var& a, const Var& b) {
  require_rank("cosine", a, 1);
  require_rank("cosine", b, 1);
  const Var ra = reshape(a, Shape{1, a.shape()[0]});
  const Var rb = reshape(b, Shape{1, b.shape()[0]});
  return reshape(cosine_similarity(ra, rb), Shape{});
}

Var channel_conv1d(const Var& x, const Var& kernel, const Var& bias) {
  require_rank("channel_conv1d", x, 3);
  require_rank("channel_conv1d", kernel, 3);
  require_rank("channel_conv1d", bias, 1);
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = kernel.shape()[0], width = kernel.shape()[2];
  if (kernel.shape()[1] != cin || bias.shape()[0] != cout) {
    throw ShapeError(fmt::format("channel_conv1d: input {} kernel {} bias {}", shape_string(x.shape()),
                                 shape_string(kernel.shape()), shape_string(bias.shape())));
  }
  if (width % 2 == 0) {
    throw ShapeError(fmt::format("channel_conv1d: kernel width must be odd, kernel {}", shape_string(kernel.shape())));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t L = static_cast<std::ptrdiff_t>(len);
  const double* X = x.value().data();
  const double* K = kernel.value().data();
  const double* Bv = bias.value().data();
  Tensor out(Shape{batch, cout, len});
  double* Y = out.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* y = Y + (b * cout + o) * len;
      std::fill_n(y, len, Bv[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xc = X + (b * cin + c) * len;
        const double* kc = K + (o * cin + c) * width;
        for (std::size_t j = 0; j < width; ++j) {
          const double w = kc[j];
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
          const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(L, L - shift);
          for (std::ptrdiff_t t = t0; t < t1; ++t) y[t] += w * xc[t + shift];
        }
      }
    }
  }
  return tape_of(x, "channel_conv1d")
      .record("channel_conv1d", std::move(out), {x, kernel, bias},
              [batch, cin, len, cout, width, pad, L](const BackwardArgs& args) {
                const double* X = args.in_values[0]->data();
                const double* K = args.in_values[1]->data();
                const double* G = args.grad_out.data();
                Tensor* gx = args.in_grads[0];
                Tensor* gk = args.in_grads[1];
                Tensor* gb = args.in_grads[2];
                for (std::size_t b = 0; b < batch; ++b) {
                  for (std::size_t o = 0; o < cout; ++o) {
                    const double* g = G + (b * cout + o) * len;
                    if (gb) {
                      double s = 0.0;
                      for (std::size_t t = 0; t < len; ++t) s += g[t];
                      (*gb)[o] += s;
                    }
                    for (std::size_t c = 0; c < cin; ++c) {
                      const double* xc = X + (b * cin + c) * len;
                      const double* kc = K + (o * cin + c) * width;
                      for (std::size_t j = 0; j < width; ++j) {
                        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(L, L - shift);
                        if (gk) {
                          double s = 0.0;
                          for (std::ptrdiff_t t = t0; t < t1; ++t) s += g[t] * xc[t + shift];
                          (*gk)[(o * cin + c) * width + j] += s;
                        }
                        if (gx) {
                          double* gxc = gx->data() + (b * cin + c) * len;
                          const double w = kc[j];
                          for (std::ptrdiff_t t = t0; t < t1; ++t) gxc[t + shift] += w * g[t];
                        }
                      }
                    }
                  }
                }
              });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError(fmt::format("concat: axis {} out of range for {}", axis, shape_string(first)));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw ShapeError(fmt::format("concat: shapes {} and {} differ off axis {}", shape_string(first), shape_string(s), axis));
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit sp = split_at(out_shape, axis);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].value().data();
    const std::size_t chunk = extents[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(src + o * chunk, chunk, out.data() + (o * sp.extent + offset) * sp.inner);
    }
    offset += extents[p];
  }
  return tape_of(parts[0], "concat").record("concat", std::move(out), parts, [sp, extents](const BackwardArgs& args) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < extents.size(); ++p) {
      const std::size_t chunk = extents[p] * sp.inner;
      if (Tensor* g = args.in_grads[p]) {
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = args.grad_out.data() + (o * sp.extent + offset) * sp.inner;
          double* dst = g->data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      offset += extents[p];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return tape_of(x, "reshape").record("reshape", std::move(out), {x}, [](const BackwardArgs& args) {
    if (Tensor* g = args.in_grads[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += args.grad_out[i];
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin + length > s[axis]) {
    throw ShapeError(fmt::format("slice: [{}, {}) on axis {} of {}", begin, begin + length, axis, shape_string(s)));
  }
  const AxisSplit sp = split_at(s, axis);
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor out(out_shape);
  const double* X = x.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(X + (o * sp.extent + begin) * sp.inner, length * sp.inner, out.data() + o * length * sp.inner);
  }
  return tape_of(x, "slice").record("slice", std::move(out), {x}, [sp, begin, length](const BackwardArgs& args) {
    if (Tensor* g = args.in_grads[0]) {
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const double* src = args.grad_out.data() + o * length * sp.inner;
        double* dst = g->data() + (o * sp.extent + begin) * sp.inner;
        for (std::size_t i = 0; i < length * sp.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Var diag(const Var& x) {
  require_rank("diag", x, 2);
  const std::size_t n = x.shape()[0];
  if (x.shape()[1] != n) throw ShapeError(fmt::format("diag: matrix {} is not square", shape_string(x.shape())));
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) out[i] = x.value()[i * n + i];
  return tape_of(x, "diag").record("diag", std::move(out), {x}, [n](const BackwardArgs& args) {
    if (Tensor* g = args.in_grads[0]) {
      for (std::size_t i = 0; i < n; ++i) (*g)[i * n + i] += args.grad_out[i];
    }
  });
}

}  // namespace metaviewer::ops
