#include <algorithm>
#include <cmath>
#include <limits>

#include "stroketok/error.hpp"
#include "stroketok/simd/kernels.hpp"
#include "stroketok/tensor.hpp"

namespace stroketok::tensor {
namespace {

using BackwardFn = std::function<void(const Node&)>;

Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> parents,
                   BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const Tensor* p : parents) {
    if (p->defined() && p->requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Tensor* p : parents) {
      if (p->defined()) node->parents.push_back(p->node());
    }
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error(ErrorKind::ShapeMismatch, op + ": " + detail);
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(a.shape()));
}

// Gradient buffer of a parent, or nullptr when it does not take gradients.
double* grad_of(Node* n) { return n->requires_grad ? n->grad.data() : nullptr; }

// C(n,m) += A(n,k) B(k,m)
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a[i * k + p];
      if (s != 0.0) simd::axpy(s, b + p * m, c + i * m, m);
    }
  }
}

// C(n,m) += A(n,k) B(m,k)^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) c[i * m + j] += simd::dot(a + i * k, b + j * k, k);
  }
}

// C(n,m) += A(k,n)^T B(k,m)
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = a[p * n + i];
      if (s != 0.0) simd::axpy(s, b + p * m, c + i * m, m);
    }
  }
}

// cols(C*K, cols_len)[c*K + k, t] = x(C, x_len)[c, t*stride + k - pad], zero outside.
void im2col(const double* x, std::size_t channels, std::size_t x_len, std::size_t kernel, std::size_t stride,
            std::size_t pad, std::size_t cols_len, double* cols) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      double* row = cols + (c * kernel + k) * cols_len;
      for (std::size_t t = 0; t < cols_len; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
        row[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(x_len)) ? x[c * x_len + static_cast<std::size_t>(pos)] : 0.0;
      }
    }
  }
}

// Adjoint of im2col: scatter-adds cols back into x.
void col2im(const double* cols, std::size_t channels, std::size_t x_len, std::size_t kernel, std::size_t stride,
            std::size_t pad, std::size_t cols_len, double* x) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* row = cols + (c * kernel + k) * cols_len;
      for (std::size_t t = 0; t < cols_len; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(x_len)) x[c * x_len + static_cast<std::size_t>(pos)] += row[t];
      }
    }
  }
}

void add_bias(std::vector<double>& out, const Tensor& bias, std::size_t channels, std::size_t len) {
  if (!bias.defined()) return;
  if (bias.numel() != channels) shape_error("bias", "expected " + std::to_string(channels) + " entries");
  const auto b = bias.data();
  for (std::size_t o = 0; o < channels; ++o) {
    for (std::size_t t = 0; t < len; ++t) out[o * len + t] += b[o];
  }
}

void bias_backward(Node* bias, const double* g, std::size_t channels, std::size_t len) {
  double* gb = bias ? grad_of(bias) : nullptr;
  if (!gb) return;
  for (std::size_t o = 0; o < channels; ++o) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += g[o * len + t];
    gb[o] += s;
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return make_result(a.shape(), std::move(out), {&a, &b}, [pa, pb](const Node& self) {
    for (Node* p : {pa, pb}) {
      if (double* g = grad_of(p)) simd::axpy(1.0, self.grad.data(), g, self.grad.size());
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return make_result(a.shape(), std::move(out), {&a, &b}, [pa, pb](const Node& self) {
    if (double* g = grad_of(pa)) simd::axpy(1.0, self.grad.data(), g, self.grad.size());
    if (double* g = grad_of(pb)) simd::axpy(-1.0, self.grad.data(), g, self.grad.size());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return make_result(a.shape(), std::move(out), {&a, &b}, [pa, pb](const Node& self) {
    const std::size_t n = self.grad.size();
    if (double* g = grad_of(pa)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (double* g = grad_of(pb)) {
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= s;
  Node* pa = a.node().get();
  return make_result(a.shape(), std::move(out), {&a}, [pa, s](const Node& self) {
    simd::axpy(s, self.grad.data(), grad_of(pa), self.grad.size());
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  Node* pa = a.node().get();
  return make_result(a.shape(), std::move(out), {&a}, [pa](const Node& self) {
    double* g = grad_of(pa);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa->value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = std::clamp(v, lo, hi);
  Node* pa = a.node().get();
  return make_result(a.shape(), std::move(out), {&a}, [pa, lo, hi](const Node& self) {
    double* g = grad_of(pa);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = pa->value[i];
      if (v > lo && v < hi) g[i] += self.grad[i];
    }
  });
}

Tensor stop_gradient(const Tensor& a) { return a.detach(); }

Tensor straight_through(const Tensor& input, const Tensor& quantized) {
  require_same(input, quantized, "straight_through");
  std::vector<double> out(quantized.data().begin(), quantized.data().end());
  Node* pi = input.node().get();
  return make_result(input.shape(), std::move(out), {&input}, [pi](const Node& self) {
    simd::axpy(1.0, self.grad.data(), grad_of(pi), self.grad.size());
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Node* pa = a.node().get();
  return make_result({1}, {s}, {&a}, [pa](const Node& self) {
    double* g = grad_of(pa);
    for (std::size_t i = 0; i < pa->value.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) shape_error("mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  require_same(prediction, target, "mse");
  const std::size_t n = prediction.numel();
  if (n == 0) shape_error("mse", "empty tensor");
  double s = 0.0;
  const auto p = prediction.data(), t = target.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p[i] - t[i];
    s += d * d;
  }
  Node* pp = prediction.node().get();
  Node* pt = target.node().get();
  return make_result({1}, {s / static_cast<double>(n)}, {&prediction, &target}, [pp, pt, n](const Node& self) {
    const double k = 2.0 * self.grad[0] / static_cast<double>(n);
    double* gp = grad_of(pp);
    double* gt = grad_of(pt);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = k * (pp->value[i] - pt->value[i]);
      if (gp) gp[i] += d;
      if (gt) gt[i] -= d;
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require_rank(x, 2, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  const std::size_t ci = x.dim(0), len = x.dim(1);
  const std::size_t co = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != ci) shape_error("conv1d", "kernel expects " + std::to_string(kernel.dim(1)) + " input channels, got " + std::to_string(ci));
  if (stride == 0) shape_error("conv1d", "stride must be >= 1");
  if (k > len + 2 * padding) shape_error("conv1d", "kernel longer than padded input");
  const std::size_t out_len = (len + 2 * padding - k) / stride + 1;
  const std::size_t rows = ci * k;

  auto cols = std::make_shared<std::vector<double>>(rows * out_len);
  im2col(x.data().data(), ci, len, k, stride, padding, out_len, cols->data());
  std::vector<double> out(co * out_len, 0.0);
  gemm_nn(kernel.data().data(), cols->data(), out.data(), co, rows, out_len);
  add_bias(out, bias, co, out_len);

  Node* px = x.node().get();
  Node* pk = kernel.node().get();
  Node* pb = bias.defined() ? bias.node().get() : nullptr;
  return make_result({co, out_len}, std::move(out), {&x, &kernel, &bias},
                     [=](const Node& self) {
                       const double* g = self.grad.data();
                       if (double* gk = grad_of(pk)) gemm_nt(g, cols->data(), gk, co, out_len, rows);
                       if (double* gx = grad_of(px)) {
                         std::vector<double> gcols(rows * out_len, 0.0);
                         gemm_tn(pk->value.data(), g, gcols.data(), rows, co, out_len);
                         col2im(gcols.data(), ci, len, k, stride, padding, out_len, gx);
                       }
                       bias_backward(pb, g, co, out_len);
                     });
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding) {
  require_rank(x, 2, "conv_transpose1d input");
  require_rank(kernel, 3, "conv_transpose1d kernel");
  const std::size_t ci = x.dim(0), len = x.dim(1);
  const std::size_t co = kernel.dim(1), k = kernel.dim(2);
  if (kernel.dim(0) != ci) shape_error("conv_transpose1d", "kernel expects " + std::to_string(kernel.dim(0)) + " input channels, got " + std::to_string(ci));
  if (stride == 0) shape_error("conv_transpose1d", "stride must be >= 1");
  if (len == 0 || (len - 1) * stride + k < 2 * padding + 1) shape_error("conv_transpose1d", "output would be empty");
  const std::size_t out_len = (len - 1) * stride + k - 2 * padding;
  const std::size_t rows = co * k;

  std::vector<double> cols(rows * len, 0.0);
  gemm_tn(kernel.data().data(), x.data().data(), cols.data(), rows, ci, len);
  std::vector<double> out(co * out_len, 0.0);
  col2im(cols.data(), co, out_len, k, stride, padding, len, out.data());
  add_bias(out, bias, co, out_len);

  Node* px = x.node().get();
  Node* pk = kernel.node().get();
  Node* pb = bias.defined() ? bias.node().get() : nullptr;
  return make_result({co, out_len}, std::move(out), {&x, &kernel, &bias}, [=](const Node& self) {
    const double* g = self.grad.data();
    std::vector<double> gcols(rows * len);
    im2col(g, co, out_len, k, stride, padding, len, gcols.data());
    if (double* gx = grad_of(px)) gemm_nn(pk->value.data(), gcols.data(), gx, ci, rows, len);
    if (double* gk = grad_of(pk)) gemm_nt(px->value.data(), gcols.data(), gk, ci, len, rows);
    bias_backward(pb, g, co, out_len);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<double> out(n * m, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), n, k, m);
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return make_result({n, m}, std::move(out), {&a, &b}, [=](const Node& self) {
    const double* g = self.grad.data();
    if (double* ga = grad_of(pa)) gemm_nt(g, pb->value.data(), ga, n, m, k);
    if (double* gb = grad_of(pb)) gemm_tn(pa->value.data(), g, gb, k, n, m);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = x[i * m + j];
  }
  Node* pa = a.node().get();
  return make_result({m, n}, std::move(out), {&a}, [=](const Node& self) {
    double* g = grad_of(pa);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad[j * n + i];
    }
  });
}

Tensor add_row_vector(const Tensor& a, const Tensor& row) {
  require_rank(a, 2, "add_row_vector");
  const std::size_t n = a.dim(0), m = a.dim(1);
  if (row.numel() != m) shape_error("add_row_vector", "row has " + std::to_string(row.numel()) + " entries, need " + std::to_string(m));
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, row.data().data(), out.data() + i * m, m);
  Node* pa = a.node().get();
  Node* pr = row.node().get();
  return make_result({n, m}, std::move(out), {&a, &row}, [=](const Node& self) {
    if (double* g = grad_of(pa)) simd::axpy(1.0, self.grad.data(), g, n * m);
    if (double* g = grad_of(pr)) {
      for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, self.grad.data() + i * m, g, m);
    }
  });
}

Tensor slice_columns(const Tensor& a, std::size_t start, std::size_t width) {
  require_rank(a, 2, "slice_columns");
  const std::size_t n = a.dim(0), m = a.dim(1);
  if (start + width > m) shape_error("slice_columns", "range past the last column");
  std::vector<double> out(n * width);
  const auto x = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.data() + i * m + start, width, out.data() + i * width);
  }
  Node* pa = a.node().get();
  return make_result({n, width}, std::move(out), {&a}, [=](const Node& self) {
    double* g = grad_of(pa);
    for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, self.grad.data() + i * width, g + i * m + start, width);
  });
}

Tensor concat_columns(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_columns", "no inputs");
  const std::size_t n = parts.front().dim(0);
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_columns");
    if (p.dim(0) != n) shape_error("concat_columns", "row counts differ");
    m += p.dim(1);
  }
  std::vector<double> out(n * m);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(p.data().data() + i * w, w, out.data() + i * m + offset);
    offset += w;
  }
  auto node = std::make_shared<Node>();
  node->shape = {n, m};
  node->value = std::move(out);
  node->requires_grad = std::any_of(parts.begin(), parts.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (node->requires_grad) {
    std::vector<Node*> raw;
    for (const auto& p : parts) {
      node->parents.push_back(p.node());
      raw.push_back(p.node().get());
    }
    node->backward = [raw, n, m](const Node& self) {
      std::size_t off = 0;
      for (Node* p : raw) {
        const std::size_t w = p->shape[1];
        if (double* g = grad_of(p)) {
          for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, self.grad.data() + i * m + off, g + i * w, w);
        }
        off += w;
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_rows", "no inputs");
  const std::size_t m = parts.front().dim(1);
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != m) shape_error("concat_rows", "column counts differ");
    n += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(n * m);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  auto node = std::make_shared<Node>();
  node->shape = {n, m};
  node->value = std::move(out);
  node->requires_grad = std::any_of(parts.begin(), parts.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (node->requires_grad) {
    std::vector<Node*> raw;
    for (const auto& p : parts) {
      node->parents.push_back(p.node());
      raw.push_back(p.node().get());
    }
    node->backward = [raw](const Node& self) {
      std::size_t off = 0;
      for (Node* p : raw) {
        const std::size_t count = p->value.size();
        if (double* g = grad_of(p)) simd::axpy(1.0, self.grad.data() + off, g, count);
        off += count;
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (gamma.numel() != d || beta.numel() != d) shape_error("layer_norm", "gamma/beta must have " + std::to_string(d) + " entries");
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  std::vector<double> out(n * d);
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[i * d + j] = h;
      out[i * d + j] = gv[j] * h + bv[j];
    }
  }
  Node* px = x.node().get();
  Node* pg = gamma.node().get();
  Node* pb = beta.node().get();
  return make_result({n, d}, std::move(out), {&x, &gamma, &beta}, [=](const Node& self) {
    double* gx = grad_of(px);
    double* gg = grad_of(pg);
    double* gb = grad_of(pb);
    std::vector<double> dh(d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + i * d;
      const double* h = xhat->data() + i * d;
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (gg) gg[j] += g[j] * h[j];
        if (gb) gb[j] += g[j];
        dh[j] = g[j] * pg->value[j];
        mean_dh += dh[j];
        mean_dh_h += dh[j] * h[j];
      }
      if (!gx) continue;
      mean_dh /= static_cast<double>(d);
      mean_dh_h /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += (*inv_std)[i] * (dh[j] - mean_dh - h[j] * mean_dh_h);
    }
  });
}

Tensor causal_softmax(const Tensor& scores) {
  require_rank(scores, 2, "causal_softmax");
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  if (m < n) shape_error("causal_softmax", "needs at least as many columns as rows");
  std::vector<double> out(n * m, 0.0);
  const auto s = scores.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = s.data() + i * m;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= i; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      out[i * m + j] = std::exp(row[j] - mx);
      z += out[i * m + j];
    }
    for (std::size_t j = 0; j <= i; ++j) out[i * m + j] /= z;
  }
  auto probs = std::make_shared<std::vector<double>>(out);
  Node* ps = scores.node().get();
  return make_result({n, m}, std::move(out), {&scores}, [=](const Node& self) {
    double* g = grad_of(ps);
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = probs->data() + i * m;
      const double* gy = self.grad.data() + i * m;
      double dotp = 0.0;
      for (std::size_t j = 0; j <= i; ++j) dotp += y[j] * gy[j];
      for (std::size_t j = 0; j <= i; ++j) g[i * m + j] += y[j] * (gy[j] - dotp);
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) shape_error("embedding", "id " + std::to_string(ids[i]) + " outside table of " + std::to_string(vocab));
    std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
  }
  Node* pt = table.node().get();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), {&table}, [pt, idx = std::move(idx), d](const Node& self) {
    double* g = grad_of(pt);
    for (std::size_t i = 0; i < idx.size(); ++i) simd::axpy(1.0, self.grad.data() + i * d, g + idx[i] * d, d);
  });
}

std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), v = logits.dim(1);
  if (targets.size() != n) shape_error("cross_entropy", "need one target per row");
  auto probs = std::make_shared<std::vector<double>>(n * v, 0.0);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] == kIgnoreTarget) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) shape_error("cross_entropy", "target outside vocabulary");
    const auto ls = log_softmax(logits.data().subspan(i * v, v));
    total -= ls[static_cast<std::size_t>(targets[i])];
    for (std::size_t j = 0; j < v; ++j) (*probs)[i * v + j] = std::exp(ls[j]);
    ++counted;
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  Node* pl = logits.node().get();
  std::vector<std::int64_t> tg(targets.begin(), targets.end());
  return make_result({1}, {total / denom}, {&logits}, [=, tg = std::move(tg)](const Node& self) {
    double* g = grad_of(pl);
    const double k = self.grad[0] / denom;
    for (std::size_t i = 0; i < n; ++i) {
      if (tg[i] == kIgnoreTarget) continue;
      for (std::size_t j = 0; j < v; ++j) g[i * v + j] += k * (*probs)[i * v + j];
      g[i * v + static_cast<std::size_t>(tg[i])] -= k;
    }
  });
}

}  // namespace stroketok::tensor
