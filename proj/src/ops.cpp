#include "pnp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <cblas.h>

#include "pnp/errors.hpp"

namespace pnp::nn {

using detail::Node;

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Wraps a freshly computed value into a tensor, recording the backward
// closure only when some input participates in differentiation.
Tensor make_result(Shape dims, std::vector<double> value, std::vector<std::shared_ptr<Node>> inputs,
                   std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->dims = std::move(dims);
  node->value = std::move(value);
  bool track = grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                             [](const auto& n) { return n->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

int blas_int(std::size_t v) {
  if (v > static_cast<std::size_t>(std::numeric_limits<int>::max())) throw ShapeError("gemm: dimension too large");
  return static_cast<int>(v);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                     shape_string(b.dims()));
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    return;
  }
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, blas_int(m), blas_int(n), blas_int(k), 1.0, a,
              blas_int(k), b, blas_int(n), accumulate ? 1.0 : 0.0, c, blas_int(n));
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    return;
  }
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, blas_int(m), blas_int(n), blas_int(k), 1.0, a,
              blas_int(m), b, blas_int(n), accumulate ? 1.0 : 0.0, c, blas_int(n));
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    return;
  }
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, blas_int(m), blas_int(n), blas_int(k), 1.0, a,
              blas_int(k), b, blas_int(k), accumulate ? 1.0 : 0.0, c, blas_int(n));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return make_result(a.dims(), std::move(out), {a.node(), b.node()}, [na, nb](Node& self) {
    for (Node* in : {na, nb}) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return make_result(a.dims(), std::move(out), {a.node(), b.node()}, [na, nb](Node& self) {
    if (na->requires_grad) {
      na->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) na->grad[i] += self.grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb->grad[i] -= self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  Node* na = a.node().get();
  return make_result(a.dims(), std::move(out), {a.node()}, [na, s](Node& self) {
    na->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) na->grad[i] += self.grad[i] * s;
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  Node* nx = x.node().get();
  return make_result(x.dims(), std::move(out), {x.node()}, [nx](Node& self) {
    nx->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (nx->value[i] > 0.0) nx->grad[i] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape dims) {
  if (shape_size(dims) != x.size())
    throw ShapeError("reshape: " + shape_string(x.dims()) + " cannot become " + shape_string(dims));
  std::vector<double> out(x.data().begin(), x.data().end());
  Node* nx = x.node().get();
  return make_result(std::move(dims), std::move(out), {x.node()}, [nx](Node& self) {
    nx->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx->grad[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose expects rank 2, got " + shape_string(x.dims()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  Node* nx = x.node().get();
  return make_result({c, r}, std::move(out), {x.node()}, [nx, r, c](Node& self) {
    nx->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) nx->grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].dims();
  if (axis >= first.size()) throw ShapeError("concat axis out of range");
  std::size_t outer = 1, inner = 1, total_axis = 0;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.dims();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) ok = false;
    if (!ok) throw ShapeError("concat: incompatible part " + shape_string(s) + " vs " + shape_string(first));
    widths.push_back(s[axis] * inner);
    total_axis += s[axis];
  }
  const std::size_t row = total_axis * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].data().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(src + o * widths[k], src + (o + 1) * widths[k], out.begin() + o * row + offset);
    offset += widths[k];
  }
  Shape dims = first;
  dims[axis] = total_axis;
  std::vector<std::shared_ptr<Node>> inputs;
  std::vector<Node*> raw;
  for (const auto& p : parts) {
    inputs.push_back(p.node());
    raw.push_back(p.node().get());
  }
  return make_result(std::move(dims), std::move(out), std::move(inputs),
                     [raw, widths, outer, row](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < raw.size(); ++k) {
                         if (raw[k]->requires_grad) {
                           raw[k]->ensure_grad();
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               raw[k]->grad[o * widths[k] + j] += self.grad[o * row + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  std::vector<Tensor> lifted;
  lifted.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s{1};
    s.insert(s.end(), p.dims().begin(), p.dims().end());
    lifted.push_back(reshape(p, s));
  }
  return concat(lifted, 0);
}

Tensor select(const Tensor& x, std::size_t index) {
  if (index >= x.dim(0)) throw ShapeError("select index out of range");
  Shape dims(x.dims().begin() + 1, x.dims().end());
  if (dims.empty()) dims = {1};
  const std::size_t stride = x.size() / x.dim(0);
  std::vector<double> out(x.data().begin() + index * stride, x.data().begin() + (index + 1) * stride);
  Node* nx = x.node().get();
  return make_result(std::move(dims), std::move(out), {x.node()}, [nx, index, stride](Node& self) {
    nx->ensure_grad();
    for (std::size_t i = 0; i < stride; ++i) nx->grad[index * stride + i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Node* nx = x.node().get();
  return make_result({1}, {s}, {x.node()}, [nx](Node& self) {
    nx->ensure_grad();
    for (auto& g : nx->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse_loss");
  const std::size_t n = prediction.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = prediction[i] - target[i];
    s += d * d;
  }
  Node* np = prediction.node().get();
  Node* nt = target.node().get();
  return make_result({1}, {s / static_cast<double>(n)}, {prediction.node(), target.node()},
                     [np, nt, n](Node& self) {
                       const double coef = 2.0 * self.grad[0] / static_cast<double>(n);
                       if (np->requires_grad) {
                         np->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) np->grad[i] += coef * (np->value[i] - nt->value[i]);
                       }
                       if (nt->requires_grad) {
                         nt->ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) nt->grad[i] -= coef * (np->value[i] - nt->value[i]);
                       }
                     });
}

Tensor weighted_sum(const Tensor& x, const Tensor& w) {
  require_same_shape(x, w, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  Node* nx = x.node().get();
  Node* nw = w.node().get();
  return make_result({1}, {s}, {x.node(), w.node()}, [nx, nw](Node& self) {
    const double g = self.grad[0];
    if (nx->requires_grad) {
      nx->ensure_grad();
      for (std::size_t i = 0; i < nx->grad.size(); ++i) nx->grad[i] += g * nw->value[i];
    }
    if (nw->requires_grad) {
      nw->ensure_grad();
      for (std::size_t i = 0; i < nw->grad.size(); ++i) nw->grad[i] += g * nx->value[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: " + shape_string(a.dims()) + " x " + shape_string(b.dims()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [na, nb, m, n, k](Node& self) {
    if (na->requires_grad) {
      na->ensure_grad();
      gemm_nt(m, k, n, self.grad.data(), nb->value.data(), na->grad.data(), true);
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      gemm_tn(k, n, m, na->value.data(), self.grad.data(), nb->grad.data(), true);
    }
  });
}

Tensor softmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("softmax_rows expects rank 2, got " + shape_string(scores.dims()));
  if (!scores.all_finite()) throw DomainError("softmax_rows: non-finite score");
  const std::size_t m = scores.dim(0), n = scores.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = scores.data().data() + i * n;
    double* o = out.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(row[j] - mx);
      total += o[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
  }
  Node* ns = scores.node().get();
  return make_result({m, n}, std::move(out), {scores.node()}, [ns, m, n](Node& self) {
    ns->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
      double* gx = ns->grad.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
}

namespace {

void im2col3(const double* in, std::size_t channels, std::size_t h, std::size_t w, double* cols) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* dst = cols + ((c * 3 + ky) * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          double* drow = dst + y * w;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(drow, drow + w, 0.0);
            continue;
          }
          const double* srow = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            drow[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : srow[sx];
          }
        }
      }
  }
}

void col2im3(const double* cols, std::size_t channels, std::size_t h, std::size_t w, double* out) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = out + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* src = cols + ((c * 3 + ky) * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* prow = plane + static_cast<std::size_t>(sy) * w;
          const double* srow = src + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) prow[sx] += srow[x];
          }
        }
      }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3) throw ShapeError("conv2d input must be [C,H,W] or [N,C,H,W]");
  if (kernels.rank() != 4) throw ShapeError("conv2d kernels must be [C_out,C_in,k,k]");
  const std::size_t n = batched ? input.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t cin = input.dim(off), h = input.dim(off + 1), w = input.dim(off + 2);
  const std::size_t cout = kernels.dim(0), ksz = kernels.dim(2);
  if (kernels.dim(1) != cin)
    throw ShapeError("conv2d channel mismatch: input " + shape_string(input.dims()) + ", kernels " +
                     shape_string(kernels.dims()));
  if (kernels.dim(3) != ksz || (ksz != 1 && ksz != 3)) throw ShapeError("conv2d supports 1x1 and 3x3 kernels");
  if (bias.size() != cout) throw ShapeError("conv2d bias must have C_out entries");

  const std::size_t hw = h * w;
  const std::size_t ck = cin * ksz * ksz;
  const bool track = any_requires_grad({&input, &kernels, &bias});
  std::vector<double> out(n * cout * hw);
  std::vector<double> cols_store;
  std::vector<double> cols_tmp;
  if (ksz == 3) {
    if (track) cols_store.resize(n * ck * hw);
    else cols_tmp.resize(ck * hw);
  }
  const double* kw = kernels.data().data();
  for (std::size_t s = 0; s < n; ++s) {
    const double* in = input.data().data() + s * cin * hw;
    double* o = out.data() + s * cout * hw;
    for (std::size_t co = 0; co < cout; ++co) std::fill(o + co * hw, o + (co + 1) * hw, bias[co]);
    if (ksz == 3) {
      double* cols = track ? cols_store.data() + s * ck * hw : cols_tmp.data();
      im2col3(in, cin, h, w, cols);
      gemm_nn(cout, hw, ck, kw, cols, o, true);
    } else {
      gemm_nn(cout, hw, ck, kw, in, o, true);
    }
  }

  Node* ni = input.node().get();
  Node* nk = kernels.node().get();
  Node* nb = bias.node().get();
  return make_result(
      input.rank() == 4 ? Shape{n, cout, h, w} : Shape{cout, h, w}, std::move(out),
      {input.node(), kernels.node(), bias.node()},
      [ni, nk, nb, n, cin, cout, hw, h, w, ksz, ck, cols = std::move(cols_store)](Node& self) {
        if (nb->requires_grad) {
          nb->ensure_grad();
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t co = 0; co < cout; ++co) {
              const double* g = self.grad.data() + (s * cout + co) * hw;
              double acc = 0.0;
              for (std::size_t p = 0; p < hw; ++p) acc += g[p];
              nb->grad[co] += acc;
            }
        }
        if (nk->requires_grad) {
          nk->ensure_grad();
          for (std::size_t s = 0; s < n; ++s) {
            const double* g = self.grad.data() + s * cout * hw;
            const double* src = ksz == 3 ? cols.data() + s * ck * hw : ni->value.data() + s * cin * hw;
            gemm_nt(cout, ck, hw, g, src, nk->grad.data(), true);
          }
        }
        if (ni->requires_grad) {
          ni->ensure_grad();
          std::vector<double> dcols(ksz == 3 ? ck * hw : 0);
          for (std::size_t s = 0; s < n; ++s) {
            const double* g = self.grad.data() + s * cout * hw;
            double* gi = ni->grad.data() + s * cin * hw;
            if (ksz == 3) {
              gemm_tn(ck, hw, cout, nk->value.data(), g, dcols.data(), false);
              col2im3(dcols.data(), cin, h, w, gi);
            } else {
              gemm_tn(ck, hw, cout, nk->value.data(), g, gi, true);
            }
          }
        }
      });
}

Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, Mode mode,
                 const BatchNormOptions& options) {
  const bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3) throw ShapeError("batchnorm input must be [C,H,W] or [N,C,H,W]");
  const std::size_t n = batched ? input.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t ch = input.dim(off), hw = input.dim(off + 1) * input.dim(off + 2);
  if (gamma.size() != ch || beta.size() != ch || stats.running_mean.size() != ch || stats.running_var.size() != ch)
    throw ShapeError("batchnorm parameter size does not match channel count " + std::to_string(ch));
  const std::size_t count = n * hw;
  if (mode == Mode::Train && count < 2)
    throw ContractError("batchnorm train mode needs at least 2 values per channel");

  std::vector<double> out(input.size());
  std::vector<double> xhat(input.size());
  std::vector<double> inv_std(ch);
  const double* x = input.data().data();
  for (std::size_t c = 0; c < ch; ++c) {
    double mu, var;
    if (mode == Mode::Train) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < hw; ++p) s += x[(b * ch + c) * hw + p];
      mu = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < hw; ++p) {
          const double d = x[(b * ch + c) * hw + p] - mu;
          v += d * d;
        }
      var = v / static_cast<double>(count);
      stats.running_mean[c] = options.momentum * stats.running_mean[c] + (1.0 - options.momentum) * mu;
      stats.running_var[c] = options.momentum * stats.running_var[c] + (1.0 - options.momentum) * var;
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + options.eps);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (b * ch + c) * hw + p;
        xhat[i] = (x[i] - mu) * inv_std[c];
        out[i] = gamma[c] * xhat[i] + beta[c];
      }
  }

  Node* ni = input.node().get();
  Node* ng = gamma.node().get();
  Node* nbeta = beta.node().get();
  const bool train = mode == Mode::Train;
  return make_result(input.dims(), std::move(out), {input.node(), gamma.node(), beta.node()},
                     [ni, ng, nbeta, n, ch, hw, count, train, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](Node& self) {
                       const double* gy = self.grad.data();
                       if (ng->requires_grad) ng->ensure_grad();
                       if (nbeta->requires_grad) nbeta->ensure_grad();
                       if (ni->requires_grad) ni->ensure_grad();
                       for (std::size_t c = 0; c < ch; ++c) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (std::size_t b = 0; b < n; ++b)
                           for (std::size_t p = 0; p < hw; ++p) {
                             const std::size_t i = (b * ch + c) * hw + p;
                             sum_g += gy[i];
                             sum_gx += gy[i] * xhat[i];
                           }
                         if (ng->requires_grad) ng->grad[c] += sum_gx;
                         if (nbeta->requires_grad) nbeta->grad[c] += sum_g;
                         if (!ni->requires_grad) continue;
                         const double gam = ng->value[c];
                         const double cnt = static_cast<double>(count);
                         for (std::size_t b = 0; b < n; ++b)
                           for (std::size_t p = 0; p < hw; ++p) {
                             const std::size_t i = (b * ch + c) * hw + p;
                             if (train)
                               ni->grad[i] += gam * inv_std[c] * (gy[i] - sum_g / cnt - xhat[i] * sum_gx / cnt);
                             else
                               ni->grad[i] += gam * inv_std[c] * gy[i];
                           }
                       }
                     });
}

}  // namespace pnp::nn
