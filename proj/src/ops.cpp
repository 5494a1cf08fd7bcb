#include "vapf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "vapf/errors.hpp"

namespace vapf::ops {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

/// Creates the output tensor and, when required, wires it into the graph.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  Tensor out(std::move(shape), std::move(data));
  bool any = false;
  if (grad_enabled()) {
    for (const auto& t : inputs) any = any || t.requires_grad();
  }
  if (any) {
    auto& n = *out.node();
    n.requires_grad = true;
    for (auto& t : inputs) n.parents.push_back(t.node());
    n.backward = std::move(backward);
  }
  return out;
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

// c[m,n] += a[m,k]·b[k,n], accumulation over k in ascending order.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// da[m,k] += dc[m,n]·b[k,n]ᵀ
void gemm_nt(const double* dc, const double* b, double* da, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += drow[j] * brow[j];
      da[i * k + p] += s;
    }
  }
}

// db[k,n] += a[m,k]ᵀ·dc[m,n]
void gemm_tn(const double* a, const double* dc, double* db, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * drow[j];
    }
  }
}

std::size_t last_dim(const Tensor& x) { return x.shape().back(); }

void check_row_vector(const char* op, const Tensor& x, const Tensor& v) {
  const auto& vs = v.shape();
  const bool ok = (vs.size() == 1 && vs[0] == last_dim(x)) ||
                  (vs.size() == 2 && vs[0] == 1 && vs[1] == last_dim(x));
  if (!ok) shape_fail(op, x.shape(), vs);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  bool broadcast_b = false;
  if (as.size() == 2 && bs.size() == 2) {
    m = as[0];
    k = as[1];
    n = bs[1];
    if (bs[0] != k) shape_fail("matmul", as, bs);
  } else if (as.size() == 3 && bs.size() == 3) {
    batch = as[0];
    m = as[1];
    k = as[2];
    n = bs[2];
    if (bs[0] != batch || bs[1] != k) shape_fail("matmul", as, bs);
  } else if (as.size() == 3 && bs.size() == 2) {
    batch = as[0];
    m = as[1];
    k = as[2];
    n = bs[1];
    broadcast_b = true;
    if (bs[0] != k) shape_fail("matmul", as, bs);
  } else {
    shape_fail("matmul", as, bs);
  }

  std::vector<double> out(batch * m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  const std::size_t b_stride = broadcast_b ? 0 : k * n;
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(ad + s * m * k, bd + s * b_stride, out.data() + s * m * n, m, k, n);
  }
  Shape shape = as.size() == 2 ? Shape{m, n} : Shape{batch, m, n};

  return make_result(std::move(shape), std::move(out), {a, b},
                     [an = a.node(), bn = b.node(), batch, m, k, n, b_stride](Node& self) {
                       const double* g = self.grad.data();
                       if (an->requires_grad) {
                         auto& ga = an->grad_buffer();
                         for (std::size_t s = 0; s < batch; ++s) {
                           gemm_nt(g + s * m * n, bn->data.data() + s * b_stride,
                                   ga.data() + s * m * k, m, k, n);
                         }
                       }
                       if (bn->requires_grad) {
                         auto& gb = bn->grad_buffer();
                         for (std::size_t s = 0; s < batch; ++s) {
                           gemm_tn(an->data.data() + s * m * k, g + s * m * n,
                                   gb.data() + s * b_stride, m, k, n);
                         }
                       }
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose needs rank 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  return make_result(Shape{c, r}, std::move(out), {x}, [xn = x.node(), r, c](Node& self) {
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [an = a.node(), bn = b.node()](Node& self) {
                       for (auto* p : {an.get(), bn.get()}) {
                         if (!p->requires_grad) continue;
                         auto& g = p->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [an = a.node(), bn = b.node()](Node& self) {
                       if (an->requires_grad) {
                         auto& g = an->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (bn->requires_grad) {
                         auto& g = bn->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [an = a.node(), bn = b.node()](Node& self) {
                       if (an->requires_grad) {
                         auto& g = an->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] += self.grad[i] * bn->data[i];
                       }
                       if (bn->requires_grad) {
                         auto& g = bn->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] += self.grad[i] * an->data[i];
                       }
                     });
}

Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * s;
  return make_result(x.shape(), std::move(out), {x}, [xn = x.node(), s](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

Tensor add_row(const Tensor& x, const Tensor& v) {
  check_row_vector("add_row", x, v);
  const std::size_t c = last_dim(x);
  const std::size_t rows = x.size() / c;
  std::vector<double> out(x.size());
  auto xd = x.data();
  auto vd = v.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = xd[r * c + j] + vd[j];
  return make_result(x.shape(), std::move(out), {x, v},
                     [xn = x.node(), vn = v.node(), rows, c](Node& self) {
                       if (xn->requires_grad) {
                         auto& g = xn->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (vn->requires_grad) {
                         auto& g = vn->grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[r * c + j];
                       }
                     });
}

Tensor mul_row(const Tensor& x, const Tensor& v) {
  check_row_vector("mul_row", x, v);
  const std::size_t c = last_dim(x);
  const std::size_t rows = x.size() / c;
  std::vector<double> out(x.size());
  auto xd = x.data();
  auto vd = v.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = xd[r * c + j] * vd[j];
  return make_result(x.shape(), std::move(out), {x, v},
                     [xn = x.node(), vn = v.node(), rows, c](Node& self) {
                       if (xn->requires_grad) {
                         auto& g = xn->grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < c; ++j)
                             g[r * c + j] += self.grad[r * c + j] * vn->data[j];
                       }
                       if (vn->requires_grad) {
                         auto& g = vn->grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < c; ++j)
                             g[j] += self.grad[r * c + j] * xn->data[r * c + j];
                       }
                     });
}

namespace {
constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_value(double x) {
  const double u = kGeluK * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kGeluK * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluK * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(xd[i]);
  return make_result(x.shape(), std::move(out), {x}, [xn = x.node()](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * gelu_derivative(xn->data[i]);
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = xd[i];
    // Branches keep exp() from overflowing for large |z|.
    if (z >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      out[i] = e / (1.0 + e);
    }
  }
  auto y = out;
  return make_result(x.shape(), std::move(out), {x},
                     [xn = x.node(), y = std::move(y)](Node& self) {
                       auto& g = xn->grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += self.grad[i] * y[i] * (1.0 - y[i]);
                     });
}

namespace {

// View of a shape as (outer, axis extent, inner) around `axis`.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_fail("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) shape_fail("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }
  const AxisView ov = axis_view(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> extents;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const AxisView pv = axis_view(p.shape(), axis);
    auto pd = p.data();
    const std::size_t block = pv.extent * pv.inner;
    for (std::size_t o = 0; o < pv.outer; ++o) {
      std::copy_n(pd.begin() + o * block, block,
                  out.begin() + o * ov.extent * ov.inner + offset * ov.inner);
    }
    extents.push_back(pv.extent);
    offset += pv.extent;
  }
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result(
      std::move(out_shape), std::move(out), parts,
      [nodes = std::move(nodes), extents = std::move(extents), ov](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const std::size_t block = extents[k] * ov.inner;
          if (nodes[k]->requires_grad) {
            auto& g = nodes[k]->grad_buffer();
            for (std::size_t o = 0; o < ov.outer; ++o) {
              const double* src = self.grad.data() + o * ov.extent * ov.inner + off * ov.inner;
              double* dst = g.data() + o * block;
              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          off += extents[k];
        }
      });
}

std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) throw ShapeError("split axis out of range for " + shape_str(xs));
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != xs[axis]) {
    throw ShapeError("split sizes do not sum to extent " + std::to_string(xs[axis]) + " of " +
                     shape_str(xs));
  }
  const AxisView xv = axis_view(xs, axis);
  std::vector<Tensor> result;
  std::size_t offset = 0;
  auto xd = x.data();
  for (std::size_t sz : sizes) {
    if (sz == 0) throw ShapeError("split size 0 is not allowed");
    Shape s = xs;
    s[axis] = sz;
    const std::size_t block = sz * xv.inner;
    std::vector<double> out(xv.outer * block);
    for (std::size_t o = 0; o < xv.outer; ++o) {
      std::copy_n(xd.begin() + o * xv.extent * xv.inner + offset * xv.inner, block,
                  out.begin() + o * block);
    }
    result.push_back(make_result(std::move(s), std::move(out), {x},
                                 [xn = x.node(), xv, offset, block](Node& self) {
                                   auto& g = xn->grad_buffer();
                                   for (std::size_t o = 0; o < xv.outer; ++o) {
                                     double* dst =
                                         g.data() + o * xv.extent * xv.inner + offset * xv.inner;
                                     const double* src = self.grad.data() + o * block;
                                     for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                   }
                                 }));
    offset += sz;
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result(Shape{1}, {s}, {x}, [xn = x.node()](Node& self) {
    auto& g = xn->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double n = static_cast<double>(x.size());
  return make_result(Shape{1}, {s / n}, {x}, [xn = x.node(), n](Node& self) {
    auto& g = xn->grad_buffer();
    const double d = self.grad[0] / n;
    for (auto& v : g) v += d;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) shape_fail("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [xn = x.node()](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor flatten(const Tensor& x) { return reshape(x, Shape{x.size()}); }

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
  }
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = xd[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, xd[base + e * v.inner]);
      double s = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double ex = std::exp(xd[base + e * v.inner] - mx);
        out[base + e * v.inner] = ex;
        s += ex;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= s;
    }
  }
  auto y = out;
  return make_result(x.shape(), std::move(out), {x},
                     [xn = x.node(), y = std::move(y), v](Node& self) {
                       auto& g = xn->grad_buffer();
                       for (std::size_t o = 0; o < v.outer; ++o) {
                         for (std::size_t in = 0; in < v.inner; ++in) {
                           const std::size_t base = o * v.extent * v.inner + in;
                           double dot = 0.0;
                           for (std::size_t e = 0; e < v.extent; ++e) {
                             const std::size_t i = base + e * v.inner;
                             dot += self.grad[i] * y[i];
                           }
                           for (std::size_t e = 0; e < v.extent; ++e) {
                             const std::size_t i = base + e * v.inner;
                             g[i] += y[i] * (self.grad[i] - dot);
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_row_vector("layer_norm", x, gamma);
  check_row_vector("layer_norm", x, beta);
  const std::size_t c = last_dim(x);
  const std::size_t rows = x.size() / c;
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * c;
    bool constant = true;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      mu += row[j];
      constant = constant && row[j] == row[0];
    }
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = constant ? 0.0 : (row[j] - mu) * rs;
      xhat[r * c + j] = h;
      out[r * c + j] = h * gd[j] + bd[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xn = x.node(), gn = gamma.node(), bn = beta.node(), xhat = std::move(xhat),
       rstd = std::move(rstd), rows, c](Node& self) {
        const double* g = self.grad.data();
        if (gn->requires_grad) {
          auto& gg = gn->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[r * c + j] * xhat[r * c + j];
        }
        if (bn->requires_grad) {
          auto& gb = bn->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
        }
        if (xn->requires_grad) {
          auto& gx = xn->grad_buffer();
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[r * c + j] * gn->data[j];
              mean_d += d;
              mean_dx += d * xhat[r * c + j];
            }
            mean_d *= inv_c;
            mean_dx *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[r * c + j] * gn->data[j];
              gx[r * c + j] += rstd[r] * (d - mean_d - xhat[r * c + j] * mean_dx);
            }
          }
        }
      });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) {
    throw ShapeError("bce_with_logits: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(labels.size()) + " labels");
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw InputError("bce_with_logits: label must be 0 or 1");
  }
  auto zd = logits.data();
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double z = zd[i];
    total += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  std::vector<double> y(labels.begin(), labels.end());
  return make_result(Shape{1}, {total / n}, {logits},
                     [zn = logits.node(), y = std::move(y), n](Node& self) {
                       auto& g = zn->grad_buffer();
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         const double z = zn->data[i];
                         const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                                 : std::exp(z) / (1.0 + std::exp(z));
                         g[i] += self.grad[0] * (s - y[i]) / n;
                       }
                     });
}

Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape) {
  if (numel(out_shape) != index.size()) {
    throw ShapeError("gather: index count " + std::to_string(index.size()) +
                     " does not fill shape " + shape_str(out_shape));
  }
  auto xd = x.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xd.size()) throw ShapeError("gather: index out of range");
    out[i] = xd[index[i]];
  }
  return make_result(std::move(out_shape), std::move(out), {x},
                     [xn = x.node(), index = std::move(index)](Node& self) {
                       auto& g = xn->grad_buffer();
                       for (std::size_t i = 0; i < index.size(); ++i) g[index[i]] += self.grad[i];
                     });
}

}  // namespace vapf::ops
