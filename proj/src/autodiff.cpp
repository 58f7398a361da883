#include "vpp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vpp/errors.hpp"
#include "vpp/kernels.hpp"

namespace vpp::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(std::string("autodiff: ") + what);
}

void axpy(Matrix& dst, const Matrix& src) {
  double* d = dst.v.data();
  const double* s = src.v.data();
  for (std::size_t i = 0; i < dst.v.size(); ++i) d[i] += s[i];
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, Var)> back) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

Var Tape::constant(Matrix m) { return push(std::move(m), false, nullptr); }

Var Tape::leaf(const Matrix& value, bool requires_grad) {
  Node n;
  n.ref = &value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v];
  return n.ref ? *n.ref : n.own;
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v];
  if (n.grad.empty()) {
    const Matrix& val = value(v);
    n.grad = Matrix(val.rows, val.cols);
  }
  return n.grad;
}

const Matrix& Tape::grad(Var v) { return grad_buffer(v); }

void Tape::backward(Var target) {
  require(value(target).rows == 1 && value(target).cols == 1, "backward target must be 1x1");
  for (Node& n : nodes_) n.grad = Matrix();
  if (!nodes_[target].requires_grad) return;
  grad_buffer(target).v[0] = 1.0;
  for (Var v = target; v >= 0; --v) {
    Node& n = nodes_[v];
    if (n.back && !n.grad.empty()) n.back(*this, v);
  }
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols == B.rows, "matmul inner dimensions differ");
  Matrix C(A.rows, B.cols);
  kernels::gemm_nn(A.v.data(), B.v.data(), C.v.data(), A.rows, A.cols, B.cols, false);
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(C), rg, [a, b](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    if (t.requires_grad(a)) {
      kernels::gemm_nt(G.v.data(), B.v.data(), t.grad_buffer(a).v.data(), G.rows, G.cols, B.rows,
                       true);
    }
    if (t.requires_grad(b)) {
      kernels::gemm_tn(A.v.data(), G.v.data(), t.grad_buffer(b).v.data(), A.rows, A.cols, G.cols,
                       true);
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.same_shape(B), "add shape mismatch");
  Matrix C = A;
  axpy(C, B);
  return push(std::move(C), requires_grad(a) || requires_grad(b), [a, b](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.requires_grad(a)) axpy(t.grad_buffer(a), G);
    if (t.requires_grad(b)) axpy(t.grad_buffer(b), G);
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& R = value(row);
  require(R.rows == 1 && R.cols == A.cols, "add_row expects a 1 x cols row");
  Matrix C = A;
  for (int i = 0; i < C.rows; ++i) {
    double* c = C.row(i);
    for (int j = 0; j < C.cols; ++j) c[j] += R.v[j];
  }
  return push(std::move(C), requires_grad(a) || requires_grad(row), [a, row](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.requires_grad(a)) axpy(t.grad_buffer(a), G);
    if (t.requires_grad(row)) {
      Matrix& gr = t.grad_buffer(row);
      for (int i = 0; i < G.rows; ++i) {
        const double* g = G.row(i);
        for (int j = 0; j < G.cols; ++j) gr.v[j] += g[j];
      }
    }
  });
}

Var Tape::add_rows(Var a, Var table, int first_row) {
  const Matrix& A = value(a);
  const Matrix& T = value(table);
  require(T.cols == A.cols && first_row >= 0 && first_row + A.rows <= T.rows,
          "add_rows range exceeds the table");
  Matrix C = A;
  for (int i = 0; i < C.rows; ++i) {
    double* c = C.row(i);
    const double* r = T.row(first_row + i);
    for (int j = 0; j < C.cols; ++j) c[j] += r[j];
  }
  return push(std::move(C), requires_grad(a) || requires_grad(table),
              [a, table, first_row](Tape& t, Var self) {
                const Matrix& G = t.nodes_[self].grad;
                if (t.requires_grad(a)) axpy(t.grad_buffer(a), G);
                if (t.requires_grad(table)) {
                  Matrix& gt = t.grad_buffer(table);
                  for (int i = 0; i < G.rows; ++i) {
                    const double* g = G.row(i);
                    double* d = gt.row(first_row + i);
                    for (int j = 0; j < G.cols; ++j) d[j] += g[j];
                  }
                }
              });
}

Var Tape::scale(Var a, double s) {
  Matrix C = value(a);
  for (double& x : C.v) x *= s;
  return push(std::move(C), requires_grad(a), [a, s](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < G.v.size(); ++i) ga.v[i] += s * G.v[i];
  });
}

Var Tape::gelu(Var a) {
  Matrix C = value(a);
  for (double& x : C.v) x = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
  return push(std::move(C), requires_grad(a), [a](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& X = t.value(a);
    Matrix& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < G.v.size(); ++i) {
      const double x = X.v[i];
      const double u = kGeluC * (x + 0.044715 * x * x * x);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
      const double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
      ga.v[i] += G.v[i] * d;
    }
  });
}

Var Tape::layernorm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& X = value(x);
  const Matrix& Gm = value(gamma);
  const Matrix& Bt = value(beta);
  require(Gm.rows == 1 && Bt.rows == 1 && Gm.cols == X.cols && Bt.cols == X.cols,
          "layernorm gain/bias must be 1 x cols");
  const int n = X.rows, d = X.cols;
  Matrix Y(n, d), xhat(n, d);
  std::vector<double> rstd(n);
  for (int i = 0; i < n; ++i) {
    const double* xi = X.row(i);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xi[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= d;
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) {
      xhat(i, j) = (xi[j] - mean) * rstd[i];
      Y(i, j) = xhat(i, j) * Gm.v[j] + Bt.v[j];
    }
  }
  const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  return push(std::move(Y), rg,
              [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, Var self) {
                const Matrix& G = t.nodes_[self].grad;
                const Matrix& Gm = t.value(gamma);
                const int n = G.rows, d = G.cols;
                if (t.requires_grad(gamma) || t.requires_grad(beta)) {
                  Matrix& gg = t.grad_buffer(gamma);
                  Matrix& gb = t.grad_buffer(beta);
                  for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < d; ++j) {
                      gg.v[j] += G(i, j) * xhat(i, j);
                      gb.v[j] += G(i, j);
                    }
                  }
                }
                if (!t.requires_grad(x)) return;
                Matrix& gx = t.grad_buffer(x);
                for (int i = 0; i < n; ++i) {
                  double s1 = 0.0, s2 = 0.0;
                  for (int j = 0; j < d; ++j) {
                    const double gh = G(i, j) * Gm.v[j];
                    s1 += gh;
                    s2 += gh * xhat(i, j);
                  }
                  s1 /= d;
                  s2 /= d;
                  for (int j = 0; j < d; ++j) {
                    const double gh = G(i, j) * Gm.v[j];
                    gx(i, j) += rstd[i] * (gh - s1 - xhat(i, j) * s2);
                  }
                }
              });
}

Var Tape::concat_rows(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols == B.cols, "concat_rows width mismatch");
  Matrix C(A.rows + B.rows, A.cols);
  std::copy(A.v.begin(), A.v.end(), C.v.begin());
  std::copy(B.v.begin(), B.v.end(), C.v.begin() + A.v.size());
  const int split = A.rows;
  return push(std::move(C), requires_grad(a) || requires_grad(b), [a, b, split](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    const std::size_t off = std::size_t(split) * G.cols;
    if (t.requires_grad(a)) {
      Matrix& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += G.v[i];
    }
    if (t.requires_grad(b)) {
      Matrix& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += G.v[off + i];
    }
  });
}

Var Tape::slice_rows(Var a, int first, int count) {
  const Matrix& A = value(a);
  require(first >= 0 && count >= 0 && first + count <= A.rows, "slice_rows out of range");
  Matrix C(count, A.cols);
  std::copy(A.row(first), A.row(first) + std::size_t(count) * A.cols, C.v.begin());
  return push(std::move(C), requires_grad(a), [a, first](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    double* dst = t.grad_buffer(a).row(first);
    for (std::size_t i = 0; i < G.v.size(); ++i) dst[i] += G.v[i];
  });
}

Var Tape::gather_rows(Var table, std::span<const int> ids) {
  const Matrix& T = value(table);
  Matrix C(int(ids.size()), T.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < T.rows, "gather_rows id out of range");
    std::copy(T.row(ids[i]), T.row(ids[i]) + T.cols, C.row(int(i)));
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return push(std::move(C), requires_grad(table), [table, saved = std::move(saved)](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gt = t.grad_buffer(table);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      const double* g = G.row(int(i));
      double* d = gt.row(saved[i]);
      for (int j = 0; j < G.cols; ++j) d[j] += g[j];
    }
  });
}

Var Tape::attention(Var q, Var k, Var v, int heads, bool causal,
                    std::span<const unsigned char> key_mask) {
  const Matrix& Q = value(q);
  const Matrix& K = value(k);
  const Matrix& V = value(v);
  require(Q.cols == K.cols && K.cols == V.cols && K.rows == V.rows, "attention shape mismatch");
  require(heads >= 1 && Q.cols % heads == 0, "attention width not divisible by heads");
  require(key_mask.empty() || int(key_mask.size()) == K.rows, "attention key mask length");
  const int n = Q.rows, m = K.rows, d = Q.cols, dh = d / heads;
  const int shift = m - n;
  const double inv = 1.0 / std::sqrt(double(dh));
  // P holds per-head attention weights, heads stacked: (heads*n) x m.
  Matrix P(heads * n, m);
  Matrix O(n, d);
  std::vector<double> s(m);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    for (int i = 0; i < n; ++i) {
      const int last = causal ? std::min(m - 1, i + shift) : m - 1;
      double mx = -std::numeric_limits<double>::infinity();
      const double* qi = Q.row(i) + c0;
      for (int j = 0; j <= last; ++j) {
        if (!key_mask.empty() && !key_mask[j]) continue;
        const double* kj = K.row(j) + c0;
        double acc = 0.0;
        for (int c = 0; c < dh; ++c) acc += qi[c] * kj[c];
        s[j] = acc * inv;
        mx = std::max(mx, s[j]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) continue;
      double z = 0.0;
      double* p = P.row(h * n + i);
      for (int j = 0; j <= last; ++j) {
        if (!key_mask.empty() && !key_mask[j]) continue;
        p[j] = std::exp(s[j] - mx);
        z += p[j];
      }
      double* o = O.row(i) + c0;
      for (int j = 0; j <= last; ++j) {
        if (p[j] == 0.0) continue;
        p[j] /= z;
        const double* vj = V.row(j) + c0;
        for (int c = 0; c < dh; ++c) o[c] += p[j] * vj[c];
      }
    }
  }
  const bool rg = requires_grad(q) || requires_grad(k) || requires_grad(v);
  return push(std::move(O), rg, [q, k, v, heads, P = std::move(P)](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& Q = t.value(q);
    const Matrix& K = t.value(k);
    const Matrix& V = t.value(v);
    const int n = Q.rows, m = K.rows, d = Q.cols, dh = d / heads;
    const double inv = 1.0 / std::sqrt(double(dh));
    Matrix* gq = t.requires_grad(q) ? &t.grad_buffer(q) : nullptr;
    Matrix* gk = t.requires_grad(k) ? &t.grad_buffer(k) : nullptr;
    Matrix* gv = t.requires_grad(v) ? &t.grad_buffer(v) : nullptr;
    std::vector<double> dp(m);
    for (int h = 0; h < heads; ++h) {
      const int c0 = h * dh;
      for (int i = 0; i < n; ++i) {
        const double* p = P.row(h * n + i);
        const double* gi = G.row(i) + c0;
        double dot = 0.0;
        for (int j = 0; j < m; ++j) {
          if (p[j] == 0.0) {
            dp[j] = 0.0;
            continue;
          }
          const double* vj = V.row(j) + c0;
          double acc = 0.0;
          for (int c = 0; c < dh; ++c) acc += gi[c] * vj[c];
          dp[j] = acc;
          dot += acc * p[j];
          if (gv) {
            double* gvj = gv->row(j) + c0;
            for (int c = 0; c < dh; ++c) gvj[c] += p[j] * gi[c];
          }
        }
        const double* qi = Q.row(i) + c0;
        for (int j = 0; j < m; ++j) {
          if (p[j] == 0.0) continue;
          const double ds = p[j] * (dp[j] - dot) * inv;
          const double* kj = K.row(j) + c0;
          if (gq) {
            double* gqi = gq->row(i) + c0;
            for (int c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
          }
          if (gk) {
            double* gkj = gk->row(j) + c0;
            for (int c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
          }
        }
      }
    }
  });
}

Var Tape::masked_blend(Var x, Var prompt, std::span<const unsigned char> mask, double alpha) {
  const Matrix& X = value(x);
  const Matrix& Pm = value(prompt);
  require(X.same_shape(Pm), "masked_blend shape mismatch");
  require(int(mask.size()) == X.rows, "masked_blend mask length");
  Matrix C(X.rows, X.cols);
  kernels::overlay_blend(X.v.data(), Pm.v.data(), mask.data(), std::size_t(X.rows), X.cols, alpha,
                         C.v.data());
  std::vector<unsigned char> saved(mask.begin(), mask.end());
  const bool rg = requires_grad(x) || requires_grad(prompt);
  return push(std::move(C), rg, [x, prompt, alpha, saved = std::move(saved)](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.requires_grad(x)) {
      Matrix& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < G.v.size(); ++i) gx.v[i] += alpha * G.v[i];
    }
    if (t.requires_grad(prompt)) {
      Matrix& gp = t.grad_buffer(prompt);
      const double w = 1.0 - alpha;
      for (int r = 0; r < G.rows; ++r) {
        if (!saved[r]) continue;
        for (int c = 0; c < G.cols; ++c) gp(r, c) += w * G(r, c);
      }
    }
  });
}

Var Tape::patchify(Var image, int side, int patch) {
  const Matrix& I = value(image);
  require(side % patch == 0, "patchify: side not divisible by patch");
  require(I.rows == side * side, "patchify: image rows != side^2");
  const int ch = I.cols, per = side / patch;
  Matrix C(per * per, patch * patch * ch);
  auto src_row = [side](int py, int px, int patch, int y, int x) {
    return (py * patch + y) * side + px * patch + x;
  };
  for (int py = 0; py < per; ++py)
    for (int px = 0; px < per; ++px)
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          for (int c = 0; c < ch; ++c)
            C(py * per + px, (y * patch + x) * ch + c) = I(src_row(py, px, patch, y, x), c);
  return push(std::move(C), requires_grad(image), [image, side, patch, src_row](Tape& t, Var self) {
    const Matrix& G = t.nodes_[self].grad;
    Matrix& gi = t.grad_buffer(image);
    const int ch = gi.cols, per = side / patch;
    for (int py = 0; py < per; ++py)
      for (int px = 0; px < per; ++px)
        for (int y = 0; y < patch; ++y)
          for (int x = 0; x < patch; ++x)
            for (int c = 0; c < ch; ++c)
              gi(src_row(py, px, patch, y, x), c) += G(py * per + px, (y * patch + x) * ch + c);
  });
}

Var Tape::cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& L = value(logits);
  require(int(targets.size()) == L.rows, "cross_entropy: one target per row");
  const int n = L.rows, V = L.cols;
  Matrix prob(n, V);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    require(targets[i] >= 0 && targets[i] < V, "cross_entropy target out of range");
    const double* l = L.row(i);
    const double mx = *std::max_element(l, l + V);
    double z = 0.0;
    for (int j = 0; j < V; ++j) z += std::exp(l[j] - mx);
    const double lz = std::log(z) + mx;
    total += lz - l[targets[i]];
    for (int j = 0; j < V; ++j) prob(i, j) = std::exp(l[j] - lz);
  }
  Matrix out(1, 1, n > 0 ? total / n : 0.0);
  std::vector<int> saved(targets.begin(), targets.end());
  return push(std::move(out), requires_grad(logits) && n > 0,
              [logits, prob = std::move(prob), saved = std::move(saved)](Tape& t, Var self) {
                const double g = t.nodes_[self].grad.v[0] / prob.rows;
                Matrix& gl = t.grad_buffer(logits);
                for (int i = 0; i < prob.rows; ++i) {
                  for (int j = 0; j < prob.cols; ++j) {
                    gl(i, j) += g * (prob(i, j) - (j == saved[i] ? 1.0 : 0.0));
                  }
                }
              });
}

}  // namespace vpp::ad
