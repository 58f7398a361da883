#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vpp/matrix.hpp"

namespace vpp::ad {

using Var = int;

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order; backward() walks them in reverse. Leaves may alias external
// storage (parameters) so no copies are made per forward pass.
class Tape {
 public:
  Var constant(Matrix m);
  // Aliases `value`; its gradient is accumulated when requires_grad.
  Var leaf(const Matrix& value, bool requires_grad);

  const Matrix& value(Var v) const;
  // Gradient of the last backward() target; an all-zero matrix when unreached.
  const Matrix& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v].requires_grad; }

  // Seeds d(target)/d(target) = 1 for a 1x1 target.
  void backward(Var target);
  std::size_t size() const { return nodes_.size(); }

  // --- ops -----------------------------------------------------------------
  Var matmul(Var a, Var b);                 // a[n x k] * b[k x m]
  Var add(Var a, Var b);                    // same shape
  Var add_row(Var a, Var row);              // broadcast a 1 x m row
  Var add_rows(Var a, Var table, int first_row);  // a + table[first_row : first_row + a.rows]
  Var scale(Var a, double s);
  Var gelu(Var a);                          // tanh approximation
  Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, int first, int count);
  Var gather_rows(Var table, std::span<const int> ids);
  // Multi-head scaled dot-product attention. q[n x d], k,v[m x d].
  // causal: query i sees keys j <= i + (m - n). key_mask: 0 hides a key.
  // Queries with no visible key produce zero rows.
  Var attention(Var q, Var k, Var v, int heads, bool causal,
                std::span<const unsigned char> key_mask = {});
  // alpha * x + (1 - alpha) * (mask ⊙ prompt); x and prompt are (pixels x C),
  // mask holds one flag per pixel row.
  Var masked_blend(Var x, Var prompt, std::span<const unsigned char> mask, double alpha);
  // (side*side x C) image rows -> (patches x patch*patch*C), patches in
  // raster order, each flattened row-major with interleaved channels.
  Var patchify(Var image, int side, int patch);
  // Mean negative log-likelihood of targets[i] under softmax(logits row i).
  Var cross_entropy(Var logits, std::span<const int> targets);

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, Var)> back;
  };
  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, Var)> back);
  Matrix& grad_buffer(Var v);
  std::vector<Node> nodes_;
};

}  // namespace vpp::ad
