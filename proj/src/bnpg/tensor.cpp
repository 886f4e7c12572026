// Copyright 2026 The BNPG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bnpg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bnpg/errors.hpp"

namespace bnpg::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(shape[k]);
  }
  return s + "]";
}

Parameter::Parameter(Shape s)
    : shape(std::move(s)), value(numel(shape), 0.0), grad(numel(shape), 0.0) {}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

const Shape& Tensor::shape() const { return tape_->node(*this).shape; }
int Tensor::dim(int k) const {
  const auto& s = shape();
  return s[k < 0 ? static_cast<int>(s.size()) + k : k];
}
std::size_t Tensor::size() const { return tape_->node(*this).value.size(); }
const std::vector<double>& Tensor::value() const {
  return tape_->node(*this).value;
}
double Tensor::item() const {
  const auto& v = value();
  if (v.size() != 1) throw DimensionError("item() on a non-scalar tensor");
  return v[0];
}
const std::vector<double>& Tensor::grad() const {
  return tape_->node(*this).grad;
}
bool Tensor::requires_grad() const { return tape_->node(*this).requires_grad; }

Tape::Node& Tape::node(const Tensor& t) {
  if (t.tape() != this || t.id() < 0 ||
      t.id() >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("tensor does not belong to this tape");
  }
  return *nodes_[t.id()];
}

const Tape::Node& Tape::node(const Tensor& t) const {
  if (t.tape() != this || t.id() < 0 ||
      t.id() >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("tensor does not belong to this tape");
  }
  return *nodes_[t.id()];
}

Tensor Tape::push(Shape shape, std::vector<double> value, bool requires_grad,
                  std::function<void(Node&)> backward) {
  if (numel(shape) != value.size()) {
    throw DimensionError("value size does not match shape " + shape_str(shape));
  }
  auto n = std::make_unique<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::constant(Shape shape, std::vector<double> value) {
  return push(std::move(shape), std::move(value), false, nullptr);
}

Tensor Tape::variable(Shape shape, std::vector<double> value) {
  return push(std::move(shape), std::move(value), true, nullptr);
}

Tensor Tape::param(Parameter& p) {
  Tensor t = push(p.shape, p.value, true, nullptr);
  nodes_.back()->param = &p;
  return t;
}

void accumulate(Tape::Node& n, std::span<const double> g) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) n.grad[k] += g[k];
}

void Tape::backward(const Tensor& loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw DimensionError("backward() needs a single-element loss");
  }
  if (backward_done_) throw std::logic_error("backward() already ran on tape");
  backward_done_ = true;
  if (!root.requires_grad) return;
  root.grad.assign(1, 1.0);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = *nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(n);
    if (n.param != nullptr) {
      for (std::size_t k = 0; k < n.grad.size(); ++k) {
        n.param->grad[k] += n.grad[k];
      }
    }
  }
}

namespace {

Tape& same_tape(const Tensor& a, const Tensor& b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument("tensors live on different tapes");
  }
  return *a.tape();
}

// b broadcasts over a's leading dims when its shape is a suffix of a's.
std::size_t broadcast_period(const Shape& a, const Shape& b) {
  if (a == b) return numel(a);
  if (b.size() < a.size() &&
      std::equal(b.rbegin(), b.rend(), a.rbegin())) {
    return numel(b);
  }
  throw DimensionError("cannot broadcast " + shape_str(b) + " onto " +
                       shape_str(a));
}

int last_dim(const Shape& s) {
  if (s.empty()) throw DimensionError("tensor has no dimensions");
  return s.back();
}

Shape drop_last(const Shape& s) {
  Shape out(s.begin(), s.end() - 1);
  if (out.empty()) out.push_back(1);
  return out;
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& a, Fwd fwd, Bwd dfdx) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  std::vector<double> out(na.value.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = fwd(na.value[k]);
  Tape::Node* pa = &na;
  return tape.push(na.shape, std::move(out), na.requires_grad,
                   [pa, dfdx](Tape::Node& self) {
                     std::vector<double> g(self.grad.size());
                     for (std::size_t k = 0; k < g.size(); ++k) {
                       g[k] = self.grad[k] * dfdx(pa->value[k], self.value[k]);
                     }
                     accumulate(*pa, g);
                   });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  Tape::Node& na = tape.node(a);
  Tape::Node& nb = tape.node(b);
  const Shape& sa = na.shape;
  const Shape& sb = nb.shape;
  int batch = 1, m, k, n;
  bool shared_b;
  Shape out_shape;
  if (sb.size() == 2 && (sa.size() == 2 || sa.size() == 3)) {
    shared_b = true;
    k = sb[0];
    n = sb[1];
    if (sa.back() != k) {
      throw DimensionError("matmul " + shape_str(sa) + " x " + shape_str(sb));
    }
    m = static_cast<int>(numel(sa) / k);
    out_shape = sa;
    out_shape.back() = n;
  } else if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] &&
             sa[2] == sb[1]) {
    shared_b = false;
    batch = sa[0];
    m = sa[1];
    k = sa[2];
    n = sb[2];
    out_shape = {batch, m, n};
  } else {
    throw DimensionError("matmul " + shape_str(sa) + " x " + shape_str(sb));
  }
  std::vector<double> out(static_cast<std::size_t>(batch) * m * n, 0.0);
  for (int bi = 0; bi < batch; ++bi) {
    const double* pa = na.value.data() + static_cast<std::size_t>(bi) * m * k;
    const double* pb =
        nb.value.data() + (shared_b ? 0 : static_cast<std::size_t>(bi) * k * n);
    double* pc = out.data() + static_cast<std::size_t>(bi) * m * n;
    for (int i = 0; i < m; ++i) {
      for (int l = 0; l < k; ++l) {
        const double x = pa[i * k + l];
        if (x == 0.0) continue;
        const double* rb = pb + static_cast<std::size_t>(l) * n;
        double* rc = pc + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) rc[j] += x * rb[j];
      }
    }
  }
  Tape::Node* ra = &na;
  Tape::Node* rb = &nb;
  return tape.push(
      out_shape, std::move(out), na.requires_grad || nb.requires_grad,
      [ra, rb, batch, m, k, n, shared_b](Tape::Node& self) {
        const double* g = self.grad.data();
        if (ra->requires_grad) {
          std::vector<double> ga(ra->value.size(), 0.0);
          for (int bi = 0; bi < batch; ++bi) {
            const double* pb = rb->value.data() +
                               (shared_b ? 0 : static_cast<std::size_t>(bi) * k * n);
            for (int i = 0; i < m; ++i) {
              const double* gr = g + (static_cast<std::size_t>(bi) * m + i) * n;
              double* out_row = ga.data() + (static_cast<std::size_t>(bi) * m + i) * k;
              for (int l = 0; l < k; ++l) {
                const double* br = pb + static_cast<std::size_t>(l) * n;
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += gr[j] * br[j];
                out_row[l] += acc;
              }
            }
          }
          accumulate(*ra, ga);
        }
        if (rb->requires_grad) {
          std::vector<double> gb(rb->value.size(), 0.0);
          for (int bi = 0; bi < batch; ++bi) {
            const double* pa = ra->value.data() + static_cast<std::size_t>(bi) * m * k;
            double* gbb = gb.data() + (shared_b ? 0 : static_cast<std::size_t>(bi) * k * n);
            for (int i = 0; i < m; ++i) {
              const double* gr = g + (static_cast<std::size_t>(bi) * m + i) * n;
              for (int l = 0; l < k; ++l) {
                const double x = pa[i * k + l];
                if (x == 0.0) continue;
                double* row = gbb + static_cast<std::size_t>(l) * n;
                for (int j = 0; j < n; ++j) row[j] += x * gr[j];
              }
            }
          }
          accumulate(*rb, gb);
        }
      });
}

Tensor transpose(const Tensor& a) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  if (na.shape.size() < 2) throw DimensionError("transpose needs >= 2 dims");
  const int r = na.shape[na.shape.size() - 2];
  const int c = na.shape.back();
  const std::size_t batch = na.value.size() / (static_cast<std::size_t>(r) * c);
  Shape out_shape = na.shape;
  std::swap(out_shape[out_shape.size() - 2], out_shape.back());
  std::vector<double> out(na.value.size());
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t off = b * r * c;
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) out[off + j * r + i] = na.value[off + i * c + j];
    }
  }
  Tape::Node* pa = &na;
  return tape.push(out_shape, std::move(out), na.requires_grad,
                   [pa, r, c, batch](Tape::Node& self) {
                     std::vector<double> g(self.grad.size());
                     for (std::size_t b = 0; b < batch; ++b) {
                       const std::size_t off = b * r * c;
                       for (int i = 0; i < r; ++i) {
                         for (int j = 0; j < c; ++j) {
                           g[off + i * c + j] = self.grad[off + j * r + i];
                         }
                       }
                     }
                     accumulate(*pa, g);
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  if (numel(shape) != na.value.size()) {
    throw DimensionError("reshape " + shape_str(na.shape) + " -> " +
                         shape_str(shape));
  }
  Tape::Node* pa = &na;
  return tape.push(std::move(shape), na.value, na.requires_grad,
                   [pa](Tape::Node& self) { accumulate(*pa, self.grad); });
}

namespace {

enum class BinOp { kAdd, kSub, kMul, kMin };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  Tape& tape = same_tape(a, b);
  Tape::Node& na = tape.node(a);
  Tape::Node& nb = tape.node(b);
  const std::size_t period = broadcast_period(na.shape, nb.shape);
  std::vector<double> out(na.value.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double x = na.value[k];
    const double y = nb.value[k % period];
    switch (op) {
      case BinOp::kAdd: out[k] = x + y; break;
      case BinOp::kSub: out[k] = x - y; break;
      case BinOp::kMul: out[k] = x * y; break;
      case BinOp::kMin: out[k] = std::min(x, y); break;
    }
  }
  Tape::Node* pa = &na;
  Tape::Node* pb = &nb;
  return tape.push(
      na.shape, std::move(out), na.requires_grad || nb.requires_grad,
      [pa, pb, period, op](Tape::Node& self) {
        const std::size_t size = self.grad.size();
        std::vector<double> ga(pa->requires_grad ? size : 0, 0.0);
        std::vector<double> gb(pb->requires_grad ? period : 0, 0.0);
        for (std::size_t k = 0; k < size; ++k) {
          const double g = self.grad[k];
          const double x = pa->value[k];
          const double y = pb->value[k % period];
          double dx = 0.0, dy = 0.0;
          switch (op) {
            case BinOp::kAdd: dx = g; dy = g; break;
            case BinOp::kSub: dx = g; dy = -g; break;
            case BinOp::kMul: dx = g * y; dy = g * x; break;
            case BinOp::kMin:
              if (x <= y) dx = g; else dy = g;
              break;
          }
          if (!ga.empty()) ga[k] += dx;
          if (!gb.empty()) gb[k % period] += dy;
        }
        if (!ga.empty()) accumulate(*pa, ga);
        if (!gb.empty()) accumulate(*pb, gb);
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kMul); }
Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(a, b, BinOp::kMin);
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, [c](double x) { return c * x; },
               [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, [c](double x) { return x + c; },
               [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) {
                 return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
               });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) {
                 return (x >= lo && x <= hi) ? 1.0 : 0.0;
               });
}

Tensor sum(const Tensor& a) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  double total = 0.0;
  for (double x : na.value) total += x;
  Tape::Node* pa = &na;
  return tape.push({1}, {total}, na.requires_grad, [pa](Tape::Node& self) {
    std::vector<double> g(pa->value.size(), self.grad[0]);
    accumulate(*pa, g);
  });
}

Tensor mean(const Tensor& a) {
  const std::size_t n = a.size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor sum_last(const Tensor& a) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  const int k = last_dim(na.shape);
  const std::size_t rows = na.value.size() / k;
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < k; ++j) out[r] += na.value[r * k + j];
  }
  Tape::Node* pa = &na;
  return tape.push(drop_last(na.shape), std::move(out), na.requires_grad,
                   [pa, k, rows](Tape::Node& self) {
                     std::vector<double> g(rows * k);
                     for (std::size_t r = 0; r < rows; ++r) {
                       for (int j = 0; j < k; ++j) g[r * k + j] = self.grad[r];
                     }
                     accumulate(*pa, g);
                   });
}

Tensor softmax(const Tensor& a) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  const int k = last_dim(na.shape);
  const std::size_t rows = na.value.size() / k;
  std::vector<double> out(na.value.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = na.value.data() + r * k;
    double* y = out.data() + r * k;
    const double top = *std::max_element(x, x + k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += (y[j] = std::exp(x[j] - top));
    for (int j = 0; j < k; ++j) y[j] /= total;
  }
  Tape::Node* pa = &na;
  return tape.push(na.shape, std::move(out), na.requires_grad,
                   [pa, k, rows](Tape::Node& self) {
                     std::vector<double> g(self.grad.size());
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* y = self.value.data() + r * k;
                       const double* gy = self.grad.data() + r * k;
                       double dot = 0.0;
                       for (int j = 0; j < k; ++j) dot += gy[j] * y[j];
                       for (int j = 0; j < k; ++j) g[r * k + j] = y[j] * (gy[j] - dot);
                     }
                     accumulate(*pa, g);
                   });
}

Tensor log_softmax(const Tensor& a) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  const int k = last_dim(na.shape);
  const std::size_t rows = na.value.size() / k;
  std::vector<double> out(na.value.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = na.value.data() + r * k;
    const double top = *std::max_element(x, x + k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += std::exp(x[j] - top);
    const double lse = top + std::log(total);
    for (int j = 0; j < k; ++j) out[r * k + j] = x[j] - lse;
  }
  Tape::Node* pa = &na;
  return tape.push(na.shape, std::move(out), na.requires_grad,
                   [pa, k, rows](Tape::Node& self) {
                     std::vector<double> g(self.grad.size());
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* y = self.value.data() + r * k;
                       const double* gy = self.grad.data() + r * k;
                       double total = 0.0;
                       for (int j = 0; j < k; ++j) total += gy[j];
                       for (int j = 0; j < k; ++j) {
                         g[r * k + j] = gy[j] - std::exp(y[j]) * total;
                       }
                     }
                     accumulate(*pa, g);
                   });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  Tape& tape = *parts[0].tape();
  std::vector<Tape::Node*> nodes;
  std::vector<int> widths;
  Shape lead = drop_last(tape.node(parts[0]).shape);
  const std::size_t rows = numel(lead);
  int total = 0;
  bool needs_grad = false;
  for (const Tensor& t : parts) {
    if (t.tape() != &tape) throw std::invalid_argument("concat across tapes");
    Tape::Node& n = tape.node(t);
    if (n.value.size() % rows != 0 ||
        n.value.size() / rows != static_cast<std::size_t>(n.shape.back())) {
      throw DimensionError("concat leading dims disagree");
    }
    nodes.push_back(&n);
    widths.push_back(n.shape.back());
    total += n.shape.back();
    needs_grad = needs_grad || n.requires_grad;
  }
  std::vector<double> out(rows * total);
  for (std::size_t r = 0; r < rows; ++r) {
    int off = 0;
    for (std::size_t p = 0; p < nodes.size(); ++p) {
      std::copy_n(nodes[p]->value.data() + r * widths[p], widths[p],
                  out.data() + r * total + off);
      off += widths[p];
    }
  }
  Shape out_shape = tape.node(parts[0]).shape;
  out_shape.back() = total;
  return tape.push(out_shape, std::move(out), needs_grad,
                   [nodes, widths, rows, total](Tape::Node& self) {
                     int off = 0;
                     for (std::size_t p = 0; p < nodes.size(); ++p) {
                       if (nodes[p]->requires_grad) {
                         std::vector<double> g(rows * widths[p]);
                         for (std::size_t r = 0; r < rows; ++r) {
                           std::copy_n(self.grad.data() + r * total + off,
                                       widths[p], g.data() + r * widths[p]);
                         }
                         accumulate(*nodes[p], g);
                       }
                       off += widths[p];
                     }
                   });
}

Tensor slice(const Tensor& a, int begin, int end) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  const int k = last_dim(na.shape);
  if (begin < 0 || end > k || begin >= end) {
    throw DimensionError("slice [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") of width " + std::to_string(k));
  }
  const int w = end - begin;
  const std::size_t rows = na.value.size() / k;
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(na.value.data() + r * k + begin, w, out.data() + r * w);
  }
  Shape out_shape = na.shape;
  out_shape.back() = w;
  Tape::Node* pa = &na;
  return tape.push(out_shape, std::move(out), na.requires_grad,
                   [pa, k, w, begin, rows](Tape::Node& self) {
                     std::vector<double> g(rows * k, 0.0);
                     for (std::size_t r = 0; r < rows; ++r) {
                       std::copy_n(self.grad.data() + r * w, w,
                                   g.data() + r * k + begin);
                     }
                     accumulate(*pa, g);
                   });
}

Tensor gather(const Tensor& a, std::span<const int> index) {
  Tape& tape = *a.tape();
  Tape::Node& na = tape.node(a);
  const int k = last_dim(na.shape);
  const std::size_t rows = na.value.size() / k;
  if (index.size() != rows) throw DimensionError("gather index has wrong length");
  std::vector<int> idx(index.begin(), index.end());
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] < 0 || idx[r] >= k) throw DimensionError("gather index out of range");
    out[r] = na.value[r * k + idx[r]];
  }
  Tape::Node* pa = &na;
  return tape.push(drop_last(na.shape), std::move(out), na.requires_grad,
                   [pa, k, rows, idx = std::move(idx)](Tape::Node& self) {
                     std::vector<double> g(rows * k, 0.0);
                     for (std::size_t r = 0; r < rows; ++r) {
                       g[r * k + idx[r]] = self.grad[r];
                     }
                     accumulate(*pa, g);
                   });
}

Tensor straight_through(const Tensor& soft, std::vector<double> hard) {
  Tape& tape = *soft.tape();
  Tape::Node& ns = tape.node(soft);
  if (hard.size() != ns.value.size()) {
    throw DimensionError("straight-through hard values have wrong size");
  }
  Tape::Node* ps = &ns;
  return tape.push(ns.shape, std::move(hard), ns.requires_grad,
                   [ps](Tape::Node& self) { accumulate(*ps, self.grad); });
}

Tensor detach(const Tensor& a) {
  const Tape::Node& na = a.tape()->node(a);
  return a.tape()->constant(na.shape, na.value);
}

Linear::Linear(int in, int out, std::mt19937_64& rng, double gain)
    : weight_({in, out}), bias_({out}) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (auto& w : weight_.value) w = gain * unif(rng);
  for (auto& b : bias_.value) b = gain * unif(rng);
}

Tensor Linear::forward(Tape& tape, const Tensor& x) {
  return add(matmul(x, tape.param(weight_)), tape.param(bias_));
}

Mlp::Mlp(const std::vector<int>& widths, std::mt19937_64& rng,
         double last_gain) {
  if (widths.size() < 2) throw DimensionError("an MLP needs >= 2 widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = l + 2 == widths.size();
    layers_.emplace_back(widths[l], widths[l + 1], rng, last ? last_gain : 1.0);
  }
}

Tensor Mlp::forward(Tape& tape, const Tensor& x) {
  Tensor h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].forward(tape, h);
    if (l + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer.parameters()) out.push_back(p);
  }
  return out;
}

bool adam_step(std::span<Parameter* const> params, const AdamConfig& config,
               AdamState& state) {
  for (const Parameter* p : params) {
    for (double g : p->grad) {
      if (!std::isfinite(g)) return false;
    }
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& param = *params[p];
    if (state.m[p].size() != param.value.size()) {
      throw DimensionError("Adam state does not match parameter shapes");
    }
    for (std::size_t k = 0; k < param.value.size(); ++k) {
      const double g = param.grad[k];
      double& m = state.m[p][k];
      double& v = state.v[p][k];
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g * g;
      param.value[k] -= config.lr * (m / c1) / (std::sqrt(v / c2) + config.eps);
    }
  }
  return true;
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double total = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double c = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad) g *= c;
    }
  }
  return norm;
}

}  // namespace bnpg::ad
