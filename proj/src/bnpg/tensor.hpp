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

#ifndef BNPG_TENSOR_HPP_
#define BNPG_TENSOR_HPP_

// Minimal reverse-mode autodiff over dense row-major float64 tensors.
//
// A Tape owns every node created during one forward pass. Nodes are appended
// in creation order, which is a topological order, so backward() walks the
// tape in reverse. Gradients are accumulated with +=. Broadcasting is limited
// to a shared trailing block over the leading (batch) dimension.

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bnpg::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Persistent trainable tensor. Lives outside any tape.
struct Parameter {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter() = default;
  explicit Parameter(Shape s);
  void zero_grad();
};

class Tape;

// Handle to a node on a tape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  int dim(int k) const;
  std::size_t size() const;
  const std::vector<double>& value() const;
  double item() const;  // value of a single-element tensor
  const std::vector<double>& grad() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Shape shape, std::vector<double> value);
  Tensor scalar(double v) { return constant({1}, {v}); }
  // Leaf bound to a parameter; backward() adds into param.grad.
  Tensor param(Parameter& p);
  // Leaf that records a gradient but is not bound to a parameter.
  Tensor variable(Shape shape, std::vector<double> value);

  // Seeds d(loss)/d(loss) = 1 and propagates to every leaf.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(Node&)> backward;
  };

  Node& node(const Tensor& t);
  const Node& node(const Tensor& t) const;
  Tensor push(Shape shape, std::vector<double> value, bool requires_grad,
              std::function<void(Node&)> backward);

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

// Accumulate g into a node's gradient buffer (allocating it on first use).
void accumulate(Tape::Node& n, std::span<const double> g);

// Linear algebra and elementwise ops.
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K]x[K,N], [B,M,K]x[B,K,N]
Tensor transpose(const Tensor& a);                // swaps the last two dims
Tensor reshape(const Tensor& a, Shape shape);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions and last-dimension ops.
Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]
Tensor sum_last(const Tensor& a);
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
Tensor concat(std::span<const Tensor> parts);  // along the last dim
Tensor slice(const Tensor& a, int begin, int end);  // along the last dim
Tensor gather(const Tensor& a, std::span<const int> index);  // [..,K] -> [..]

// Forward = hard, backward = identity into soft. Shapes must match.
Tensor straight_through(const Tensor& soft, std::vector<double> hard);
Tensor detach(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Fully connected layer y = x W + b with W [in, out].
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, std::mt19937_64& rng, double gain = 1.0);

  Tensor forward(Tape& tape, const Tensor& x);
  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  int in_features() const { return weight_.shape[0]; }
  int out_features() const { return weight_.shape[1]; }

 private:
  Parameter weight_;
  Parameter bias_;
};

// FC-ReLU-...-FC. widths = {in, hidden..., out}.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& widths, std::mt19937_64& rng,
      double last_gain = 1.0);

  Tensor forward(Tape& tape, const Tensor& x);
  std::vector<Parameter*> parameters();
  int in_features() const { return layers_.front().in_features(); }
  int out_features() const { return layers_.back().out_features(); }

 private:
  std::vector<Linear> layers_;
};

struct AdamConfig {
  double lr = 7e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// One Adam update with bias correction. Returns false and leaves params and
// state untouched if any gradient is non-finite.
bool adam_step(std::span<Parameter* const> params, const AdamConfig& config,
               AdamState& state);

// Rescales gradients so their joint L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace bnpg::ad

#endif  // BNPG_TENSOR_HPP_
