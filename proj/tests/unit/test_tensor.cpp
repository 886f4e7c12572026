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

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "doctest.h"
#include "bnpg/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace bnpg::ad;

TEST_CASE("finite-difference checks of every differentiable op") {
  for (const auto& op : bnpg::testing::all_op_cases()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      CAPTURE(op.name);
      CHECK(bnpg::testing::op_gradient_error(op, seed) < 1e-4);
    }
  }
}

TEST_CASE("elementwise values") {
  Tape tape;
  const Tensor x = tape.constant({4}, {-1.0, -0.5, 0.5, 2.0});
  CHECK(relu(x).value() == std::vector<double>{0.0, 0.0, 0.5, 2.0});
  const Tensor s = softmax(tape.constant({2, 3}, {1, 2, 3, -1, 0, 1000}));
  for (int r = 0; r < 2; ++r) {
    double total = 0.0;
    for (int c = 0; c < 3; ++c) total += s.value()[r * 3 + c];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Tensor ls = log_softmax(tape.constant({1, 2}, {0.0, -2000.0}));
  CHECK(std::isfinite(ls.value()[1]));
}

TEST_CASE("relu derivative is one on positives and zero on negatives") {
  Tape tape;
  const Tensor x = tape.variable({2}, {1.5, -1.5});
  tape.backward(sum(relu(x)));
  CHECK(x.grad() == std::vector<double>{1.0, 0.0});
}

TEST_CASE("diamond graph accumulates both paths") {
  Tape tape;
  const Tensor x = tape.variable({1}, {0.7});
  const Tensor a = square(x);
  const Tensor b = exp(x);
  tape.backward(sum(add(mul(a, b), a)));
  // d/dx (x^2 e^x + x^2) = 2x e^x + x^2 e^x + 2x
  const double expect = 2 * 0.7 * std::exp(0.7) + 0.49 * std::exp(0.7) + 1.4;
  CHECK(x.grad()[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("straight-through and detach") {
  Tape tape;
  const Tensor soft = tape.variable({3}, {0.2, 0.5, 0.3});
  const Tensor hard = straight_through(soft, {0.0, 1.0, 0.0});
  CHECK(hard.value() == std::vector<double>{0.0, 1.0, 0.0});
  const Tensor other = tape.variable({3}, {1.0, 2.0, 3.0});
  tape.backward(sum(add(mul(hard, tape.constant({3}, {1, 2, 3})), detach(other))));
  CHECK(soft.grad() == std::vector<double>{1.0, 2.0, 3.0});
  CHECK((other.grad().empty() || other.grad() == std::vector<double>(3, 0.0)));
}

TEST_CASE("shape errors") {
  Tape tape;
  const Tensor a = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  const Tensor b = tape.constant({2, 2}, std::vector<double>(4, 1.0));
  CHECK_THROWS(matmul(a, b));
  CHECK_THROWS(add(a, b));
  CHECK_THROWS(reshape(a, {4}));
  CHECK_THROWS(tape.constant({2}, {1.0}));
  CHECK_THROWS(straight_through(a, {1.0}));
}

TEST_CASE("three-layer MLP parameter gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CHECK(bnpg::testing::mlp_gradient_error(seed) < 1e-4);
  }
}

TEST_CASE("linear layer initialization bounds") {
  std::mt19937_64 rng(1);
  Linear lin(16, 4, rng, 0.5);
  for (auto* p : lin.parameters()) {
    for (double w : p->value) CHECK(std::abs(w) <= 0.5 / 4.0 + 1e-15);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Parameter p({3});
    p.value = {1.0, -2.0, 0.5};
    AdamState st;
    for (int k = 0; k < 10; ++k) {
      p.zero_grad();
      Parameter* ptr = &p;
      CHECK(adam_step(std::span<Parameter* const>(&ptr, 1), {}, st));
    }
    CHECK(p.value == std::vector<double>{1.0, -2.0, 0.5});
  }
  SUBCASE("constant gradient steps approach lr times sign") {
    Parameter p({2});
    AdamState st;
    const AdamConfig cfg{.lr = 0.01};
    Parameter* ptr = &p;
    std::vector<double> prev;
    for (int k = 0; k < 2000; ++k) {
      p.grad = {3.0, -0.25};
      prev = p.value;
      adam_step(std::span<Parameter* const>(&ptr, 1), cfg, st);
    }
    CHECK(prev[0] - p.value[0] == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(p.value[1] - prev[1] == doctest::Approx(0.01).epsilon(1e-3));
  }
  SUBCASE("scalar quadratic follows the reference recursion") {
    Parameter p({1});
    p.value = {0.0};
    AdamState st;
    const AdamConfig cfg{.lr = 0.1, .eps = 1e-8};
    Parameter* ptr = &p;
    double x = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 500; ++t) {
      p.grad = {2.0 * (p.value[0] - 3.0)};
      adam_step(std::span<Parameter* const>(&ptr, 1), cfg, st);
      const double g = 2.0 * (x - 3.0);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1 - std::pow(0.9, t));
      const double vh = v / (1 - std::pow(0.999, t));
      x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p.value[0] == doctest::Approx(x).epsilon(1e-12));
    }
    CHECK(std::pow(p.value[0] - 3.0, 2) < 1e-6);
  }
  SUBCASE("non-finite gradient skips the update") {
    Parameter p({1});
    p.value = {1.0};
    p.grad = {std::numeric_limits<double>::quiet_NaN()};
    AdamState st;
    Parameter* ptr = &p;
    CHECK_FALSE(adam_step(std::span<Parameter* const>(&ptr, 1), {}, st));
    CHECK(p.value[0] == 1.0);
    CHECK(st.step == 0);
  }
}

TEST_CASE("gradient clipping") {
  Parameter a({2}), b({1});
  a.grad = {3.0, 0.0};
  b.grad = {4.0};
  std::vector<Parameter*> ps{&a, &b};
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad[0] == doctest::Approx(0.6));
  CHECK(b.grad[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(ps, 10.0) == doctest::Approx(1.0));
  CHECK(a.grad[0] == doctest::Approx(0.6));
}
