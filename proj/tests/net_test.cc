// Copyright 2026 The envadv Authors.
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
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "envadv/errors.h"
#include "envadv/net.h"

namespace envadv {
namespace {

// Plain loop evaluation, independent of the Eigen expression path.
std::vector<double> ReferenceForward(const FeedForwardNet& net,
                                     const std::vector<double>& x) {
  std::vector<double> a = x;
  for (int l = 0; l < net.num_layers(); ++l) {
    std::vector<double> z(net.layer_sizes[l + 1]);
    for (int r = 0; r < net.layer_sizes[l + 1]; ++r) {
      double s = net.biases[l][r];
      for (int c = 0; c < net.layer_sizes[l]; ++c) s += net.weights[l](r, c) * a[c];
      z[r] = (l + 1 < net.num_layers()) ? std::tanh(s) : s;
    }
    a = z;
  }
  return a;
}

Vector RandomVector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

bool CloseRel(double analytic, double numeric) {
  return std::abs(analytic - numeric) <=
         1e-4 * std::max(std::abs(numeric), std::abs(analytic)) + 1e-6;
}

TEST_CASE("forward of a zero net is zero") {
  FeedForwardNet net = MakeZeroNet({3, 5, 2}, OutputHead::kLogits);
  Vector x(3);
  x << 0.4, -1.0, 7.0;
  CHECK(Forward(net, x) == Vector::Zero(2));
  CHECK(InputJacobian(net, x) == Matrix::Zero(2, 3));
}

TEST_CASE("identity layer passes the input through") {
  FeedForwardNet net = MakeZeroNet({2, 2}, OutputHead::kValue);
  net.weights[0] = Matrix::Identity(2, 2);
  Vector x(2);
  x << 0.3, -0.5;
  CHECK(Forward(net, x) == x);
}

TEST_CASE("linear layer jacobian equals the weight matrix") {
  std::mt19937_64 rng(3);
  FeedForwardNet net = MakeNet({4, 3}, OutputHead::kLogits, 1.0, rng);
  net.biases[0] = RandomVector(3, rng);
  Vector x = RandomVector(4, rng);
  CHECK(InputJacobian(net, x) == net.weights[0]);
}

TEST_CASE("forward matches an independent loop evaluation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    FeedForwardNet net = MakeNet({4, 8, 3}, OutputHead::kLogits, 1.0, rng);
    for (auto& b : net.biases) b = RandomVector(static_cast<int>(b.size()), rng);
    Vector x = RandomVector(4, rng);
    std::vector<double> ref = ReferenceForward(net, {x[0], x[1], x[2], x[3]});
    Vector y = Forward(net, x);
    for (int j = 0; j < 3; ++j) CHECK(y[j] == doctest::Approx(ref[j]).epsilon(1e-12));
    CHECK(Forward(net, x) == y);  // bitwise repeatable
  }
}

TEST_CASE("input jacobian matches central differences") {
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    FeedForwardNet net = MakeNet({4, 8, 3}, OutputHead::kLogits, 1.0, rng);
    Vector x = RandomVector(4, rng);
    Matrix jac = InputJacobian(net, x);
    for (int i = 0; i < 4; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      Vector fd = (Forward(net, xp) - Forward(net, xm)) / (2 * h);
      for (int j = 0; j < 3; ++j) CHECK(CloseRel(jac(j, i), fd[j]));
    }
  }
}

TEST_CASE("param gradient of a linear layer") {
  FeedForwardNet net = MakeZeroNet({3, 2}, OutputHead::kValue);
  Vector x(3);
  x << 1.0, -2.0, 0.5;
  Gradient g = ParamGradient(net, x, Vector::Unit(2, 1));
  CHECK(g.weights[0].row(1).transpose() == x);
  CHECK(g.weights[0].row(0).isZero());
  CHECK(g.biases[0][1] == 1.0);
  CHECK(g.biases[0][0] == 0.0);
  CHECK(ParamGradient(net, x, Vector::Zero(2)).IsZero());
}

TEST_CASE("param gradient matches central differences") {
  std::mt19937_64 rng(9);
  const double h = 1e-5;
  FeedForwardNet net = MakeNet({4, 6, 3}, OutputHead::kLogits, 1.0, rng);
  Vector x = RandomVector(4, rng);
  Vector up = RandomVector(3, rng);
  Vector analytic = FlattenGradient(ParamGradient(net, x, up));
  Vector params = FlattenParams(net);
  for (Eigen::Index p = 0; p < params.size(); ++p) {
    FeedForwardNet plus = net, minus = net;
    Vector pp = params, pm = params;
    pp[p] += h;
    pm[p] -= h;
    AssignParams(plus, pp);
    AssignParams(minus, pm);
    const double fd = (up.dot(Forward(plus, x)) - up.dot(Forward(minus, x))) / (2 * h);
    CHECK(CloseRel(analytic[p], fd));
  }
}

TEST_CASE("batched gradient sums per-sample gradients") {
  std::mt19937_64 rng(21);
  FeedForwardNet net = MakeNet({5, 7, 2}, OutputHead::kLogits, 1.0, rng);
  Matrix xs(5, 6), ups(2, 6);
  Gradient sum = Gradient::ZerosLike(net);
  for (int i = 0; i < 6; ++i) {
    xs.col(i) = RandomVector(5, rng);
    ups.col(i) = RandomVector(2, rng);
    sum += ParamGradient(net, xs.col(i), ups.col(i));
  }
  Vector batched = FlattenGradient(ParamGradientBatch(net, xs, ups));
  CHECK((batched - FlattenGradient(sum)).cwiseAbs().maxCoeff() < 1e-12);
  Matrix out = ForwardBatch(net, xs);
  for (int i = 0; i < 6; ++i) {
    CHECK((out.col(i) - Forward(net, xs.col(i))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax") {
  Vector z = Vector::Zero(5);
  Vector p = Softmax(z);
  for (int i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(0.2).epsilon(1e-15));

  Vector big(2);
  big << 1000.0, 0.0;
  Vector pb = Softmax(big);
  CHECK(pb.allFinite());
  CHECK(pb[0] == doctest::Approx(1.0));
  CHECK(pb[1] < 1e-300);

  Vector three(3);
  three << 1.0, 2.0, 3.0;
  // e^z / sum e^z evaluated by hand.
  const double s = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  Vector p3 = Softmax(three);
  CHECK(std::abs(p3[0] - std::exp(1.0) / s) < 1e-12);
  CHECK(std::abs(p3[0] - 0.09003) < 1e-5);
  CHECK(std::abs(p3[1] - 0.24473) < 1e-5);
  CHECK(std::abs(p3[2] - 0.66524) < 1e-5);
  CHECK(std::abs(p3.sum() - 1.0) < 1e-9);
}

TEST_CASE("softmax preserves argmax") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 500; ++t) {
    Vector z = 20.0 * RandomVector(5, rng);
    Eigen::Index az, ap;
    z.maxCoeff(&az);
    Softmax(z).maxCoeff(&ap);
    CHECK(az == ap);
  }
}

TEST_CASE("shape errors") {
  FeedForwardNet net = MakeZeroNet({3, 2}, OutputHead::kValue);
  CHECK_THROWS_AS(Forward(net, Vector::Zero(4)), ShapeError);
  CHECK_THROWS_AS(InputJacobian(net, Vector::Zero(2)), ShapeError);
  CHECK_THROWS_AS(ParamGradient(net, Vector::Zero(3), Vector::Zero(3)), ShapeError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(77);
  FeedForwardNet net = MakeNet({14, 64, 64, 5}, OutputHead::kLogits, 0.01, rng);
  std::stringstream ss;
  WriteNet(ss, net);
  const std::string bytes = ss.str();
  FeedForwardNet back = ReadNet(ss);
  CHECK(back == net);
  std::stringstream again;
  WriteNet(again, back);
  CHECK(again.str() == bytes);

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(ReadNet(truncated), InputError);
}

}  // namespace
}  // namespace envadv
