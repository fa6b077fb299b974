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

// Small dense tanh networks: forward evaluation, parameter gradients for
// training and input Jacobians for crafting perturbations.

#ifndef ENVADV_NET_H_
#define ENVADV_NET_H_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace envadv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// How the last (linear) layer is consumed downstream. The net itself always
// ends in an identity layer; the tag only documents intent and is persisted.
enum class OutputHead : std::uint8_t {
  kValue = 0,         // scalar critic
  kLogits = 1,        // categorical actor, softmax applied by the caller
  kGaussianMean = 2,  // mean of a diagonal Gaussian
};

// Multilayer perceptron with tanh hidden activations. weights[l] has shape
// (layer_sizes[l + 1], layer_sizes[l]).
struct FeedForwardNet {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  OutputHead head = OutputHead::kValue;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  Eigen::Index num_params() const;

  // Throws ShapeError if the matrices do not chain with layer_sizes or a
  // parameter is not finite.
  void Validate() const;

  friend bool operator==(const FeedForwardNet& a, const FeedForwardNet& b);
};

// Parameter-shaped accumulator. Summing per-sample gradients gives the
// minibatch gradient.
struct Gradient {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradient ZerosLike(const FeedForwardNet& net);
  Gradient& operator+=(const Gradient& other);
  Gradient& operator*=(double scale);
  bool IsZero() const;
  bool AllFinite() const;
};

// Builds a net with fan-in scaled uniform weights (variance gain^2 / fan_in)
// and zero biases. `output_gain` applies to the last layer only.
FeedForwardNet MakeNet(const std::vector<int>& layer_sizes, OutputHead head,
                       double output_gain, std::mt19937_64& rng);

// Zero-parameter net, mostly useful in tests.
FeedForwardNet MakeZeroNet(const std::vector<int>& layer_sizes,
                           OutputHead head);

Vector Forward(const FeedForwardNet& net, const Vector& x);

// Column-wise forward pass: inputs is (d, n), result is (k, n).
Matrix ForwardBatch(const FeedForwardNet& net, const Matrix& inputs);

// k x d matrix of d output_j / d x_i, one reverse pass per output row.
Matrix InputJacobian(const FeedForwardNet& net, const Vector& x);

// Vector-Jacobian product: gradient of <upstream, net(x)> w.r.t. x.
Vector InputGradient(const FeedForwardNet& net, const Vector& x,
                     const Vector& upstream);

// Gradient of <upstream, net(x)> w.r.t. every parameter.
Gradient ParamGradient(const FeedForwardNet& net, const Vector& x,
                       const Vector& upstream);

// Sum over columns of ParamGradient(net, inputs.col(i), upstream.col(i)).
Gradient ParamGradientBatch(const FeedForwardNet& net, const Matrix& inputs,
                            const Matrix& upstream);

// Max-subtracted softmax.
Vector Softmax(const Vector& logits);
Vector LogSoftmax(const Vector& logits);

// Flat views of the parameters in layer order (W0 row-major, b0, W1, ...).
Vector FlattenParams(const FeedForwardNet& net);
void AssignParams(FeedForwardNet& net, const Vector& flat);
Vector FlattenGradient(const Gradient& grad);

// Versioned binary record: magic, version, head, layer sizes, then
// row-major weights and biases as little-endian IEEE doubles.
void WriteNet(std::ostream& out, const FeedForwardNet& net);
FeedForwardNet ReadNet(std::istream& in);

// Raw helpers shared with the other checkpoint writers.
void WriteDoubles(std::ostream& out, const Vector& values);
Vector ReadDoubles(std::istream& in);
void WriteU64(std::ostream& out, std::uint64_t value);
std::uint64_t ReadU64(std::istream& in);

}  // namespace envadv

#endif  // ENVADV_NET_H_
