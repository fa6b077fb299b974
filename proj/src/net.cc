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

#include "envadv/net.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "envadv/errors.h"

namespace envadv {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kNetMagic[8] = {'E', 'N', 'V', 'A', 'D', 'V', 'N', 'T'};
constexpr std::uint64_t kNetVersion = 1;

void CheckInput(const FeedForwardNet& net, const Vector& x) {
  if (x.size() != net.input_dim()) {
    throw ShapeError("net input has " + std::to_string(x.size()) +
                     " entries, expected " + std::to_string(net.input_dim()));
  }
}

// Post-activation values of every layer; acts[0] is the input and the last
// entry is the (linear) output.
std::vector<Vector> ForwardTrace(const FeedForwardNet& net, const Vector& x) {
  std::vector<Vector> acts;
  acts.reserve(net.weights.size() + 1);
  acts.push_back(x);
  const int last = net.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    Vector z = net.weights[l] * acts.back() + net.biases[l];
    if (l < last) z = z.array().tanh();
    acts.push_back(std::move(z));
  }
  return acts;
}

std::vector<Matrix> ForwardTraceBatch(const FeedForwardNet& net,
                                      const Matrix& inputs) {
  std::vector<Matrix> acts;
  acts.reserve(net.weights.size() + 1);
  acts.push_back(inputs);
  const int last = net.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    Matrix z = net.weights[l] * acts.back();
    z.colwise() += net.biases[l];
    if (l < last) z = z.array().tanh();
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

Eigen::Index FeedForwardNet::num_params() const {
  Eigen::Index n = 0;
  for (int l = 0; l < num_layers(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void FeedForwardNet::Validate() const {
  if (layer_sizes.size() < 2) throw ShapeError("net needs at least 2 layer sizes");
  for (int s : layer_sizes) {
    if (s <= 0) throw ShapeError("layer sizes must be positive");
  }
  if (weights.size() + 1 != layer_sizes.size() ||
      biases.size() != weights.size()) {
    throw ShapeError("parameter count does not match layer_sizes");
  }
  for (int l = 0; l < num_layers(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] ||
        weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw ShapeError("layer " + std::to_string(l) +
                       " parameters do not chain with layer_sizes");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw ShapeError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

bool operator==(const FeedForwardNet& a, const FeedForwardNet& b) {
  if (a.layer_sizes != b.layer_sizes || a.head != b.head) return false;
  for (int l = 0; l < a.num_layers(); ++l) {
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

Gradient Gradient::ZerosLike(const FeedForwardNet& net) {
  Gradient g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

Gradient& Gradient::operator+=(const Gradient& other) {
  if (other.weights.size() != weights.size()) {
    throw ShapeError("cannot add gradients of different nets");
  }
  for (size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

Gradient& Gradient::operator*=(double scale) {
  for (size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= scale;
    biases[l] *= scale;
  }
  return *this;
}

bool Gradient::IsZero() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if ((weights[l].array() != 0.0).any() || (biases[l].array() != 0.0).any()) {
      return false;
    }
  }
  return true;
}

bool Gradient::AllFinite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

FeedForwardNet MakeZeroNet(const std::vector<int>& layer_sizes,
                           OutputHead head) {
  FeedForwardNet net;
  net.layer_sizes = layer_sizes;
  net.head = head;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    net.weights.push_back(Matrix::Zero(layer_sizes[l + 1], layer_sizes[l]));
    net.biases.push_back(Vector::Zero(layer_sizes[l + 1]));
  }
  net.Validate();
  return net;
}

FeedForwardNet MakeNet(const std::vector<int>& layer_sizes, OutputHead head,
                       double output_gain, std::mt19937_64& rng) {
  FeedForwardNet net = MakeZeroNet(layer_sizes, head);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double gain = (l == net.num_layers() - 1) ? output_gain : 1.0;
    // U(-a, a) has variance a^2 / 3.
    const double bound = gain * std::sqrt(3.0 / layer_sizes[l]);
    Matrix& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = bound * unit(rng);
    }
  }
  return net;
}

Vector Forward(const FeedForwardNet& net, const Vector& x) {
  CheckInput(net, x);
  return ForwardTrace(net, x).back();
}

Matrix ForwardBatch(const FeedForwardNet& net, const Matrix& inputs) {
  if (inputs.rows() != net.input_dim()) throw ShapeError("batch input rows != input dim");
  return ForwardTraceBatch(net, inputs).back();
}

namespace {

// Backpropagates `upstream` through a recorded trace. Fills parameter
// gradients when `grad` is non-null and returns the input gradient.
Vector Backward(const FeedForwardNet& net, const std::vector<Vector>& acts,
                const Vector& upstream, Gradient* grad) {
  Vector delta = upstream;
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    if (grad != nullptr) {
      grad->weights[l].noalias() = delta * acts[l].transpose();
      grad->biases[l] = delta;
    }
    Vector back = net.weights[l].transpose() * delta;
    if (l > 0) back.array() *= 1.0 - acts[l].array().square();
    delta = std::move(back);
  }
  return delta;
}

}  // namespace

Vector InputGradient(const FeedForwardNet& net, const Vector& x,
                     const Vector& upstream) {
  CheckInput(net, x);
  if (upstream.size() != net.output_dim()) throw ShapeError("upstream size != output dim");
  return Backward(net, ForwardTrace(net, x), upstream, nullptr);
}

Matrix InputJacobian(const FeedForwardNet& net, const Vector& x) {
  CheckInput(net, x);
  const std::vector<Vector> acts = ForwardTrace(net, x);
  const int k = net.output_dim();
  Matrix jac(k, net.input_dim());
  for (int j = 0; j < k; ++j) {
    jac.row(j) = Backward(net, acts, Vector::Unit(k, j), nullptr).transpose();
  }
  return jac;
}

Gradient ParamGradient(const FeedForwardNet& net, const Vector& x,
                       const Vector& upstream) {
  CheckInput(net, x);
  if (upstream.size() != net.output_dim()) throw ShapeError("upstream size != output dim");
  Gradient grad = Gradient::ZerosLike(net);
  Backward(net, ForwardTrace(net, x), upstream, &grad);
  return grad;
}

Gradient ParamGradientBatch(const FeedForwardNet& net, const Matrix& inputs,
                            const Matrix& upstream) {
  if (inputs.rows() != net.input_dim() || upstream.rows() != net.output_dim() ||
      inputs.cols() != upstream.cols()) {
    throw ShapeError("batch gradient shapes do not match the net");
  }
  const std::vector<Matrix> acts = ForwardTraceBatch(net, inputs);
  Gradient grad = Gradient::ZerosLike(net);
  Matrix delta = upstream;
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    grad.weights[l].noalias() = delta * acts[l].transpose();
    grad.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = net.weights[l].transpose() * delta;
    back.array() *= 1.0 - acts[l].array().square();
    delta = std::move(back);
  }
  return grad;
}

Vector Softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Vector LogSoftmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Vector FlattenParams(const FeedForwardNet& net) {
  Vector flat(net.num_params());
  Eigen::Index at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[at++] = w(r, c);
    }
    flat.segment(at, net.biases[l].size()) = net.biases[l];
    at += net.biases[l].size();
  }
  return flat;
}

void AssignParams(FeedForwardNet& net, const Vector& flat) {
  if (flat.size() != net.num_params()) throw ShapeError("flat parameter size mismatch");
  Eigen::Index at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    Matrix& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[at++];
    }
    net.biases[l] = flat.segment(at, net.biases[l].size());
    at += net.biases[l].size();
  }
}

Vector FlattenGradient(const Gradient& grad) {
  Eigen::Index n = 0;
  for (size_t l = 0; l < grad.weights.size(); ++l) {
    n += grad.weights[l].size() + grad.biases[l].size();
  }
  Vector flat(n);
  Eigen::Index at = 0;
  for (size_t l = 0; l < grad.weights.size(); ++l) {
    const Matrix& w = grad.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[at++] = w(r, c);
    }
    flat.segment(at, grad.biases[l].size()) = grad.biases[l];
    at += grad.biases[l].size();
  }
  return flat;
}

void WriteU64(std::ostream& out, std::uint64_t value) {
  char buf[8];
  std::memcpy(buf, &value, sizeof(buf));
  out.write(buf, sizeof(buf));
}

std::uint64_t ReadU64(std::istream& in) {
  char buf[8];
  if (!in.read(buf, sizeof(buf))) throw InputError("truncated checkpoint");
  std::uint64_t value;
  std::memcpy(&value, buf, sizeof(buf));
  return value;
}

void WriteDoubles(std::ostream& out, const Vector& values) {
  WriteU64(out, static_cast<std::uint64_t>(values.size()));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

Vector ReadDoubles(std::istream& in) {
  const std::uint64_t n = ReadU64(in);
  if (n > (std::uint64_t{1} << 32)) throw InputError("corrupt checkpoint array length");
  Vector values(static_cast<Eigen::Index>(n));
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(n * sizeof(double)))) {
    throw InputError("truncated checkpoint");
  }
  return values;
}

void WriteNet(std::ostream& out, const FeedForwardNet& net) {
  net.Validate();
  out.write(kNetMagic, sizeof(kNetMagic));
  WriteU64(out, kNetVersion);
  WriteU64(out, static_cast<std::uint64_t>(net.head));
  WriteU64(out, net.layer_sizes.size());
  for (int s : net.layer_sizes) WriteU64(out, static_cast<std::uint64_t>(s));
  WriteDoubles(out, FlattenParams(net));
}

FeedForwardNet ReadNet(std::istream& in) {
  char magic[sizeof(kNetMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kNetMagic, sizeof(magic)) != 0) {
    throw InputError("not a network checkpoint");
  }
  if (ReadU64(in) != kNetVersion) throw InputError("unsupported network checkpoint version");
  const std::uint64_t head = ReadU64(in);
  if (head > static_cast<std::uint64_t>(OutputHead::kGaussianMean)) {
    throw InputError("unknown output head in checkpoint");
  }
  const std::uint64_t depth = ReadU64(in);
  if (depth < 2 || depth > 64) throw InputError("corrupt layer count in checkpoint");
  std::vector<int> sizes;
  for (std::uint64_t i = 0; i < depth; ++i) {
    const std::uint64_t s = ReadU64(in);
    if (s == 0 || s > (1u << 20)) throw InputError("corrupt layer size in checkpoint");
    sizes.push_back(static_cast<int>(s));
  }
  FeedForwardNet net = MakeZeroNet(sizes, static_cast<OutputHead>(head));
  AssignParams(net, ReadDoubles(in));
  net.Validate();
  return net;
}

}  // namespace envadv
