// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The hfbrt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hfbrt/common.hpp"

// Dense 2-D tensors with tape-based reverse-mode differentiation. Every
// tensor is a matrix; a row is a token, so "broadcast" only ever means
// repeating a 1 x n row over the leading (token) dimension.
namespace hfbrt::ad {

using GradBuffer = std::vector<Mat>;

// Named trainable tensors. The id of a parameter is its insertion index.
class ParamStore {
 public:
  // Throws std::invalid_argument for a duplicate name.
  int add(const std::string& name, Mat init);
  int id(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  int size() const { return static_cast<int>(values_.size()); }
  Eigen::Index count() const;  // total number of scalars
  const std::string& name(int id) const { return names_.at(id); }
  Mat& value(int id) { return values_.at(id); }
  const Mat& value(int id) const { return values_.at(id); }

  // Zero buffer with one entry per parameter.
  GradBuffer zero_grads() const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::map<std::string, int> index_;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid with its graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, int)>;

  // Leaf that never receives a gradient.
  Var constant(Mat value);
  // Leaf whose gradient is kept on the node (for gradient checks).
  Var variable(Mat value);
  // Leaf bound to a parameter; its gradient lands in the sink passed to backward().
  Var param(const ParamStore& store, int id);

  // Appends an interior node. Parents must already belong to this graph,
  // which keeps the tape topologically ordered and acyclic.
  Var push(Mat value, std::vector<int> parents, Backward backward);

  const Mat& value(int id) const;
  const Mat& grad(Var v) const;
  bool needs_grad(int id) const { return nodes_.at(id).needs_grad; }
  // Adds `g` into the gradient of node `id` if it takes gradients.
  void accumulate(int id, const Mat& g);
  const Mat& upstream(int id) const { return nodes_.at(id).grad; }

  // Seeds d loss / d loss = 1 and walks the tape once in reverse. Parameter
  // gradients are added (+=) into `sink`, which must have one entry per
  // parameter of the store (see ParamStore::zero_grads()).
  void backward(Var loss, GradBuffer& sink);
  void backward(Var loss);

  int size() const { return static_cast<int>(nodes_.size()); }
  bool saw_nan() const { return saw_nan_; }
  void flag_nan() { saw_nan_ = true; }

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;
    Mat grad;
    std::vector<int> parents;
    Backward backward;
    int param = -1;
    bool needs_grad = false;
  };

  void check(Var v) const;

  std::vector<Node> nodes_;
  bool saw_nan_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
// a * s for a 1 x 1 tensor s.
Var scale_by(Var a, Var s);
// Adds the 1 x n row to every row of a.
Var add_row(Var a, Var row);
// Multiplies every row of a elementwise by the 1 x n row.
Var mul_row(Var a, Var row);
Var one_minus(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var transpose(Var a);
// Row-wise softmax with max subtraction. NaN inputs propagate and set the
// graph's NaN flag.
Var softmax_rows(Var a);
Var sigmoid(Var a);
// Gaussian error linear unit, x * Phi(x).
Var gelu(Var a);
// Normalizes each row to zero mean and unit (population) variance, then
// applies the 1 x n gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var sum(Var a);
Var squared_norm(Var a);

// Plain forward helpers shared with the inference kernels.
double sigmoid(double x);
double gelu(double x);
double gelu_grad(double x);

}  // namespace hfbrt::ad
