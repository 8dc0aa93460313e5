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

#include "hfbrt/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hfbrt::ad {

int ParamStore::add(const std::string& name, Mat init) {
  if (has(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  const int id = size();
  names_.push_back(name);
  values_.push_back(std::move(init));
  index_[name] = id;
  return id;
}

int ParamStore::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Eigen::Index ParamStore::count() const {
  Eigen::Index n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

GradBuffer ParamStore::zero_grads() const {
  GradBuffer g;
  g.reserve(values_.size());
  for (const auto& v : values_) g.push_back(Mat::Zero(v.rows(), v.cols()));
  return g;
}

const Mat& Var::value() const { return graph->value(id); }

void Graph::check(Var v) const {
  if (v.graph != this || v.id < 0 || v.id >= size())
    throw std::logic_error("tensor handle does not belong to this graph");
}

Var Graph::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, size() - 1};
}

Var Graph::variable(Mat value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, size() - 1};
}

Var Graph::param(const ParamStore& store, int id) {
  Node n;
  n.ref = &store.value(id);
  n.param = id;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, size() - 1};
}

Var Graph::push(Mat value, std::vector<int> parents, Backward backward) {
  Node n;
  for (int p : parents) {
    if (p < 0 || p >= size()) throw std::logic_error("graph edge to a node that does not precede it");
    n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  }
  n.value = std::move(value);
  n.parents = std::move(parents);
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, size() - 1};
}

const Mat& Graph::value(int id) const {
  const Node& n = nodes_.at(id);
  return n.ref ? *n.ref : n.value;
}

const Mat& Graph::grad(Var v) const {
  check(v);
  return nodes_[v.id].grad;
}

void Graph::accumulate(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Graph::backward(Var loss, GradBuffer& sink) {
  check(loss);
  if (value(loss.id).size() != 1) throw ShapeError("backward() needs a scalar loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = Mat::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param >= 0) {
      if (n.param >= static_cast<int>(sink.size())) throw ShapeError("gradient sink is smaller than the store");
      sink[n.param] += n.grad;
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

void Graph::backward(Var loss) {
  GradBuffer none;
  for (const auto& n : nodes_)
    if (n.param >= 0) throw std::logic_error("graph has parameters; pass a gradient sink");
  backward(loss, none);
}

namespace {

void same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     ")");
}

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr) throw std::logic_error("operands belong to different graphs");
  return *a.graph;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (A.cols() != B.rows())
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(A.cols()) + " vs " +
                     std::to_string(B.rows()) + ")");
  return g.push(A * B, {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    if (g.needs_grad(a)) g.accumulate(a, up * g.value(b).transpose());
    if (g.needs_grad(b)) g.accumulate(b, g.value(a).transpose() * up);
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  same_shape(a.value(), b.value(), "add");
  return g.push(a.value() + b.value(), {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    g.accumulate(a, g.upstream(self));
    g.accumulate(b, g.upstream(self));
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  same_shape(a.value(), b.value(), "sub");
  return g.push(a.value() - b.value(), {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    g.accumulate(a, g.upstream(self));
    if (g.needs_grad(b)) g.accumulate(b, -g.upstream(self));
  });
}

Var hadamard(Var a, Var b) {
  Graph& g = graph_of(a, b);
  same_shape(a.value(), b.value(), "hadamard");
  return g.push(a.value().cwiseProduct(b.value()), {a.id, b.id}, [a = a.id, b = b.id](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    if (g.needs_grad(a)) g.accumulate(a, up.cwiseProduct(g.value(b)));
    if (g.needs_grad(b)) g.accumulate(b, up.cwiseProduct(g.value(a)));
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph;
  return g.push(a.value() * s, {a.id}, [a = a.id, s](Graph& g, int self) { g.accumulate(a, g.upstream(self) * s); });
}

Var scale_by(Var a, Var s) {
  Graph& g = graph_of(a, s);
  if (s.value().size() != 1) throw ShapeError("scale_by: scale must be 1 x 1");
  return g.push(a.value() * s.value()(0, 0), {a.id, s.id}, [a = a.id, s = s.id](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    if (g.needs_grad(a)) g.accumulate(a, up * g.value(s)(0, 0));
    if (g.needs_grad(s)) g.accumulate(s, Mat::Constant(1, 1, up.cwiseProduct(g.value(a)).sum()));
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  const Mat& R = row.value();
  if (R.rows() != 1 || R.cols() != a.cols()) throw ShapeError("add_row: expected a 1 x cols row");
  Mat out = a.value();
  out.rowwise() += R.row(0);
  return g.push(std::move(out), {a.id, row.id}, [a = a.id, r = row.id](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    g.accumulate(a, up);
    if (g.needs_grad(r)) g.accumulate(r, up.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  const Mat& R = row.value();
  if (R.rows() != 1 || R.cols() != a.cols()) throw ShapeError("mul_row: expected a 1 x cols row");
  Mat out = a.value().array().rowwise() * R.row(0).array();
  return g.push(std::move(out), {a.id, row.id}, [a = a.id, r = row.id](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    if (g.needs_grad(a)) g.accumulate(a, (up.array().rowwise() * g.value(r).row(0).array()).matrix());
    if (g.needs_grad(r)) g.accumulate(r, up.cwiseProduct(g.value(a)).colwise().sum());
  });
}

Var one_minus(Var a) {
  Graph& g = *a.graph;
  Mat out = (1.0 - a.value().array()).matrix();
  return g.push(std::move(out), {a.id}, [a = a.id](Graph& g, int self) { g.accumulate(a, -g.upstream(self)); });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = *parts.front().graph;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.graph != &g) throw std::logic_error("operands belong to different graphs");
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
    ids.push_back(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return g.push(std::move(out), ids, [ids](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index c = g.value(id).cols();
      if (g.needs_grad(id)) g.accumulate(id, up.middleCols(off, c));
      off += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = *parts.front().graph;
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.graph != &g) throw std::logic_error("operands belong to different graphs");
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
    ids.push_back(p.id);
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return g.push(std::move(out), ids, [ids](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index r = g.value(id).rows();
      if (g.needs_grad(id)) g.accumulate(id, up.middleRows(off, r));
      off += r;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = *a.graph;
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  return g.push(a.value().middleCols(start, count), {a.id}, [a = a.id, start, count](Graph& g, int self) {
    Mat full = Mat::Zero(g.value(a).rows(), g.value(a).cols());
    full.middleCols(start, count) = g.upstream(self);
    g.accumulate(a, full);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = *a.graph;
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: range out of bounds");
  return g.push(a.value().middleRows(start, count), {a.id}, [a = a.id, start, count](Graph& g, int self) {
    Mat full = Mat::Zero(g.value(a).rows(), g.value(a).cols());
    full.middleRows(start, count) = g.upstream(self);
    g.accumulate(a, full);
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  return g.push(a.value().transpose(), {a.id},
                [a = a.id](Graph& g, int self) { g.accumulate(a, g.upstream(self).transpose()); });
}

Var softmax_rows(Var a) {
  Graph& g = *a.graph;
  const Mat& x = a.value();
  if (x.hasNaN()) g.flag_nan();
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return g.push(std::move(y), {a.id}, [a = a.id](Graph& g, int self) {
    const Mat& up = g.upstream(self);
    const Mat& y = g.value(self);
    const Eigen::VectorXd dots = up.cwiseProduct(y).rowwise().sum();
    Mat dx = y.cwiseProduct(up - dots.replicate(1, y.cols()));
    g.accumulate(a, dx);
  });
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  return cdf + x * pdf;
}

Var sigmoid(Var a) {
  Graph& g = *a.graph;
  Mat y = a.value().unaryExpr([](double v) { return sigmoid(v); });
  return g.push(std::move(y), {a.id}, [a = a.id](Graph& g, int self) {
    const Mat& y = g.value(self);
    g.accumulate(a, g.upstream(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var gelu(Var a) {
  Graph& g = *a.graph;
  Mat y = a.value().unaryExpr([](double v) { return gelu(v); });
  return g.push(std::move(y), {a.id}, [a = a.id](Graph& g, int self) {
    const Mat d = g.value(a).unaryExpr([](double v) { return gelu_grad(v); });
    g.accumulate(a, g.upstream(self).cwiseProduct(d));
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = graph_of(x, gain);
  if (bias.graph != &g) throw std::logic_error("operands belong to different graphs");
  const Mat& X = x.value();
  const Eigen::Index n = X.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
    throw ShapeError("layer_norm: gain and bias must be 1 x cols");
  Mat xhat(X.rows(), n);
  Vec inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).mean();
    const auto centered = (X.row(r).array() - mean).matrix();
    const double var = centered.squaredNorm() / static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std[r];
  }
  Mat y = xhat.array().rowwise() * gain.value().row(0).array();
  y.rowwise() += bias.value().row(0);
  return g.push(std::move(y), {x.id, gain.id, bias.id},
                [x = x.id, gn = gain.id, b = bias.id, xhat = std::move(xhat), inv_std](Graph& g, int self) {
                  const Mat& up = g.upstream(self);
                  if (g.needs_grad(gn)) g.accumulate(gn, up.cwiseProduct(xhat).colwise().sum());
                  if (g.needs_grad(b)) g.accumulate(b, up.colwise().sum());
                  if (!g.needs_grad(x)) return;
                  const Mat dxhat = up.array().rowwise() * g.value(gn).row(0).array();
                  const double n = static_cast<double>(xhat.cols());
                  Mat dx(xhat.rows(), xhat.cols());
                  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                    const double m1 = dxhat.row(r).sum() / n;
                    const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
                    dx.row(r) = inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
                  }
                  g.accumulate(x, dx);
                });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  return g.push(Mat::Constant(1, 1, a.value().sum()), {a.id}, [a = a.id](Graph& g, int self) {
    const Mat& v = g.value(a);
    g.accumulate(a, Mat::Constant(v.rows(), v.cols(), g.upstream(self)(0, 0)));
  });
}

Var squared_norm(Var a) {
  Graph& g = *a.graph;
  return g.push(Mat::Constant(1, 1, a.value().squaredNorm()), {a.id}, [a = a.id](Graph& g, int self) {
    g.accumulate(a, 2.0 * g.upstream(self)(0, 0) * g.value(a));
  });
}

}  // namespace hfbrt::ad
