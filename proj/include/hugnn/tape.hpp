/**
 * Copyright 2026 The hugnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include "hugnn/error.hpp"
#include "hugnn/tensor.hpp"

namespace hugnn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recording of tensor operations.
///
/// Entries are appended in evaluation order, so every input precedes its output
/// and a single reverse sweep visits each recorded use exactly once. Values are
/// stored in a deque so references handed out by value() stay valid while more
/// operations are recorded. A tape belongs to one thread.
class Tape {
 public:
  /// Called during the reverse sweep with the accumulated gradient of the output.
  using Backward = std::function<void(Tape&, const std::vector<double>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf. backward() adds into `p.grad` (allocated on first use).
  /// `p` must outlive the tape's backward pass.
  Var parameter(Tensor& p) {
    Node& n = nodes_.emplace_back();
    n.external = &p;
    n.param = &p;
    n.needs_grad = true;
    return {this, nodes_.size() - 1};
  }

  Var constant(Tensor v) {
    Node& n = nodes_.emplace_back();
    n.owned = std::move(v);
    return {this, nodes_.size() - 1};
  }

  /// Non-owning constant; `v` must outlive the tape.
  Var constant_ref(const Tensor& v) {
    Node& n = nodes_.emplace_back();
    n.external = &v;
    return {this, nodes_.size() - 1};
  }

  /// Leaf that is differentiated but not bound to a parameter; read its gradient with grad().
  Var variable(Tensor v) {
    Node& n = nodes_.emplace_back();
    n.owned = std::move(v);
    n.needs_grad = true;
    return {this, nodes_.size() - 1};
  }

  Var record(Tensor value, std::initializer_list<Var> inputs, Backward fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
  }

  Var record(Tensor value, const std::vector<Var>& inputs, Backward fn) {
    Node& n = nodes_.emplace_back();
    n.owned = std::move(value);
    for (const Var& v : inputs) {
      if (v.tape != this) throw ContractError("operand recorded on a different tape");
      n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(fn);
    return {this, nodes_.size() - 1};
  }

  /// Attach the backward rule after recording, for rules that read their own output.
  void set_backward(Var v, Backward fn) {
    Node& n = nodes_[v.id];
    if (n.needs_grad) n.backward = std::move(fn);
  }

  const Tensor& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external ? *n.external : n.owned;
  }

  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Gradient accumulator for `v`, zero-initialised on first access.
  std::vector<double>& grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad.assign(value(v).size(), 0.0);
    return n.grad;
  }

  /// Gradient of a leaf created with variable(); valid after backward(..., keep = true).
  const std::vector<double>& grad_of(Var v) const { return nodes_[v.id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Parameter gradients are accumulated into
  /// their tensors; the tape is cleared afterwards unless `keep` is set.
  void backward(Var loss, bool keep = false) {
    if (loss.tape != this) throw ContractError("loss recorded on a different tape");
    const Tensor& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward needs a scalar loss, got " + lv.shape_string());
    }
    if (!nodes_[loss.id].needs_grad) throw ContractError("loss does not depend on any parameter");
    grad(loss)[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param) {
        if (n.param->grad.empty()) n.param->grad.assign(n.param->size(), 0.0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
      }
    }
    if (!keep) clear();
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor* param = nullptr;
    Backward backward;
    std::vector<double> grad;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

}  // namespace hugnn
