#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spectrai/nn/tensor.hpp"

namespace spectrai::nn {

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  /// Buffers (batch-norm running statistics) are archived but not optimized.
  bool trainable = true;

  Parameter() = default;
  Parameter(Shape shape, bool is_trainable = true)
      : value(shape), grad(shape), trainable(is_trainable) {}
};

template <typename T>
using ParameterList = std::vector<std::pair<std::string, Parameter<T>*>>;

/// Layer with an explicit backward pass. forward caches what backward needs,
/// so each backward call pairs with the most recent forward.
template <typename T>
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

  void set_training(bool on) {
    training_ = on;
    for (auto& [_, child] : children_) child->set_training(on);
  }
  bool training() const { return training_; }

  /// Parameters and buffers in registration order, with dotted names.
  void collect(ParameterList<T>& out, const std::string& prefix = "") {
    for (auto& [name, p] : params_) out.emplace_back(prefix + name, p);
    for (auto& [name, child] : children_) child->collect(out, prefix + name + ".");
  }

  ParameterList<T> parameters() {
    ParameterList<T> out;
    collect(out);
    return out;
  }

  void zero_grad() {
    for (auto& [_, p] : parameters()) p->grad.fill(T(0));
  }

 protected:
  void register_parameter(std::string name, Parameter<T>* p) { params_.emplace_back(std::move(name), p); }
  void register_module(std::string name, Module<T>* m) { children_.emplace_back(std::move(name), m); }

 private:
  bool training_ = true;
  std::vector<std::pair<std::string, Parameter<T>*>> params_;
  std::vector<std::pair<std::string, Module<T>*>> children_;
};

template <typename T>
using ModulePtr = std::unique_ptr<Module<T>>;

}  // namespace spectrai::nn
