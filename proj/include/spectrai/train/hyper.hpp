#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "spectrai/core/gating.hpp"
#include "spectrai/nn/module.hpp"

namespace spectrai::train {

enum class Schedule { Constant, OneCycle };

std::string_view to_string(Schedule s);
Schedule parse_schedule(std::string_view text);

struct OneCycleParams {
  double warmup_fraction = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  friend bool operator==(const OneCycleParams&, const OneCycleParams&) = default;
};

struct Hyperparameters {
  double learning_rate = 1e-4;
  int batch_size = 16;
  int epochs = 60;
  LossKind loss = LossKind::CrossEntropy;
  Schedule schedule = Schedule::Constant;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  OneCycleParams one_cycle;
  /// Emit a step event every this many optimizer steps.
  int log_every = 1;
  std::optional<int> ignore_label;
  bool deterministic = true;

  void validate() const;
  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

Hyperparameters default_hyperparameters(TaskKind task);

/// Learning rate at step t of T. one_cycle: cosine ramp from a/div to a over
/// the first ceil(warmup*T) steps, then cosine anneal to a/final_div at t = T-1.
double lr_at(Schedule schedule, long t, long total_steps, double max_lr, const OneCycleParams& p = {});

/// One Adam update in place, bias-corrected for step t >= 1.
template <typename Derived>
void adam_update(Eigen::ArrayBase<Derived>& theta, const Eigen::ArrayBase<Derived>& grad,
                 Eigen::ArrayBase<Derived>& m, Eigen::ArrayBase<Derived>& v, double lr, double beta1,
                 double beta2, double eps, long t) {
  using S = typename Derived::Scalar;
  m = S(beta1) * m + S(1 - beta1) * grad;
  v = S(beta2) * v + S(1 - beta2) * grad.square();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  theta -= S(lr) * (m / S(c1)) / ((v / S(c2)).sqrt() + S(eps));
}

/// Adam over a module's trainable parameters.
template <typename T>
class Adam {
 public:
  Adam(nn::ParameterList<T> params, double beta1, double beta2, double eps);

  /// Throws NumericError on a non-finite gradient, before touching weights.
  void step(double lr);

  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }
  std::vector<nn::Tensor<T>>& first_moments() { return m_; }
  std::vector<nn::Tensor<T>>& second_moments() { return v_; }

 private:
  nn::ParameterList<T> params_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<nn::Tensor<T>> m_, v_;
};

}  // namespace spectrai::train
