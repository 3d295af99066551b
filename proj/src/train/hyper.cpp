#include "spectrai/train/hyper.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace spectrai::train {

std::string_view to_string(Schedule s) { return s == Schedule::Constant ? "constant" : "one_cycle"; }

Schedule parse_schedule(std::string_view text) {
  if (text == "constant") return Schedule::Constant;
  if (text == "one_cycle") return Schedule::OneCycle;
  throw ConfigError("unknown schedule: " + std::string(text));
}

void Hyperparameters::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  const auto& p = one_cycle;
  if (!(p.warmup_fraction > 0 && p.warmup_fraction < 1)) throw ConfigError("warmup_fraction must lie in (0, 1)");
  if (!(p.div_factor >= 1) || !(p.final_div_factor >= 1)) throw ConfigError("one-cycle divisors must be >= 1");
}

Hyperparameters default_hyperparameters(TaskKind task) {
  Hyperparameters h;
  h.learning_rate = 1e-4;
  switch (task) {
    case TaskKind::Segmentation:
      h.batch_size = 16;
      h.epochs = 60;
      h.loss = LossKind::CrossEntropy;
      break;
    case TaskKind::SpectrumDenoising:
      h.batch_size = 256;
      h.epochs = 500;
      h.loss = LossKind::L1;
      h.schedule = Schedule::OneCycle;
      break;
    case TaskKind::ImageDenoising:
      h.batch_size = 16;
      h.epochs = 100;
      h.loss = LossKind::L1;
      break;
    case TaskKind::SuperResolution:
      h.batch_size = 2;
      h.epochs = 500;
      h.loss = LossKind::L1;
      break;
    case TaskKind::SpectrumClassification:
    case TaskKind::ImageClassification:
      h.batch_size = 32;
      h.epochs = 100;
      h.loss = LossKind::CrossEntropy;
      break;
  }
  return h;
}

double lr_at(Schedule schedule, long t, long total, double max_lr, const OneCycleParams& p) {
  if (total <= 0) throw RangeError("total_steps must be > 0");
  if (t < 0 || t >= total) throw RangeError("step " + std::to_string(t) + " outside [0, " + std::to_string(total) + ")");
  if (schedule == Schedule::Constant) return max_lr;
  const long warm = static_cast<long>(std::ceil(p.warmup_fraction * static_cast<double>(total)));
  const double start = max_lr / p.div_factor, end = max_lr / p.final_div_factor;
  if (t <= warm) {
    const double f = warm == 0 ? 1.0 : static_cast<double>(t) / static_cast<double>(warm);
    return start + (max_lr - start) * 0.5 * (1.0 - std::cos(std::numbers::pi * f));
  }
  const double f = static_cast<double>(t - warm) / static_cast<double>(total - 1 - warm);
  return end + (max_lr - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * f));
}

template <typename T>
Adam<T>::Adam(nn::ParameterList<T> params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& entry : params)
    if (entry.second->trainable) {
      params_.push_back(entry);
      m_.emplace_back(entry.second->value.shape());
      v_.emplace_back(entry.second->value.shape());
    }
}

template <typename T>
void Adam<T>::step(double lr) {
  for (auto& [name, p] : params_)
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in " + name);
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i].second;
    auto theta = p->value.flat();
    auto g = p->grad.flat();
    auto m = m_[i].flat();
    auto v = v_[i].flat();
    adam_update(theta, g, m, v, lr, beta1_, beta2_, eps_, t_);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace spectrai::train
