#include "fairpfn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fairpfn {

double lr_at(i64 step, const ScheduleConfig& cfg) {
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  if (cfg.total_steps < 1 || cfg.base_lr <= 0.0 || cfg.floor_lr < 0.0 ||
      cfg.warmup_frac < 0.0 || cfg.warmup_frac >= 1.0)
    throw std::invalid_argument("lr_at: bad schedule config");
  const i64 warmup = static_cast<i64>(cfg.warmup_frac * static_cast<double>(cfg.total_steps));
  if (step < warmup)
    return cfg.base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const i64 span = cfg.total_steps - warmup;
  if (span <= 1) return step >= cfg.total_steps ? cfg.floor_lr : cfg.base_lr;
  double progress = static_cast<double>(step - warmup) / static_cast<double>(span - 1);
  if (progress > 1.0) progress = 1.0;
  const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
  return cfg.floor_lr + (cfg.base_lr - cfg.floor_lr) * cosine;
}

AdamState::AdamState(const std::vector<Tensor*>& params, ScheduleConfig schedule, AdamConfig adam)
    : schedule_(schedule), adam_(adam) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.push_back(Tensor::zeros(p->shape()));
    v_.push_back(Tensor::zeros(p->shape()));
  }
}

bool AdamState::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("adam step: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(m_[i]) || !grads[i]->same_shape(m_[i]))
      throw std::invalid_argument("adam step: shape mismatch at parameter " + std::to_string(i));
    if (!grads[i]->all_finite()) return false;
  }
  const double lr = lr_at(step_, schedule_);
  last_lr_ = lr;
  const i64 t = step_ + 1;
  const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (i64 j = 0; j < p.size(); ++j) {
      m[j] = adam_.beta1 * m[j] + (1.0 - adam_.beta1) * g[j];
      v[j] = adam_.beta2 * v[j] + (1.0 - adam_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + adam_.eps);
    }
  }
  step_ = t;
  return true;
}

}  // namespace fairpfn
