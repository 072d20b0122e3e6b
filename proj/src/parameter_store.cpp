#include <cmath>

#include "stroketok/error.hpp"
#include "stroketok/tensor.hpp"

namespace stroketok::tensor {

Tensor& ParameterStore::add(const std::string& name, Tensor value, bool frozen) {
  if (contains(name)) throw Error(ErrorKind::Config, "duplicate parameter '" + name + "'");
  value.set_requires_grad(!frozen);
  Entry e;
  e.m.assign(value.numel(), 0.0);
  e.v.assign(value.numel(), 0.0);
  e.tensor = std::move(value);
  e.frozen = frozen;
  index_[name] = entries_.size();
  names_.push_back(name);
  entries_.push_back(std::move(e));
  return entries_.back().tensor;
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::Config, "unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::Config, "unknown parameter '" + name + "'");
  return entries_[it->second];
}

Tensor& ParameterStore::get(const std::string& name) { return entry(name).tensor; }
const Tensor& ParameterStore::get(const std::string& name) const { return entry(name).tensor; }
bool ParameterStore::frozen(const std::string& name) const { return entry(name).frozen; }

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::step(double lr, const AdamOptions& options) {
  bool any = false;
  for (auto& e : entries_) {
    if (e.frozen || !e.tensor.has_grad()) continue;
    any = true;
    ++e.steps;
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(e.steps));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(e.steps));
    auto w = e.tensor.mutable_data();
    auto g = e.tensor.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      e.m[i] = options.beta1 * e.m[i] + (1.0 - options.beta1) * g[i];
      e.v[i] = options.beta2 * e.v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double mh = e.m[i] / c1;
      const double vh = e.v[i] / c2;
      w[i] -= lr * mh / (std::sqrt(vh) + options.epsilon);
    }
  }
  if (!any) throw Error(ErrorKind::NoGradient, "optimizer step with no gradients");
  zero_grad();
}

void ParameterStore::reset_moments(const std::string& name, std::size_t first, std::size_t count) {
  Entry& e = entry(name);
  if (e.tensor.rank() != 2 || first + count > e.tensor.dim(0)) {
    throw Error(ErrorKind::ShapeMismatch, "reset_moments: rows out of range for '" + name + "'");
  }
  const std::size_t width = e.tensor.dim(1);
  std::fill(e.m.begin() + static_cast<std::ptrdiff_t>(first * width),
            e.m.begin() + static_cast<std::ptrdiff_t>((first + count) * width), 0.0);
  std::fill(e.v.begin() + static_cast<std::ptrdiff_t>(first * width),
            e.v.begin() + static_cast<std::ptrdiff_t>((first + count) * width), 0.0);
}

}  // namespace stroketok::tensor
