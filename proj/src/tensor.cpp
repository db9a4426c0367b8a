#include "triq/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "triq/error.hpp"

namespace triq {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_to_string(shape));
  }
  impl_->data.assign(shape_numel(shape), 0.0);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return Tensor(std::move(shape), requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::data_mut() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!impl_) throw ContractError("use of undefined tensor");
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->grad;
}

std::span<double> Tensor::grad_mut() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  if (!impl_) return Tensor();
  return Tensor(impl_->shape, impl_->data, false);
}

void GradTape::record(const Tensor& output, BackwardFn fn) {
  entries_.push_back(Entry{output, std::move(fn)});
}

void GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  std::size_t last = entries_.size();
  for (std::size_t i = entries_.size(); i-- > 0;) {
    if (entries_[i].output.same_storage(loss)) {
      last = i;
      break;
    }
  }
  if (last == entries_.size()) {
    throw ContractError("loss was not computed on this tape");
  }
  for (std::size_t i = 0; i <= last; ++i) entries_[i].output.zero_grad();
  Tensor seed = loss;
  seed.grad_mut()[0] = 1.0;
  for (std::size_t i = last + 1; i-- > 0;) entries_[i].fn();
}

void GradTape::clear() { entries_.clear(); }

}  // namespace triq
