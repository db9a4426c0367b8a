#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace triq {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float64 array with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets a GradTape write gradients back into model parameters. Use clone()
/// for an independent deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> data_mut();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  /// Allocates a zero gradient on first use.
  std::span<double> grad_mut() const;
  void zero_grad() const;

  Tensor clone() const;
  /// Same values, no gradient tracking, independent storage.
  Tensor detach() const { return clone(); }

  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Ordered record of differentiable operations executed during a forward
/// pass. backward() replays the records in exact reverse order.
///
/// Leaf tensors (parameters) accumulate gradients across backward() calls
/// until zero_grad(); intermediate results are reset at the start of each
/// backward() so a second call adds exactly one more d(loss)/d(param).
class GradTape {
 public:
  using BackwardFn = std::function<void()>;

  void record(const Tensor& output, BackwardFn fn);
  void backward(const Tensor& loss);
  void clear();

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  struct Entry {
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
};

}  // namespace triq
