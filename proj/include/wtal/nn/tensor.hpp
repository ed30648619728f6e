#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace wtal::nn {

using Shape = std::vector<std::size_t>;

// Every buffer starts on a 64-byte boundary so vectorised reductions split
// the same way wherever the allocator places the data, which keeps results
// bitwise reproducible within a process.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the dynamic gradient graph. Non-leaf nodes keep their inputs
// alive until the output is dropped, which is what resets the graph between
// training steps.
struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  Buffer& ensure_grad();
};

}  // namespace detail

// Dense row-major tensor of doubles. Copies share the underlying node, so a
// Tensor behaves like a handle; use clone() or detach() for an independent
// value.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, const std::vector<double>& data, bool requires_grad = false);
  static Tensor from(Shape shape, Buffer data, bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<double> data, bool requires_grad = false) {
    return from(std::move(shape), Buffer(data), requires_grad);
  }
  static Tensor scalar(double value, bool requires_grad = false);
  // 2-D convenience: rows of equal length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);
  static Tensor vector(const std::vector<double>& values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  // rows()/cols() treat a 1-D tensor as a column vector.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Direct write access; only meaningful for leaves (parameter updates,
  // gradient checks).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  // Zero-filled span of numel() when no gradient has been accumulated.
  std::span<const double> grad() const;
  void zero_grad();

  // A new leaf holding a copy of the values, outside any graph.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const { return Tensor::from(shape(), Buffer(data().begin(), data().end()), requires_grad); }
  // Same data, different shape (graph-aware).
  Tensor reshape(Shape shape) const;

  // Reverse pass from a single-element tensor. Intermediate gradients are
  // reset on every call; leaf gradients accumulate.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Builds the output node of an operation. When no input requires a gradient
// the backward closure and the input edges are dropped.
Tensor make_result(const char* op, Shape shape, Buffer value,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward);

void backward(const Tensor& loss);

}  // namespace wtal::nn
