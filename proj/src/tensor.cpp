#include "ssmcast/tensor.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ssmcast {

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  if (shape.empty())
    throw std::invalid_argument("tensor shape must have rank >= 1");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0)
      throw std::invalid_argument("tensor dimensions must be >= 1, got " +
                                  shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, Real fill)
    : impl_(std::make_shared<TensorImpl>()) {
  std::size_t n = checked_numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(n, fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<Real> data)
    : impl_(std::make_shared<TensorImpl>()) {
  std::size_t n = checked_numel(shape);
  if (n != data.size())
    throw std::invalid_argument("tensor data size " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Real Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item() requires a single-element tensor, got " +
                                shape_str(shape()));
  return impl_->data[0];
}

static std::size_t flat_index(const std::vector<std::size_t>& shape,
                              std::initializer_list<std::size_t> idx) {
  if (idx.size() != shape.size())
    throw std::invalid_argument("index rank mismatch for shape " +
                                shape_str(shape));
  std::size_t flat = 0, i = 0;
  for (std::size_t v : idx) {
    if (v >= shape[i])
      throw std::out_of_range("index out of range for shape " +
                              shape_str(shape));
    flat = flat * shape[i] + v;
    ++i;
  }
  return flat;
}

Real& Tensor::at(std::initializer_list<std::size_t> idx) {
  return impl_->data[flat_index(impl_->shape, idx)];
}

Real Tensor::at(std::initializer_list<std::size_t> idx) const {
  return impl_->data[flat_index(impl_->shape, idx)];
}

Tensor Tensor::clone() const {
  Tensor out(impl_->shape, impl_->data);
  out.impl_->requires_grad = impl_->requires_grad;
  return out;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local int g_no_grad_depth = 0;
}  // namespace

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& root) {
  if (root.size() != 1)
    throw std::invalid_argument("backward() requires a scalar root, got " +
                                shape_str(root.shape()));
  root.impl()->ensure_grad();
  root.impl()->grad[0] += Real(1);
  for (std::size_t i = nodes_.size(); i-- > 0;) nodes_[i]();
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) {
  g_active_tape = &tape;
}
TapeScope::~TapeScope() { g_active_tape = prev_; }

NoGradScope::NoGradScope() { ++g_no_grad_depth; }
NoGradScope::~NoGradScope() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

}  // namespace ssmcast
