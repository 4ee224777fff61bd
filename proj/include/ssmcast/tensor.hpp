#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace ssmcast {

#ifdef SSMCAST_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // stays empty until a gradient is accumulated
  bool requires_grad = false;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), Real(0));
  }
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Value-semantic handle onto a shared buffer. Copying a Tensor aliases the
// underlying storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, Real fill = Real(0));
  Tensor(std::vector<std::size_t> shape, std::vector<Real> data);
  static Tensor scalar(Real v) { return Tensor({1}, {v}); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
  std::size_t size() const { return impl_->data.size(); }

  Real* data() { return impl_->data.data(); }
  const Real* data() const { return impl_->data.data(); }
  std::vector<Real>& vec() { return impl_->data; }
  const std::vector<Real>& vec() const { return impl_->data; }

  // Scalar extraction; requires size() == 1.
  Real item() const;

  Real& at(std::initializer_list<std::size_t> idx);
  Real at(std::initializer_list<std::size_t> idx) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  Real* grad() {
    impl_->ensure_grad();
    return impl_->grad.data();
  }
  const std::vector<Real>& grad_vec() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Real(0));
  }

  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of backward closures for one forward pass (define-by-run).
// Appending order is a topological order of the graph, so replaying the list
// in reverse visits every node after all of its consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(root)/d(root) = 1 and replays the tape in reverse. root must be
  // a scalar produced while this tape was active.
  void backward(const Tensor& root);

  static Tape* active();

 private:
  std::vector<std::function<void()>> nodes_;
  friend class TapeScope;
};

// Installs a tape as the active one for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Disables recording while alive (nestable).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;
};

bool grad_enabled();

// True when a tape is active, recording is enabled, and some input wants a
// gradient. Ops use this to decide whether to record a backward closure.
inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled() || Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

}  // namespace ssmcast
