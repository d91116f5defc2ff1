#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace moxgate {

// Dense row-major float64 storage shared by Tensor handles.
struct TensorImpl {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
};

// Value-semantics handle over shared dense storage. Copying a Tensor aliases
// the same buffer; clone() makes an independent copy. Values are immutable by
// convention once an op has produced them; only gradients accumulate.
class Tensor {
  public:
    Tensor() : impl_(std::make_shared<TensorImpl>()) {}
    Tensor(std::vector<std::size_t> shape, std::vector<double> data,
           bool requires_grad = false);

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Row-major m x n matrix from nested initializer data.
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad = false);

    const std::vector<std::size_t>& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
    std::size_t numel() const { return impl_->data.size(); }
    std::string shape_str() const;

    std::span<const double> data() const { return impl_->data; }
    std::span<double> data_mut() { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad();

    // Scalar convenience accessor; throws unless numel() == 1.
    double value() const;
    // 2-D element accessors used throughout tests and kernels.
    double at(std::size_t i, std::size_t j) const;

    Tensor clone() const;
    bool all_finite() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ensures impl->grad is allocated (zero-filled) and returns it.
std::vector<double>& ensure_grad(TensorImpl& impl);

// Define-by-run gradient tape. Constructing a Tape pushes it onto a
// thread-local stack; ops record backward rules on the innermost active tape
// whenever an input requires gradients. Nodes are appended in execution
// order, which is a topological order by construction, and backward() visits
// each node exactly once in reverse.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // Registers `output` as produced by this tape with the given backward rule.
    void record(const Tensor& output, std::function<void()> backward);

    bool produced(const Tensor& t) const;
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and propagates through all recorded nodes.
    // `loss` must be scalar and must have been produced by this tape.
    void backward(const Tensor& loss);

  private:
    struct Node {
        std::shared_ptr<TensorImpl> output;
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
    std::unordered_set<const TensorImpl*> produced_;
};

}  // namespace moxgate
