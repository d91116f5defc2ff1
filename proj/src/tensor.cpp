#include "moxgate/tensor.hpp"

#include <cmath>
#include <sstream>

#include "moxgate/errors.hpp"

namespace moxgate {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

thread_local std::vector<Tape*> g_tape_stack;

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("Tensor: zero-sized dimension");
    }
    if (shape_numel(shape) != data.size()) {
        std::ostringstream msg;
        msg << "Tensor: shape product " << shape_numel(shape)
            << " does not match data length " << data.size();
        throw ShapeError(msg.str());
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                      bool requires_grad) {
    return Tensor({rows, cols}, std::move(data), requires_grad);
}

std::string Tensor::shape_str() const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < impl_->shape.size(); ++i) {
        if (i) out << " x ";
        out << impl_->shape[i];
    }
    out << ']';
    return out.str();
}

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->data.size(), 0.0);
}

double Tensor::value() const {
    if (numel() != 1) {
        throw ShapeError("Tensor::value: expected a scalar, got shape " + shape_str());
    }
    return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    if (rank() != 2) throw ShapeError("Tensor::at: expected rank 2, got " + shape_str());
    return impl_->data[i * dim(1) + j];
}

Tensor Tensor::clone() const {
    Tensor copy(impl_->shape, impl_->data, impl_->requires_grad);
    copy.impl_->grad = impl_->grad;
    return copy;
}

bool Tensor::all_finite() const {
    for (double v : impl_->data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::vector<double>& ensure_grad(TensorImpl& impl) {
    if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
    return impl.grad;
}

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) {
        g_tape_stack.pop_back();
    }
}

Tape* Tape::active() {
    return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void Tape::record(const Tensor& output, std::function<void()> backward) {
    nodes_.push_back(Node{output.impl(), std::move(backward)});
    produced_.insert(output.impl().get());
}

bool Tape::produced(const Tensor& t) const {
    return produced_.contains(t.impl().get());
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("Tape::backward: loss must be scalar, got shape " +
                         loss.shape_str());
    }
    if (!produced(loss)) {
        throw ValueError("Tape::backward: loss was not produced by this tape");
    }
    ensure_grad(*loss.impl())[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        it->backward();
    }
}

}  // namespace moxgate
