#include "sfdlm/numerics/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace sfdlm::numerics {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto extent : shape) n *= extent;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

std::span<double> TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

Tensor Tensor::detach() const { return from(shape(), impl_->data, false); }

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs, const Tensor& output, BackwardFn backward) {
    for (const auto& in : inputs) {
        if (in->node_id != kNoNode && in->node_id >= entries_.size()) {
            throw std::logic_error("Tape::record: input recorded on a different tape");
        }
    }
    output.impl()->node_id = entries_.size();
    output.impl()->requires_grad = true;
    entries_.push_back(Entry{std::move(inputs), output.impl(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar tensor");
    }
    const std::size_t start = loss.node_id();
    if (start == kNoNode || start >= entries_.size() || entries_[start].output != loss.impl()) {
        throw std::invalid_argument("backward: loss is not on this tape");
    }
    loss.impl()->grad_buffer()[0] += 1.0;
    for (std::size_t i = start + 1; i-- > 0;) {
        auto& entry = entries_[i];
        if (entry.output->grad.empty()) continue;
        entry.backward();
    }
}

void Tape::clear() {
    for (auto& entry : entries_) entry.output->node_id = kNoNode;
    entries_.clear();
}

std::vector<std::size_t> Tape::inputs_of(std::size_t node_id) const {
    std::vector<std::size_t> ids;
    for (const auto& in : entries_.at(node_id).inputs) ids.push_back(in->node_id);
    return ids;
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

bool needs_recording(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr) return false;
    for (const auto* t : inputs) {
        if (t != nullptr && t->defined() && t->requires_grad()) return true;
    }
    return false;
}

void backward(const Tensor& loss) {
    if (g_active_tape == nullptr) throw std::logic_error("backward: no active tape");
    g_active_tape->backward(loss);
}

}  // namespace sfdlm::numerics
