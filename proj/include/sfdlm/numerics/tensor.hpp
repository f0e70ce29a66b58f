#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sfdlm::numerics {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Storage behind a Tensor handle. Gradients are allocated lazily.
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::size_t node_id = kNoNode;

    /// Zero-filled gradient buffer, allocated on first use.
    std::span<double> grad_buffer();
};

/// Shared handle to a dense row-major array of doubles.
///
/// Copies of a Tensor alias the same storage, so a parameter captured by the
/// tape and the parameter held by a model are the same object.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    double item() const;
    double at(std::size_t flat) const { return impl_->data.at(flat); }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool value) { impl_->requires_grad = value; }
    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const { return impl_->grad; }
    void zero_grad() { impl_->grad.clear(); }

    std::size_t node_id() const { return impl_->node_id; }

    /// Copy of the values with no gradient tracking.
    Tensor detach() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<TensorImpl> impl_;
};

/// Define-by-run record of differentiable operations.
///
/// Operations append themselves while a Tape is active on the calling thread
/// (see TapeScope). Entries are stored in execution order, which is a valid
/// topological order; backward() replays them in reverse.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers `output` as produced from `inputs`. `backward` reads the output
    /// gradient and accumulates into the inputs' gradients.
    void record(std::vector<std::shared_ptr<TensorImpl>> inputs, const Tensor& output, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor that
    /// requires a gradient. Gradients accumulate into existing buffers.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    void clear();

    /// Input node ids of the entry that produced `node_id`.
    std::vector<std::size_t> inputs_of(std::size_t node_id) const;

    /// Tape installed on this thread, or nullptr (no recording).
    static Tape* active();

private:
    friend class TapeScope;
    friend class NoGradScope;

    struct Entry {
        std::vector<std::shared_ptr<TensorImpl>> inputs;
        std::shared_ptr<TensorImpl> output;
        BackwardFn backward;
    };

    std::vector<Entry> entries_;
};

/// Installs a tape as the active one for the current thread; restores the
/// previous tape on destruction.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Suspends recording on the current thread (inference and finite differences).
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

/// True when an op with these inputs must be recorded.
bool needs_recording(std::initializer_list<const Tensor*> inputs);

/// backward() on the active tape.
void backward(const Tensor& loss);

}  // namespace sfdlm::numerics
