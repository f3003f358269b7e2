#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusenet/errors.hpp"

namespace fusenet {

/// Storage precision. Arithmetic always runs in double; f32 tensors round
/// every stored value through float so runs are reproducible independent of
/// how intermediates were fused.
enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

inline DType promote(DType a, DType b) {
    return (a == DType::f64 || b == DType::f64) ? DType::f64 : DType::f32;
}

class Tape;
namespace detail {
struct TensorAccess;
}

/// Dense row-major n-d array. Immutable once built; copies share storage.
/// A tensor may carry a node id binding it to the tape that produced it.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::int64_t> shape, std::vector<double> values,
           DType dtype = DType::f64);

    static Tensor zeros(std::vector<std::int64_t> shape, DType dtype = DType::f64);
    static Tensor full(std::vector<std::int64_t> shape, double value,
                       DType dtype = DType::f64);
    static Tensor scalar(double value, DType dtype = DType::f64);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t extent(std::size_t axis) const;
    std::size_t rank() const { return shape_.size(); }
    std::int64_t size() const { return size_; }
    DType dtype() const { return dtype_; }
    bool empty() const { return !data_; }

    const std::vector<double>& values() const { return *data_; }
    double operator[](std::int64_t flat) const { return (*data_)[static_cast<std::size_t>(flat)]; }
    double at(std::initializer_list<std::int64_t> idx) const;
    /// Value of a size-1 tensor.
    double item() const;

    /// True when bound to a live tape node.
    bool tracked() const { return node_ >= 0; }
    int node() const { return node_; }
    std::uint64_t tape_id() const { return tape_id_; }

    /// Same values, no tape binding and no gradient slot.
    Tensor detach() const;
    /// Same values re-rounded to the requested precision.
    Tensor to(DType dtype) const;

    /// Gradient of a watched leaf, available after Tape::backward.
    bool has_grad() const { return grad_ && !grad_->empty(); }
    Tensor grad() const;

    /// Stable identity of the underlying buffer (used to match parameters
    /// against their watched copies).
    const void* buffer_id() const { return data_.get(); }

    /// Shared handle to the value buffer (saved by backward closures).
    std::shared_ptr<const std::vector<double>> storage() const { return data_; }

private:
    friend class Tape;
    friend struct detail::TensorAccess;
    std::vector<std::int64_t> shape_;
    std::shared_ptr<const std::vector<double>> data_;
    std::shared_ptr<std::vector<double>> grad_;
    std::int64_t size_ = 0;
    DType dtype_ = DType::f64;
    int node_ = -1;
    std::uint64_t tape_id_ = 0;
};

/// Reverse-mode tape. Construction pushes the tape as the active one for the
/// current thread; destruction pops it. Ops record onto the innermost active
/// tape whenever at least one operand is tracked on it. A tape must stay on
/// the thread that created it; independent tapes on other threads are fine.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();
    std::uint64_t id() const { return id_; }

    /// Register a leaf for gradient tracking. Watching the same buffer twice
    /// returns the same node, so fan-out accumulates additively.
    Tensor watch(const Tensor& t);

    /// Run reverse-mode accumulation from a scalar loss recorded on this
    /// tape. Every watched leaf ends up with a gradient (zero if the leaf
    /// did not participate).
    void backward(const Tensor& loss);

    /// Gradient for a tracked tensor or a watched leaf buffer. Zeros if the
    /// node never received any adjoint.
    Tensor grad(const Tensor& t) const;

    std::size_t node_count() const { return nodes_.size(); }

    // --- op-recording interface -------------------------------------------
    /// Backward closure: receives the node's accumulated adjoint and the node
    /// ids of the op's inputs (-1 for untracked operands) to accumulate into.
    using PullFn = std::function<void(const std::vector<double>& out_grad, Tape&,
                                      const std::vector<int>& inputs)>;

    /// Record an op node; returns its id. `inputs` may contain -1 entries for
    /// untracked operands.
    int record(std::vector<int> inputs, std::int64_t out_size, PullFn pull);

    /// Adjoint buffer for a node, allocated on first touch.
    std::vector<double>& adjoint(int node);
    bool has_adjoint(int node) const;

private:
    struct Node {
        std::vector<int> inputs;
        std::int64_t size = 0;
        PullFn pull; // empty for leaves
        std::shared_ptr<std::vector<double>> leaf_slot;
    };

    std::uint64_t id_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> adjoints_;
    std::unordered_map<const void*, int> leaves_;
    Tape* prev_ = nullptr;
    bool ran_backward_ = false;
};

namespace detail {
struct TensorAccess {
    static void bind(Tensor& t, int node, std::uint64_t tape_id) {
        t.node_ = node;
        t.tape_id_ = tape_id;
    }
};

std::int64_t shape_size(const std::vector<std::int64_t>& shape);
/// Round (f32) and verify finiteness of freshly computed values.
void seal(std::vector<double>& values, DType dtype, const char* op);
/// Build an op result and record it on the active tape when any input is
/// tracked. `inputs` supplies the operand node bindings.
Tensor make_result(std::vector<std::int64_t> shape, std::vector<double> values,
                   DType dtype, const char* op,
                   const std::vector<const Tensor*>& inputs, Tape::PullFn pull);
} // namespace detail

// --- serialization ----------------------------------------------------------
// Binary layout: magic "EFT1", u8 dtype code (1=f32, 2=f64), u8 rank,
// rank x u64 little-endian extents, then the row-major payload in the
// dtype's little-endian width.

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

} // namespace fusenet
