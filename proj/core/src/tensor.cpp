#include "fusenet/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fusenet {

namespace detail {

std::int64_t shape_size(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

void seal(std::vector<double>& values, DType dtype, const char* op) {
    if (dtype == DType::f32) {
        for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            std::ostringstream msg;
            msg << op << ": non-finite value at flat index " << i;
            throw NumericError(msg.str());
        }
    }
}

Tensor make_result(std::vector<std::int64_t> shape, std::vector<double> values,
                   DType dtype, const char* op,
                   const std::vector<const Tensor*>& inputs, Tape::PullFn pull) {
    seal(values, dtype, op);
    Tensor out(std::move(shape), std::move(values), dtype);
    Tape* tape = Tape::active();
    if (!tape) return out;
    bool any_tracked = false;
    std::vector<int> ids(inputs.size(), -1);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i]->tracked() && inputs[i]->tape_id() == tape->id()) {
            ids[i] = inputs[i]->node();
            any_tracked = true;
        }
    }
    if (!any_tracked) return out;
    TensorAccess::bind(out, tape->record(std::move(ids), out.size(), std::move(pull)), tape->id());
    return out;
}

} // namespace detail

// --- Tensor ------------------------------------------------------------------

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> values, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
    for (std::size_t a = 0; a < shape_.size(); ++a) {
        if (shape_[a] <= 0) {
            throw DimensionError("Tensor: non-positive extent " + std::to_string(shape_[a]) +
                                 " at axis " + std::to_string(a));
        }
    }
    size_ = detail::shape_size(shape_);
    if (static_cast<std::int64_t>(values.size()) != size_) {
        throw DimensionError("Tensor: " + std::to_string(values.size()) +
                             " values for shape of size " + std::to_string(size_));
    }
    if (dtype_ == DType::f32) {
        for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape, DType dtype) {
    auto n = detail::shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), dtype);
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value, DType dtype) {
    auto n = detail::shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), dtype);
}

Tensor Tensor::scalar(double value, DType dtype) {
    return Tensor({1}, {value}, dtype);
}

std::int64_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("Tensor::extent: axis " + std::to_string(axis) + " out of rank " +
                             std::to_string(shape_.size()));
    }
    return shape_[axis];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    if (idx.size() != shape_.size()) {
        throw DimensionError("Tensor::at: got " + std::to_string(idx.size()) +
                             " indices for rank " + std::to_string(shape_.size()));
    }
    std::int64_t flat = 0;
    std::size_t a = 0;
    for (auto i : idx) {
        if (i < 0 || i >= shape_[a]) {
            throw DimensionError("Tensor::at: index " + std::to_string(i) +
                                 " out of extent " + std::to_string(shape_[a]) +
                                 " at axis " + std::to_string(a));
        }
        flat = flat * shape_[a] + i;
        ++a;
    }
    return (*data_)[static_cast<std::size_t>(flat)];
}

double Tensor::item() const {
    if (size_ != 1) {
        throw ContractError("Tensor::item: size " + std::to_string(size_) + " != 1");
    }
    return (*data_)[0];
}

Tensor Tensor::detach() const {
    Tensor t = *this;
    t.node_ = -1;
    t.tape_id_ = 0;
    t.grad_.reset();
    return t;
}

Tensor Tensor::to(DType dtype) const {
    if (dtype == dtype_) return detach();
    return Tensor(shape_, *data_, dtype);
}

Tensor Tensor::grad() const {
    if (!has_grad()) {
        throw ContractError("Tensor::grad: no gradient present (run Tape::backward first)");
    }
    return Tensor(shape_, *grad_, DType::f64);
}

// --- Tape --------------------------------------------------------------------

namespace {
thread_local Tape* t_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_counter{1};
} // namespace

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {
    prev_ = t_active_tape;
    t_active_tape = this;
}

Tape::~Tape() {
    t_active_tape = prev_;
}

Tape* Tape::active() { return t_active_tape; }

Tensor Tape::watch(const Tensor& t) {
    if (t.empty()) throw ContractError("Tape::watch: empty tensor");
    auto it = leaves_.find(t.buffer_id());
    if (it != leaves_.end()) {
        Tensor w = t;
        w.node_ = it->second;
        w.tape_id_ = id_;
        w.grad_ = nodes_[static_cast<std::size_t>(it->second)].leaf_slot;
        return w;
    }
    Node node;
    node.size = t.size();
    node.leaf_slot = std::make_shared<std::vector<double>>();
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(node));
    adjoints_.emplace_back();
    leaves_.emplace(t.buffer_id(), idx);
    Tensor w = t;
    w.node_ = idx;
    w.tape_id_ = id_;
    w.grad_ = nodes_.back().leaf_slot;
    return w;
}

int Tape::record(std::vector<int> inputs, std::int64_t out_size, PullFn pull) {
    Node node;
    node.inputs = std::move(inputs);
    node.size = out_size;
    node.pull = std::move(pull);
    nodes_.push_back(std::move(node));
    adjoints_.emplace_back();
    return static_cast<int>(nodes_.size() - 1);
}

std::vector<double>& Tape::adjoint(int node) {
    auto& buf = adjoints_[static_cast<std::size_t>(node)];
    if (buf.empty()) {
        buf.assign(static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].size), 0.0);
    }
    return buf;
}

bool Tape::has_adjoint(int node) const {
    return !adjoints_[static_cast<std::size_t>(node)].empty();
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw ContractError("Tape::backward: loss must be scalar, got size " +
                            std::to_string(loss.size()));
    }
    if (!loss.tracked() || loss.tape_id() != id_) {
        throw ContractError("Tape::backward: loss is not recorded on this tape");
    }
    if (ran_backward_) {
        throw ContractError("Tape::backward: backward already ran on this tape");
    }
    ran_backward_ = true;
    adjoint(loss.node())[0] = 1.0;
    // Creation order is a topological order; one reverse sweep visits each
    // node exactly once.
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        auto& node = nodes_[static_cast<std::size_t>(i)];
        if (!node.pull) continue;
        if (!has_adjoint(i)) continue;
        node.pull(adjoints_[static_cast<std::size_t>(i)], *this, node.inputs);
    }
    for (auto& node : nodes_) {
        if (!node.leaf_slot) continue;
        const std::size_t idx = static_cast<std::size_t>(&node - nodes_.data());
        if (has_adjoint(static_cast<int>(idx))) {
            *node.leaf_slot = adjoints_[idx];
        } else {
            node.leaf_slot->assign(static_cast<std::size_t>(node.size), 0.0);
        }
    }
}

Tensor Tape::grad(const Tensor& t) const {
    int node = -1;
    if (t.tracked() && t.tape_id() == id_) {
        node = t.node();
    } else {
        auto it = leaves_.find(t.buffer_id());
        if (it != leaves_.end()) node = it->second;
    }
    if (node < 0) {
        throw ContractError("Tape::grad: tensor is not tracked on this tape");
    }
    if (!ran_backward_) {
        throw ContractError("Tape::grad: backward has not run");
    }
    const auto& buf = adjoints_[static_cast<std::size_t>(node)];
    if (buf.empty()) return Tensor::zeros(t.shape());
    return Tensor(t.shape(), buf);
}

// --- serialization -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'F', 'T', '1'};

void put_u64le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("tensor stream: truncated header");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

} // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kMagic, 4);
    const unsigned char dtype = static_cast<unsigned char>(t.dtype());
    const unsigned char rank = static_cast<unsigned char>(t.rank());
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(rank));
    for (auto e : t.shape()) put_u64le(out, static_cast<std::uint64_t>(e));
    const auto& vals = t.values();
    if (t.dtype() == DType::f32) {
        std::vector<float> buf(vals.begin(), vals.end());
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * 4));
    } else {
        static_assert(sizeof(double) == 8);
        out.write(reinterpret_cast<const char*>(vals.data()),
                  static_cast<std::streamsize>(vals.size() * 8));
    }
    if (!out) throw DataError("tensor stream: write failed");
}

Tensor read_tensor(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("tensor stream: bad magic (expected EFT1)");
    }
    const int dtype_code = in.get();
    const int rank = in.get();
    if (!in || (dtype_code != 1 && dtype_code != 2) || rank < 0 || rank > 8) {
        throw DataError("tensor stream: bad dtype/rank header");
    }
    std::vector<std::int64_t> shape(static_cast<std::size_t>(rank));
    for (auto& e : shape) {
        e = static_cast<std::int64_t>(get_u64le(in));
        if (e <= 0) throw DataError("tensor stream: non-positive extent");
    }
    const std::int64_t n = detail::shape_size(shape);
    std::vector<double> vals(static_cast<std::size_t>(n));
    if (dtype_code == 1) {
        std::vector<float> buf(static_cast<std::size_t>(n));
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
        if (!in) throw DataError("tensor stream: truncated f32 payload");
        for (std::size_t i = 0; i < buf.size(); ++i) vals[i] = static_cast<double>(buf[i]);
        return Tensor(std::move(shape), std::move(vals), DType::f32);
    }
    in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(n * 8));
    if (!in) throw DataError("tensor stream: truncated f64 payload");
    return Tensor(std::move(shape), std::move(vals), DType::f64);
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    write_tensor(out, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for read: " + path);
    return read_tensor(in);
}

} // namespace fusenet
