#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "eev/common.hpp"

namespace eev {

// Dense NCHW tensor doubling as a node of the gradient tape, in the usual
// micrograd arrangement: outputs keep shared_ptrs to their parents and a
// closure that pushes gradients back to them. Templated on the scalar so the
// same operators run in float (inference/training) and double (grad_check).
template <typename T>
struct TensorT : std::enable_shared_from_this<TensorT<T>> {
    using Ptr = std::shared_ptr<TensorT<T>>;

    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // allocated on demand; same length as data when present
    bool requires_grad = false;

    const char* op = "leaf";
    std::vector<Ptr> parents;
    std::function<void()> backward_fn;

    TensorT() = default;
    explicit TensorT(const Shape& s) : shape(s), data(s.size(), T(0)) {}
    TensorT(const Shape& s, std::vector<T> d) : shape(s), data(std::move(d)) {
        if (data.size() != shape.size())
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape.str());
    }

    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x;
    }
    T& at(int n, int c, int y, int x) { return data[index(n, c, y, x)]; }
    T at(int n, int c, int y, int x) const { return data[index(n, c, y, x)]; }

    bool is_scalar() const { return shape.size() == 1; }
    T scalar() const {
        if (!is_scalar()) throw ShapeError("tensor " + shape.str() + " is not scalar");
        return data[0];
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
    }
};

using Tensor = TensorT<float>;
template <typename T> using TensorPtrT = std::shared_ptr<TensorT<T>>;
using TensorPtr = TensorPtrT<float>;

template <typename T>
TensorPtrT<T> make_tensor(const Shape& s) {
    return std::make_shared<TensorT<T>>(s);
}
template <typename T>
TensorPtrT<T> make_tensor(const Shape& s, std::vector<T> d) {
    return std::make_shared<TensorT<T>>(s, std::move(d));
}
template <typename T>
TensorPtrT<T> full_tensor(const Shape& s, T value) {
    auto t = std::make_shared<TensorT<T>>(s);
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}
template <typename T>
TensorPtrT<T> scalar_tensor(T value) {
    return full_tensor<T>(Shape(1, 1, 1, 1), value);
}
template <typename T>
TensorPtrT<T> randn_tensor(const Shape& s, Rng& rng, T stddev = T(1)) {
    auto t = std::make_shared<TensorT<T>>(s);
    for (auto& v : t->data) v = static_cast<T>(rng.normal()) * stddev;
    return t;
}

inline TensorPtr make_tensor_f(const Shape& s) { return make_tensor<float>(s); }

// Toggle for the NaN/Inf scan that runs after each forward operator.
namespace detail {
inline bool& finite_checks_flag() {
    static bool flag = true;
    return flag;
}
} // namespace detail

inline bool finite_checks_enabled() { return detail::finite_checks_flag(); }
inline void set_finite_checks(bool on) { detail::finite_checks_flag() = on; }

template <typename T>
void check_finite(const TensorPtrT<T>& t, const char* opname) {
    if (!finite_checks_enabled()) return;
    for (std::size_t i = 0; i < t->data.size(); ++i) {
        if (!std::isfinite(static_cast<double>(t->data[i])))
            throw NumericsError(std::string(opname) + " produced a non-finite value at flat index " +
                                std::to_string(i));
    }
}

// Ordered record of executed operators. Operators append their outputs in
// execution order, which is already topological; backward() replays the
// record once in reverse.
template <typename T>
class GradTape {
public:
    TensorPtrT<T> record(TensorPtrT<T> out, std::vector<TensorPtrT<T>> parents,
                         std::function<void()> fn, const char* opname) {
        out->op = opname;
        out->parents = std::move(parents);
        out->backward_fn = std::move(fn);
        out->requires_grad = false;
        for (const auto& p : out->parents)
            if (p->requires_grad) out->requires_grad = true;
        nodes_.push_back(out);
        membership_.insert(out.get());
        return out;
    }

    bool contains(const TensorT<T>* node) const {
        return membership_.count(node) != 0;
    }

    std::size_t size() const { return nodes_.size(); }

    // Populates .grad on every requires_grad tensor reachable from the
    // record. Each recorded operator's backward closure runs exactly once.
    void backward(const TensorPtrT<T>& loss) {
        if (!loss->is_scalar())
            throw ShapeError("backward: loss must be scalar, got " + loss->shape.str());
        if (!contains(loss.get()))
            throw Error("backward: loss tensor is not on this tape");
        for (auto& n : nodes_) n->ensure_grad();
        for (auto& n : nodes_) {
            for (auto& p : n->parents) p->ensure_grad();
        }
        loss->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if ((*it)->backward_fn) (*it)->backward_fn();
        }
    }

    void clear() {
        for (auto& n : nodes_) {
            n->parents.clear();
            n->backward_fn = nullptr;
        }
        nodes_.clear();
        membership_.clear();
    }

private:
    std::vector<TensorPtrT<T>> nodes_;
    std::unordered_set<const TensorT<T>*> membership_;
};

using Tape = GradTape<float>;

} // namespace eev
