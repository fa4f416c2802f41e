#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace attnx {

using shape_t = std::vector<int>;

inline std::size_t numel_of(const shape_t& s) {
    std::size_t n = 1;
    for (int e : s) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

inline std::string shape_str(const shape_t& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
}

// Thread-local switch disabling graph recording (inference / oracle code).
inline int& no_grad_depth() {
    thread_local int depth = 0;
    return depth;
}

struct no_grad_guard {
    no_grad_guard() { ++no_grad_depth(); }
    ~no_grad_guard() { --no_grad_depth(); }
    no_grad_guard(const no_grad_guard&) = delete;
    no_grad_guard& operator=(const no_grad_guard&) = delete;
};

inline bool grad_enabled() { return no_grad_depth() == 0; }

template <class T>
struct tensor_node {
    shape_t shape;
    std::vector<T> value;
    std::vector<T> grad;  // sized lazily during backward
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<tensor_node>> parents;
    std::function<void()> backprop;  // accumulates into parents' grad

    std::vector<T>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad;
    }
    bool needs_grad() const { return requires_grad || static_cast<bool>(backprop); }
};

// Value-semantics handle over a shared autodiff node. Copies alias storage.
template <class T>
class tensor {
public:
    using node_t = tensor_node<T>;

    tensor() : n_(std::make_shared<node_t>()) { n_->shape = {1}; n_->value = {T(0)}; }

    explicit tensor(shape_t shape, T fill = T(0)) : n_(std::make_shared<node_t>()) {
        n_->shape = std::move(shape);
        n_->value.assign(numel_of(n_->shape), fill);
    }

    static tensor from_data(shape_t shape, std::vector<T> data) {
        tensor t;
        std::size_t n = numel_of(shape);
        if (data.size() != n)
            throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(data);
        return t;
    }

    static tensor scalar(T v) { return from_data({1}, {v}); }

    const shape_t& shape() const { return n_->shape; }
    std::size_t numel() const { return n_->value.size(); }
    std::vector<T>& data() { return n_->value; }
    const std::vector<T>& data() const { return n_->value; }

    T item() const {
        if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape()));
        return n_->value[0];
    }

    int dim(std::size_t i) const { return n_->shape.at(i); }
    std::size_t rank() const { return n_->shape.size(); }

    // NCHW accessor for rank-4 tensors.
    T& at(int n, int c, int h, int w) {
        const auto& s = n_->shape;
        return n_->value[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
    }
    T at(int n, int c, int h, int w) const {
        const auto& s = n_->shape;
        return n_->value[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
    }

    bool requires_grad() const { return n_->requires_grad; }
    tensor& set_requires_grad(bool f) {
        n_->requires_grad = f;
        return *this;
    }

    bool has_grad() const { return !n_->grad.empty(); }
    std::vector<T>& grad() { return n_->grad_buffer(); }
    const std::vector<T>& grad() const {
        if (n_->grad.empty()) throw std::logic_error("grad accessed before backward");
        return n_->grad;
    }
    void zero_grad() { n_->grad.clear(); }

    bool finite() const {
        for (T v : n_->value)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
    void check_finite(const char* where) const {
        if (!finite()) throw std::runtime_error(std::string("non-finite values in ") + where);
    }

    // Fresh leaf sharing no graph history; copies values.
    tensor detach() const {
        tensor out;
        out.n_->shape = n_->shape;
        out.n_->value = n_->value;
        return out;
    }

    tensor clone() const {
        tensor out = detach();
        out.n_->requires_grad = n_->requires_grad;
        return out;
    }

    std::shared_ptr<node_t>& node() { return n_; }
    const std::shared_ptr<node_t>& node() const { return n_; }

    bool same_storage(const tensor& o) const { return n_ == o.n_; }

private:
    std::shared_ptr<node_t> n_;
};

namespace detail {

template <class T>
inline void topo_sort(const std::shared_ptr<tensor_node<T>>& root,
                      std::vector<std::shared_ptr<tensor_node<T>>>& order) {
    // Iterative postorder: node appears after all of its parents. The order
    // list keeps shared ownership alive while the sweep releases graph edges.
    std::unordered_set<tensor_node<T>*> seen;
    std::vector<std::pair<std::shared_ptr<tensor_node<T>>, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto node = stack.back().first;
        auto& idx = stack.back().second;
        if (idx < node->parents.size()) {
            const auto& p = node->parents[idx++];
            if (p->needs_grad() && seen.insert(p.get()).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. The graph is single-use: nodes are
// released as they are processed and a second call on the same root throws.
template <class T>
void backward(tensor<T>& loss) {
    auto* root = loss.node().get();
    if (loss.numel() != 1)
        throw std::logic_error("backward requires a scalar loss, got " + shape_str(loss.shape()));
    if (root->consumed)
        throw std::logic_error("backward called twice on a consumed graph");
    if (!root->needs_grad()) {
        root->consumed = true;
        return;  // loss does not depend on any parameter
    }

    std::vector<std::shared_ptr<tensor_node<T>>> order;
    detail::topo_sort(loss.node(), order);

    root->grad_buffer()[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        tensor_node<T>* node = it->get();
        if (node->backprop) {
            node->backprop();
            node->backprop = nullptr;
            node->parents.clear();
            node->consumed = true;
            if (!node->requires_grad) node->grad.clear();
        }
    }
    root->consumed = true;
}

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distribution transforms below are hand-rolled because std:: distributions
// are implementation-defined.
class rng {
public:
    explicit rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    double uniform() {  // [0,1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds, rejection-free enough for small ranges
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double truncated_normal(double stddev, double bound_sigmas = 2.0) {
        double z = normal();
        while (std::abs(z) > bound_sigmas) z = normal();
        return z * stddev;
    }

    template <class V>
    void shuffle(std::vector<V>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<std::size_t>(gen_() % i)]);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << gen_;
        if (have_spare_) {
            std::uint64_t bits;
            std::memcpy(&bits, &spare_, 8);
            os << " 1 " << bits;
        } else {
            os << " 0";
        }
        return os.str();
    }

    static rng deserialize(const std::string& s) {
        rng r;
        std::istringstream is(s);
        is >> r.gen_;
        int spare_flag = 0;
        is >> spare_flag;
        if (spare_flag) {
            std::uint64_t bits = 0;
            is >> bits;
            std::memcpy(&r.spare_, &bits, 8);
            r.have_spare_ = true;
        }
        if (!is) throw std::runtime_error("corrupt rng state string");
        return r;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace attnx
