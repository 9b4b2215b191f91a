#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latentmark/nn/tensor.hpp"

namespace latentmark::nn {

// Define-by-run reverse-mode tape. Nodes are created in execution order; the
// backward sweep walks them in reverse, so every node only needs a closure
// that scatters its own grad into its parents.
template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily by ensure_grad()
    bool requires_grad = false;
    std::function<void()> back;
    std::vector<std::shared_ptr<Node>> parents;

    bool has_grad() const { return !grad.empty(); }
    Tensor<T>& ensure_grad() {
        if (grad.empty()) grad = Tensor<T>::zeros(value.shape());
        return grad;
    }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
class Graph {
public:
    Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        nodes_.push_back(n);
        return n;
    }

    Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

    // Wraps `value` computed from `parents`; `back` reads node->grad and
    // accumulates into parent grads. `back` is dropped when no parent needs it.
    Var<T> make(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> back) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
        n->parents = std::move(parents);
        if (n->requires_grad && back) {
            Node<T>* raw = n.get();
            n->back = [raw, fn = std::move(back)]() { fn(*raw); };
        }
        nodes_.push_back(n);
        return n;
    }

    void backward(const Var<T>& root) {
        root->ensure_grad().fill(T(1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<T>& n = **it;
            if (n.requires_grad && n.has_grad() && n.back) n.back();
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<Var<T>> nodes_;
};

// Trainable tensor plus AdamW moment state.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> m;
    Tensor<T> v;

    Param() = default;
    Param(std::string n, Tensor<T> val) : name(std::move(n)), value(std::move(val)) {}

    void reset_moments() {
        m = Tensor<T>::zeros(value.shape());
        v = Tensor<T>::zeros(value.shape());
    }
};

// Per-step binding of params to graph leaves. Binding the same param twice
// returns the same leaf so gradient contributions accumulate on one node.
// Frozen bindings create constant leaves: gradients flow through activations
// but never reach the parameter.
template <class T>
class Binder {
public:
    explicit Binder(Graph<T>& g) : g_(g) {}

    Var<T> operator()(Param<T>& p, bool trainable = true) {
        auto it = cache_.find(&p);
        if (it != cache_.end()) return it->second;
        Var<T> v = g_.leaf(p.value, trainable);
        cache_.emplace(&p, v);
        if (trainable) bound_.push_back({&p, v});
        return v;
    }

    const std::vector<std::pair<Param<T>*, Var<T>>>& bound() const { return bound_; }

private:
    Graph<T>& g_;
    std::unordered_map<Param<T>*, Var<T>> cache_;
    std::vector<std::pair<Param<T>*, Var<T>>> bound_;
};

}  // namespace latentmark::nn
