// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "voxflow/rng.hpp"
#include "voxflow/tensor.hpp"

namespace voxflow {

// Named parameter with gradient slot, EMA shadow, and Adam state.
template <typename T>
struct ParamTensor {
    std::vector<int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> ema;
    std::vector<T> adam_m;
    std::vector<T> adam_v;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
};

// Parameter store with deterministic (name-ordered) iteration.
template <typename T>
class ParamStore {
  public:
    // Gaussian init scaled by `stddev`; stddev 0 gives zero init.
    ParamTensor<T>& create(const std::string& name, std::vector<int64_t> shape,
                           Rng& rng, double stddev) {
        VF_CHECK(!params_.count(name), "duplicate parameter name " << name);
        ParamTensor<T>& p = params_[name];
        p.shape = std::move(shape);
        const size_t n = static_cast<size_t>(Tensor<T>::numel_of(p.shape));
        p.value.assign(n, T(0));
        if (stddev > 0.0)
            for (auto& v : p.value) v = static_cast<T>(rng.gaussian() * stddev);
        p.grad.assign(n, T(0));
        p.ema = p.value;
        p.adam_m.assign(n, T(0));
        p.adam_v.assign(n, T(0));
        return p;
    }

    ParamTensor<T>& at(const std::string& name) {
        auto it = params_.find(name);
        VF_CHECK(it != params_.end(), "unknown parameter " << name);
        return it->second;
    }
    const ParamTensor<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        VF_CHECK(it != params_.end(), "unknown parameter " << name);
        return it->second;
    }
    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    std::map<std::string, ParamTensor<T>>& params() { return params_; }
    const std::map<std::string, ParamTensor<T>>& params() const { return params_; }

    void zero_grad() {
        for (auto& [name, p] : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
    }

    // Standard Adam with bias correction over all parameters.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8) {
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& [name, p] : params_) {
            for (size_t i = 0; i < p.value.size(); ++i) {
                const double g = static_cast<double>(p.grad[i]);
                const double m = beta1 * p.adam_m[i] + (1.0 - beta1) * g;
                const double v = beta2 * p.adam_v[i] + (1.0 - beta2) * g * g;
                p.adam_m[i] = static_cast<T>(m);
                p.adam_v[i] = static_cast<T>(v);
                p.value[i] -= static_cast<T>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
            }
        }
    }

    void ema_update(double rate) {
        for (auto& [name, p] : params_)
            for (size_t i = 0; i < p.value.size(); ++i)
                p.ema[i] = static_cast<T>(rate * p.ema[i] + (1.0 - rate) * p.value[i]);
    }

    // Copy with EMA shadows promoted to values (for evaluation/sampling).
    ParamStore with_ema_values() const {
        ParamStore out = *this;
        for (auto& [name, p] : out.params_) p.value = p.ema;
        return out;
    }

    int64_t step() const { return step_; }
    void set_step(int64_t s) { step_ = s; }

    uint64_t total_parameters() const {
        uint64_t n = 0;
        for (const auto& [name, p] : params_) n += p.value.size();
        return n;
    }

  private:
    std::map<std::string, ParamTensor<T>> params_;
    int64_t step_ = 0;
};

// Reverse-mode gradient tape. Nodes are created in topological order by
// construction; backward() visits them exactly once in reverse order.
// Recording is single-threaded; one tape per training thread.
template <typename T>
class Tape {
  public:
    // Called as fn(tape, self_id); reads its output gradient via grad(self_id)
    // and accumulates into the gradients of its inputs.
    using BackwardFn = std::function<void(Tape&, int)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;          // allocated lazily during backward
        BackwardFn backward;     // empty for leaves/constants
        ParamTensor<T>* param = nullptr;
    };

    int constant(Tensor<T> v) { return push(std::move(v), nullptr, nullptr); }

    // Differentiable input (gradient readable after backward).
    int input(Tensor<T> v) { return push(std::move(v), nullptr, nullptr); }

    // Leases a parameter onto the tape; backward accumulates into p.grad.
    int param(ParamTensor<T>& p) {
        Tensor<T> v(p.shape, p.value);
        const int id = push(std::move(v), nullptr, &p);
        return id;
    }

    int make(Tensor<T> v, BackwardFn fn) { return push(std::move(v), std::move(fn), nullptr); }

    Tensor<T>& value(int id) { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor<T>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }

    // Gradient accumulator for a node; zero-allocated on first access.
    Tensor<T>& grad(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
        return n.grad;
    }

    // Seeds d(root)/d(root) = 1 and propagates to every reachable node.
    // Parameter gradients accumulate across repeated calls until zeroed.
    void backward(int root) {
        VF_CHECK(value(root).numel() == 1, "backward root must be a scalar");
        for (Node& n : nodes_) n.grad.data.clear();
        grad(root)[0] = T(1);
        for (int id = root; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.grad.data.empty()) continue;  // not reachable from root
            if (n.backward) n.backward(*this, id);
            if (n.param) {
                for (size_t i = 0; i < n.param->grad.size(); ++i)
                    n.param->grad[i] += n.grad.data[i];
            }
        }
    }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    int push(Tensor<T> v, BackwardFn fn, ParamTensor<T>* p) {
        Node n;
        n.value = std::move(v);
        n.backward = std::move(fn);
        n.param = p;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

}  // namespace voxflow
