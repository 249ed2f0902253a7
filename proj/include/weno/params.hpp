#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "weno/kernels.hpp"
#include "weno/tensor.hpp"

namespace weno {

// Named, shaped, mutable parameter arrays with an accumulated-gradient
// buffer per entry. Entries keep insertion order; checkpoint payloads are
// written in that order.
template <typename T>
class ParameterStore {
   public:
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> grad;
    };

    int add(const std::string& name, Tensor<T> value) {
        if (index_.count(name))
            throw std::invalid_argument("duplicate parameter name: " + name);
        Entry e;
        e.name = name;
        e.grad = Tensor<T>(value.shape);
        e.value = std::move(value);
        entries_.push_back(std::move(e));
        const int idx = static_cast<int>(entries_.size()) - 1;
        index_[name] = idx;
        return idx;
    }

    // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded by rng.
    int add_uniform(const std::string& name, std::vector<long> shape, long fan_in,
                    std::mt19937_64& rng) {
        Tensor<T> t(std::move(shape));
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.data) v = static_cast<T>(dist(rng));
        return add(name, std::move(t));
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
        return it->second;
    }

    Entry& entry(int idx) { return entries_.at(static_cast<std::size_t>(idx)); }
    const Entry& entry(int idx) const { return entries_.at(static_cast<std::size_t>(idx)); }

    Tensor<T>& value(const std::string& name) { return entry(index_of(name)).value; }
    const Tensor<T>& value(const std::string& name) const { return entry(index_of(name)).value; }
    Tensor<T>& grad(const std::string& name) { return entry(index_of(name)).grad; }

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    void zero_grads() {
        for (auto& e : entries_)
            std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
    }

    // value <- value - lr * grad, then grads reset to 0.
    void sgd_step(T learning_rate) {
        for (auto& e : entries_) {
            for (T g : e.grad.data)
                if (!std::isfinite(static_cast<double>(g)))
                    throw std::runtime_error("non-finite gradient in parameter '" + e.name + "'");
            kern::axpy(-learning_rate, e.grad.data.data(), e.value.data.data(), e.value.numel());
        }
        zero_grads();
    }

    long total_scalars() const {
        long n = 0;
        for (const auto& e : entries_) n += e.value.numel();
        return n;
    }

   private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace weno
