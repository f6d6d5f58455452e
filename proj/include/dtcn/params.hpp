#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dtcn/tensor.hpp"

namespace dtcn {

// Ordered, named collection of tensors. Iteration order is insertion order
// and is stable across runs; checkpoints and FL exchange rely on it.
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(const std::string& name, Tensor t);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    std::size_t total_scalars() const;

    // Same names, same order, same shapes.
    bool shape_compatible(const ParameterSet& o) const;

    // this -= lr * grads (entries missing from grads are untouched)
    void sgd_step(const ParameterSet& grads, double lr);

    // Elementwise weighted sum; all sets shape-compatible.
    static ParameterSet weighted_average(
        const std::vector<std::pair<const ParameterSet*, double>>& locals);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Checkpoint format: magic "DTCNPS01", u64 entry count, then per entry:
// u32 name length, name bytes, u32 ndim, u64 dims, raw little-endian f64
// payload, in ParameterSet order. Round-trip is bit-exact.
void save_params(const ParameterSet& ps, const std::string& path);
ParameterSet load_params(const std::string& path);

}  // namespace dtcn
