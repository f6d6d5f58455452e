#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dtcn/params.hpp"
#include "dtcn/tensor.hpp"

namespace dtcn {

enum class Activation { identity, relu, tanh };

class Tape;

// Handle to a node on a tape. Plain value; cheap to copy.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
};

// Records forward operations so a single reverse sweep can replay the
// backward pass. Confined to one thread for the duration of a
// forward/backward pair.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

    Var leaf(Tensor value);
    // Named leaf whose gradient is collected by param_grads(). Registering
    // the same name twice returns the existing node.
    Var param(const std::string& name, const Tensor& value);

    Var push(Tensor value, BackwardFn backward);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    void accumulate(int id, const Tensor& g);

    // Reverse sweep from a scalar loss. Visits each node at most once, in
    // reverse creation order.
    void backward(Var loss);

    // Gradient of the last backward() wrt a node; zeros if the node did not
    // participate.
    Tensor grad(int id) const;

    // Gradients for every registered param, in registration order.
    ParameterSet param_grads() const;

private:
    struct Node {
        Tensor value;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;  // empty shape = untouched
    std::vector<std::pair<std::string, int>> named_;
    std::vector<std::pair<std::string, std::size_t>> name_index_;
};

// --- operations -----------------------------------------------------------

// act(x * w + b); x:[batch,in] w:[in,out] b:[out]
Var dense(Var x, Var w, Var b, Activation act);

// column-wise concatenation of [batch,a] and [batch,b] -> [batch,a+b]
Var concat_cols(Var a, Var b);

// Scale each row to unit mean-square. Errors on an all-zero row.
Var normalize_rows_power(Var x);

// x + c, with c treated as a constant during backward (channel noise).
Var add_constant(Var x, const Tensor& c);

// mean over batch of -log softmax(logits)[label]
Var cross_entropy(Var logits, const std::vector<int>& labels);

// mean absolute difference; subgradient at ties is 0
Var l1(Var x, Var y);

Var sum(Var x);
Var mul(Var x, Var y);  // elementwise
Var scale(Var x, double c);

// --- tape-free helpers ------------------------------------------------------

Tensor softmax_rows(const Tensor& logits);
std::vector<int> argmax_rows(const Tensor& logits);
double apply_activation_scalar(double v, Activation act);

}  // namespace dtcn
