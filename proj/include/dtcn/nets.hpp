#pragma once

#include <string>
#include <vector>

#include "dtcn/autodiff.hpp"
#include "dtcn/params.hpp"
#include "dtcn/rng.hpp"

namespace dtcn {

// Small dense network. Parameters live in an owned ParameterSet under
// names "<prefix>.L<i>.W" / "<prefix>.L<i>.b".
class Mlp {
public:
    Mlp() = default;
    // dims = {in, h1, ..., out}; hidden layers use `hidden`, last layer `out_act`.
    Mlp(std::string prefix, std::vector<std::size_t> dims, Activation hidden,
        Activation out_act = Activation::identity);

    void init(Rng& rng);  // uniform +-sqrt(6/(fan_in+fan_out))

    // Forward on a tape. When trainable, parameters are registered as named
    // leaves so param_grads() picks them up; otherwise they are anonymous
    // constants.
    Var forward(Tape& t, Var x, bool trainable = true) const;

    // Tape-free forward for evaluation.
    Tensor forward_value(const Tensor& x) const;

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const std::string& prefix() const { return prefix_; }
    std::size_t in_dim() const { return dims_.front(); }
    std::size_t out_dim() const { return dims_.back(); }

    // Copy matching entries (by name) from src into this net's params.
    void load_from(const ParameterSet& src);
    // Append this net's params to dst.
    void export_to(ParameterSet& dst) const;

private:
    std::string prefix_;
    std::vector<std::size_t> dims_;
    Activation hidden_ = Activation::relu;
    Activation out_act_ = Activation::identity;
    ParameterSet params_;

    std::string wname(std::size_t layer) const;
    std::string bname(std::size_t layer) const;
};

}  // namespace dtcn
