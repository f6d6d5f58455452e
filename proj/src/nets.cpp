#include "dtcn/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace dtcn {

Mlp::Mlp(std::string prefix, std::vector<std::size_t> dims, Activation hidden, Activation out_act)
    : prefix_(std::move(prefix)), dims_(std::move(dims)), hidden_(hidden), out_act_(out_act) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least in/out dims");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        params_.add(wname(l), Tensor({dims_[l], dims_[l + 1]}));
        params_.add(bname(l), Tensor({dims_[l + 1]}));
    }
}

std::string Mlp::wname(std::size_t l) const {
    return prefix_ + ".L" + std::to_string(l) + ".W";
}
std::string Mlp::bname(std::size_t l) const {
    return prefix_ + ".L" + std::to_string(l) + ".b";
}

void Mlp::init(Rng& rng) {
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(dims_[l] + dims_[l + 1]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : params_.at(wname(l)).data) v = u(rng);
        // small nonzero bias keeps a live path through relu units, so even a
        // degenerate all-zero input row yields a normalizable frame
        for (auto& v : params_.at(bname(l)).data) v = 0.01;
    }
}

Var Mlp::forward(Tape& t, Var x, bool trainable) const {
    Var h = x;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const Activation act = (l + 2 == dims_.size()) ? out_act_ : hidden_;
        Var w = trainable ? t.param(wname(l), params_.at(wname(l)))
                          : t.leaf(params_.at(wname(l)));
        Var b = trainable ? t.param(bname(l), params_.at(bname(l)))
                          : t.leaf(params_.at(bname(l)));
        h = dense(h, w, b, act);
    }
    return h;
}

Tensor Mlp::forward_value(const Tensor& x) const {
    Tape t;
    return forward(t, t.leaf(x), /*trainable=*/false).value();
}

void Mlp::load_from(const ParameterSet& src) {
    for (auto& e : params_.entries()) {
        const Tensor& s = src.at(e.name);
        if (s.shape != e.tensor.shape)
            throw std::invalid_argument("Mlp::load_from: shape mismatch on " + e.name);
        e.tensor = s;
    }
}

void Mlp::export_to(ParameterSet& dst) const {
    for (const auto& e : params_.entries()) dst.add(e.name, e.tensor);
}

}  // namespace dtcn
