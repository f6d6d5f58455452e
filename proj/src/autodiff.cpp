#include "dtcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtcn {

const Tensor& Var::value() const {
    if (!valid()) throw std::logic_error("Var: invalid handle");
    return tape->value(id);
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(const std::string& name, const Tensor& value) {
    for (const auto& [n, idx] : name_index_)
        if (n == name) return Var{this, named_[idx].second};
    Var v = leaf(value);
    name_index_.emplace_back(name, named_.size());
    named_.emplace_back(name, v.id);
    return v;
}

Var Tape::push(Tensor value, BackwardFn backward) {
    nodes_.push_back({std::move(value), std::move(backward)});
    grads_.emplace_back();
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Tensor& g) {
    Tensor& slot = grads_[static_cast<std::size_t>(id)];
    if (slot.shape.empty()) {
        slot = g;
        return;
    }
    if (slot.shape != g.shape) throw std::logic_error("Tape: gradient shape mismatch");
    for (std::size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g.data[i];
}

void Tape::backward(Var loss) {
    if (!loss.valid() || loss.tape != this)
        throw std::invalid_argument("backward: loss is not connected to this tape");
    if (loss.value().size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.value()));
    for (auto& g : grads_) g = Tensor{};
    accumulate(loss.id, Tensor(loss.value().shape, 1.0));
    for (int i = loss.id; i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        if (grads_[idx].shape.empty() || !nodes_[idx].backward) continue;
        nodes_[idx].backward(*this, grads_[idx]);
    }
}

Tensor Tape::grad(int id) const {
    const Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.shape.empty()) return Tensor(nodes_[static_cast<std::size_t>(id)].value.shape, 0.0);
    return g;
}

ParameterSet Tape::param_grads() const {
    ParameterSet out;
    for (const auto& [name, id] : named_) out.add(name, grad(id));
    return out;
}

double apply_activation_scalar(double v, Activation act) {
    switch (act) {
        case Activation::identity: return v;
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::tanh: return std::tanh(v);
    }
    return v;
}

namespace {

double activation_grad(double pre, double post, Activation act) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - post * post;
    }
    return 1.0;
}

void require_same_tape(Var a, Var b, const char* what) {
    if (a.tape != b.tape) throw std::invalid_argument(std::string(what) + ": vars on different tapes");
}

}  // namespace

Var dense(Var x, Var w, Var b, Activation act) {
    require_same_tape(x, w, "dense");
    require_same_tape(x, b, "dense");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.ndim() != 2 || wv.ndim() != 2 || bv.ndim() != 1 || xv.shape[1] != wv.shape[0] ||
        wv.shape[1] != bv.shape[0])
        throw std::invalid_argument("dense: shape mismatch x=" + shape_str(xv) +
                                    " w=" + shape_str(wv) + " b=" + shape_str(bv));
    const std::size_t m = xv.shape[0], k = wv.shape[0], n = wv.shape[1];
    Tensor pre({m, n});
    kernels::matmul(xv.data.data(), wv.data.data(), pre.data.data(), m, k, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pre.data[i * n + j] += bv.data[j];
    Tensor out = pre;
    if (act != Activation::identity)
        for (auto& v : out.data) v = apply_activation_scalar(v, act);

    const int xid = x.id, wid = w.id, bid = b.id;
    Tensor xcpy = xv, wcpy = wv, precpy = pre, outcpy = out;
    return x.tape->push(std::move(out), [=](Tape& t, const Tensor& up) {
        Tensor gpre = up;
        for (std::size_t i = 0; i < gpre.data.size(); ++i)
            gpre.data[i] *= activation_grad(precpy.data[i], outcpy.data[i], act);
        Tensor gx({m, k});
        kernels::matmul_bt(gpre.data.data(), wcpy.data.data(), gx.data.data(), m, n, k);
        Tensor gw({k, n});
        kernels::matmul_at(xcpy.data.data(), gpre.data.data(), gw.data.data(), m, k, n);
        Tensor gb({n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb.data[j] += gpre.data[i * n + j];
        t.accumulate(xid, gx);
        t.accumulate(wid, gw);
        t.accumulate(bid, gb);
    });
}

Var concat_cols(Var a, Var b) {
    require_same_tape(a, b, "concat_cols");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.shape[0] != bv.shape[0])
        throw std::invalid_argument("concat_cols: batch mismatch " + shape_str(av) + " vs " +
                                    shape_str(bv));
    const std::size_t m = av.shape[0], na = av.shape[1], nb = bv.shape[1];
    Tensor out({m, na + nb});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(av.data.data() + i * na, na, out.data.data() + i * (na + nb));
        std::copy_n(bv.data.data() + i * nb, nb, out.data.data() + i * (na + nb) + na);
    }
    const int aid = a.id, bid = b.id;
    return a.tape->push(std::move(out), [=](Tape& t, const Tensor& up) {
        Tensor ga({m, na}), gb({m, nb});
        for (std::size_t i = 0; i < m; ++i) {
            std::copy_n(up.data.data() + i * (na + nb), na, ga.data.data() + i * na);
            std::copy_n(up.data.data() + i * (na + nb) + na, nb, gb.data.data() + i * nb);
        }
        t.accumulate(aid, ga);
        t.accumulate(bid, gb);
    });
}

Var normalize_rows_power(Var x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 2) throw std::invalid_argument("normalize_rows_power: need 2-D input");
    const std::size_t m = xv.shape[0], n = xv.shape[1];
    Tensor out({m, n});
    std::vector<double> scale(m);
    for (std::size_t i = 0; i < m; ++i) {
        double ms = 0.0;
        for (std::size_t j = 0; j < n; ++j) ms += xv.data[i * n + j] * xv.data[i * n + j];
        ms /= static_cast<double>(n);
        if (ms == 0.0)
            throw std::domain_error("normalize_rows_power: degenerate all-zero row " +
                                    std::to_string(i));
        scale[i] = 1.0 / std::sqrt(ms);
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = xv.data[i * n + j] * scale[i];
    }
    const int xid = x.id;
    Tensor outcpy = out;
    return x.tape->push(std::move(out), [=](Tape& t, const Tensor& up) {
        Tensor gx({m, n});
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += up.data[i * n + j] * outcpy.data[i * n + j];
            dot /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j)
                gx.data[i * n + j] =
                    scale[i] * (up.data[i * n + j] - outcpy.data[i * n + j] * dot);
        }
        t.accumulate(xid, gx);
    });
}

Var add_constant(Var x, const Tensor& c) {
    const Tensor& xv = x.value();
    if (!xv.same_shape(c))
        throw std::invalid_argument("add_constant: shape mismatch " + shape_str(xv) + " vs " +
                                    shape_str(c));
    Tensor out = xv;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
    const int xid = x.id;
    return x.tape->push(std::move(out),
                        [xid](Tape& t, const Tensor& up) { t.accumulate(xid, up); });
}

Var cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor& lv = logits.value();
    if (lv.ndim() != 2) throw std::invalid_argument("cross_entropy: need [batch,K] logits");
    const std::size_t m = lv.shape[0], k = lv.shape[1];
    if (m == 0) throw std::invalid_argument("cross_entropy: empty batch");
    if (labels.size() != m)
        throw std::invalid_argument("cross_entropy: label count does not match batch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= k)
            throw std::out_of_range("cross_entropy: label " + std::to_string(l) +
                                    " out of range [0," + std::to_string(k) + ")");
    Tensor probs = softmax_rows(lv);
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        loss -= std::log(probs.data[i * k + static_cast<std::size_t>(labels[i])]);
    loss /= static_cast<double>(m);
    const int lid = logits.id;
    return logits.tape->push(Tensor::scalar(loss), [=](Tape& t, const Tensor& up) {
        const double s = up.data[0] / static_cast<double>(m);
        Tensor g = probs;
        for (std::size_t i = 0; i < m; ++i)
            g.data[i * k + static_cast<std::size_t>(labels[i])] -= 1.0;
        for (auto& v : g.data) v *= s;
        t.accumulate(lid, g);
    });
}

Var l1(Var x, Var y) {
    require_same_tape(x, y, "l1");
    const Tensor& xv = x.value();
    const Tensor& yv = y.value();
    if (!xv.same_shape(yv))
        throw std::invalid_argument("l1: shape mismatch " + shape_str(xv) + " vs " + shape_str(yv));
    const std::size_t n = xv.size();
    if (n == 0) throw std::invalid_argument("l1: empty tensors");
    double loss = 0.0;
    Tensor sign(xv.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = xv.data[i] - yv.data[i];
        loss += std::abs(d);
        sign.data[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    loss /= static_cast<double>(n);
    const int xid = x.id, yid = y.id;
    return x.tape->push(Tensor::scalar(loss), [=](Tape& t, const Tensor& up) {
        const double s = up.data[0] / static_cast<double>(n);
        Tensor gx = sign, gy = sign;
        for (auto& v : gx.data) v *= s;
        for (auto& v : gy.data) v *= -s;
        t.accumulate(xid, gx);
        t.accumulate(yid, gy);
    });
}

Var sum(Var x) {
    const Tensor& xv = x.value();
    double s = 0.0;
    for (double v : xv.data) s += v;
    const int xid = x.id;
    const auto shape = xv.shape;
    return x.tape->push(Tensor::scalar(s), [=](Tape& t, const Tensor& up) {
        t.accumulate(xid, Tensor(shape, up.data[0]));
    });
}

Var mul(Var x, Var y) {
    require_same_tape(x, y, "mul");
    const Tensor& xv = x.value();
    const Tensor& yv = y.value();
    if (!xv.same_shape(yv))
        throw std::invalid_argument("mul: shape mismatch " + shape_str(xv) + " vs " + shape_str(yv));
    Tensor out = xv;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= yv.data[i];
    const int xid = x.id, yid = y.id;
    Tensor xcpy = xv, ycpy = yv;
    return x.tape->push(std::move(out), [=](Tape& t, const Tensor& up) {
        Tensor gx = up, gy = up;
        for (std::size_t i = 0; i < gx.data.size(); ++i) {
            gx.data[i] *= ycpy.data[i];
            gy.data[i] *= xcpy.data[i];
        }
        t.accumulate(xid, gx);
        t.accumulate(yid, gy);
    });
}

Var scale(Var x, double c) {
    Tensor out = x.value();
    for (auto& v : out.data) v *= c;
    const int xid = x.id;
    return x.tape->push(std::move(out), [=](Tape& t, const Tensor& up) {
        Tensor g = up;
        for (auto& v : g.data) v *= c;
        t.accumulate(xid, g);
    });
}

Tensor softmax_rows(const Tensor& logits) {
    const std::size_t m = logits.rows(), k = logits.cols();
    Tensor out = logits;
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data.data() + i * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < k; ++j) row[j] /= z;
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t m = logits.rows(), k = logits.cols();
    std::vector<int> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data.data() + i * k;
        out[i] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return out;
}

}  // namespace dtcn
