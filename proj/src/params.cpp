#include "dtcn/params.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dtcn {

void ParameterSet::add(const std::string& name, Tensor t) {
    if (contains(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(t)});
}

Tensor& ParameterSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParameterSet: no entry " + name);
    return entries_[it->second].tensor;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParameterSet: no entry " + name);
    return entries_[it->second].tensor;
}

std::size_t ParameterSet::total_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

bool ParameterSet::shape_compatible(const ParameterSet& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != o.entries_[i].name) return false;
        if (entries_[i].tensor.shape != o.entries_[i].tensor.shape) return false;
    }
    return true;
}

void ParameterSet::sgd_step(const ParameterSet& grads, double lr) {
    for (const auto& g : grads.entries()) {
        Tensor& p = at(g.name);
        if (p.shape != g.tensor.shape)
            throw std::invalid_argument("sgd_step: shape mismatch on " + g.name);
        for (std::size_t i = 0; i < p.data.size(); ++i)
            p.data[i] -= lr * g.tensor.data[i];
    }
}

ParameterSet ParameterSet::weighted_average(
    const std::vector<std::pair<const ParameterSet*, double>>& locals) {
    if (locals.empty()) throw std::invalid_argument("weighted_average: empty input");
    const ParameterSet& ref = *locals.front().first;
    for (const auto& [ps, w] : locals)
        if (!ref.shape_compatible(*ps))
            throw std::invalid_argument("weighted_average: shape-incompatible parameter sets");
    ParameterSet out;
    for (std::size_t e = 0; e < ref.entries().size(); ++e) {
        Tensor acc(ref.entries()[e].tensor.shape, 0.0);
        for (const auto& [ps, w] : locals) {
            const Tensor& t = ps->entries()[e].tensor;
            for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += w * t.data[i];
        }
        out.add(ref.entries()[e].name, std::move(acc));
    }
    return out;
}

namespace {

constexpr char kMagic[9] = "DTCNPS01";

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_params(const ParameterSet& ps, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 8);
    write_pod<std::uint64_t>(os, ps.size());
    for (const auto& e : ps.entries()) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.tensor.shape.size()));
        for (auto d : e.tensor.shape) write_pod<std::uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(e.tensor.data.data()),
                 static_cast<std::streamsize>(e.tensor.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ParameterSet load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto n = read_pod<std::uint64_t>(is);
    ParameterSet ps;
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto name_len = read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated name in " + path);
        const auto ndim = read_pod<std::uint32_t>(is);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated payload in " + path);
        ps.add(name, std::move(t));
    }
    return ps;
}

}  // namespace dtcn
