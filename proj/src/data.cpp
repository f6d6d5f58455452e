#include "dtcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dtcn {

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.num_classes = num_classes;
    out.x_img = Tensor({indices.size(), img_dim()});
    out.x_txt = Tensor({indices.size(), txt_dim()});
    out.labels.resize(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        std::copy_n(x_img.data.data() + i * img_dim(), img_dim(),
                    out.x_img.data.data() + r * img_dim());
        std::copy_n(x_txt.data.data() + i * txt_dim(), txt_dim(),
                    out.x_txt.data.data() + r * txt_dim());
        out.labels[r] = labels[i];
    }
    return out;
}

namespace {

Dataset make_split(const SyntheticSpec& spec, std::size_t n, const Tensor& proto_img,
                   const Tensor& proto_txt, const std::vector<double>& proto_uninformative,
                   Rng& rng) {
    const auto k = static_cast<std::size_t>(spec.num_classes);
    // Round-robin class assignment keeps per-class counts within 1, then a
    // seeded shuffle removes the ordering.
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
    std::shuffle(labels.begin(), labels.end(), rng);

    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.labels = std::move(labels);
    ds.x_img = Tensor({n, spec.img_dim});
    ds.x_txt = Tensor({n, spec.txt_dim});
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double rho = spec.txt_informativeness;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(ds.labels[i]);
        for (std::size_t j = 0; j < spec.img_dim; ++j)
            ds.x_img.data[i * spec.img_dim + j] =
                proto_img.data[c * spec.img_dim + j] + spec.noise_img * gauss(rng);
        for (std::size_t j = 0; j < spec.txt_dim; ++j)
            ds.x_txt.data[i * spec.txt_dim + j] = rho * proto_txt.data[c * spec.txt_dim + j] +
                                                  (1.0 - rho) * proto_uninformative[j] +
                                                  spec.noise_txt * gauss(rng);
    }
    return ds;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2)
        throw std::invalid_argument("generate_synthetic: need at least 2 classes");
    const auto k = static_cast<std::size_t>(spec.num_classes);
    Rng rng(combine_seed(spec.seed, 0xD47A5E7));
    std::normal_distribution<double> gauss(0.0, 1.0);

    Tensor proto_img({k, spec.img_dim});
    Tensor proto_txt({k, spec.txt_dim});
    for (auto& v : proto_img.data) v = spec.separation * gauss(rng);
    for (auto& v : proto_txt.data) v = spec.separation * gauss(rng);
    std::vector<double> proto_uninformative(spec.txt_dim);
    for (auto& v : proto_uninformative) v = spec.separation * gauss(rng);

    SyntheticData out;
    Rng train_rng(combine_seed(spec.seed, 1));
    Rng test_rng(combine_seed(spec.seed, 2));
    out.train = make_split(spec, spec.n_train, proto_img, proto_txt, proto_uninformative, train_rng);
    out.test = make_split(spec, spec.n_test, proto_img, proto_txt, proto_uninformative, test_rng);
    return out;
}

Dataset mask_modality_a(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("mask_modality_a: fraction must be in [0,1]");
    const std::size_t d = ds.img_dim();
    const auto n_mask = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d)));
    Dataset out = ds;
    std::vector<std::size_t> coords(d);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::iota(coords.begin(), coords.end(), 0);
        Rng rng(combine_seed(seed, i));
        std::shuffle(coords.begin(), coords.end(), rng);
        for (std::size_t m = 0; m < n_mask; ++m) out.x_img.data[i * d + coords[m]] = 0.0;
    }
    return out;
}

namespace {

constexpr char kMagicPrefix[7] = "DTCNDS";
constexpr char kVersion[3] = "01";

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("dataset: truncated file " + path);
    return v;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("dataset: cannot open " + path + " for writing");
    os.write(kMagicPrefix, 6);
    os.write(kVersion, 2);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.num_classes));
    write_pod<std::uint64_t>(os, ds.size());
    write_pod<std::uint64_t>(os, ds.img_dim());
    write_pod<std::uint64_t>(os, ds.txt_dim());
    for (int l : ds.labels) write_pod<std::int32_t>(os, l);
    os.write(reinterpret_cast<const char*>(ds.x_img.data.data()),
             static_cast<std::streamsize>(ds.x_img.data.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(ds.x_txt.data.data()),
             static_cast<std::streamsize>(ds.x_txt.data.size() * sizeof(double)));
    if (!os) throw std::runtime_error("dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("dataset: cannot open " + path);
    char magic[6], version[2];
    is.read(magic, 6);
    is.read(version, 2);
    if (!is || std::memcmp(magic, kMagicPrefix, 6) != 0)
        throw std::runtime_error("dataset: bad magic in " + path);
    if (std::memcmp(version, kVersion, 2) != 0)
        throw std::runtime_error("dataset: unsupported format version " +
                                 std::string(version, 2) + " in " + path);
    Dataset ds;
    ds.num_classes = static_cast<int>(read_pod<std::uint32_t>(is, path));
    const auto n = read_pod<std::uint64_t>(is, path);
    const auto img_dim = read_pod<std::uint64_t>(is, path);
    const auto txt_dim = read_pod<std::uint64_t>(is, path);
    ds.labels.resize(n);
    for (auto& l : ds.labels) l = read_pod<std::int32_t>(is, path);
    ds.x_img = Tensor({n, img_dim});
    ds.x_txt = Tensor({n, txt_dim});
    is.read(reinterpret_cast<char*>(ds.x_img.data.data()),
            static_cast<std::streamsize>(ds.x_img.data.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(ds.x_txt.data.data()),
            static_cast<std::streamsize>(ds.x_txt.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("dataset: truncated file " + path);
    return ds;
}

}  // namespace dtcn
