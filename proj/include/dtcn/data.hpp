#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtcn/rng.hpp"
#include "dtcn/tensor.hpp"

namespace dtcn {

// Paired modality batches stored row-aligned with labels.
struct Dataset {
    Tensor x_img;             // [n, img_dim]
    Tensor x_txt;             // [n, txt_dim]
    std::vector<int> labels;  // n entries in [0, K)
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t img_dim() const { return x_img.cols(); }
    std::size_t txt_dim() const { return x_txt.cols(); }

    Dataset select(const std::vector<std::size_t>& indices) const;
};

struct SyntheticSpec {
    int num_classes = 10;
    std::size_t img_dim = 32;
    std::size_t txt_dim = 16;
    double separation = 1.0;     // class-prototype scale
    double noise_img = 0.45;     // within-class sigma, modality A
    double noise_txt = 0.35;     // within-class sigma, modality B
    double txt_informativeness = 0.8;  // rho: 0 = modality B pure noise
    std::size_t n_train = 2000;
    std::size_t n_test = 1000;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    Dataset train;
    Dataset test;
};

// Gaussian-prototype generative model: per class k fixed prototypes for
// both modalities; modality B mixes its class prototype with one shared
// uninformative prototype by rho. Class counts per split differ by <= 1.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Zero exactly round(fraction * img_dim) seed-chosen modality-A coordinates
// of every sample. Labels and modality B untouched.
Dataset mask_modality_a(const Dataset& ds, double fraction, std::uint64_t seed);

// Versioned binary format; round-trip bit-exact.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace dtcn
