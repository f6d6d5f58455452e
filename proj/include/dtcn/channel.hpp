#pragma once

#include <cstdint>

#include "dtcn/autodiff.hpp"
#include "dtcn/rng.hpp"
#include "dtcn/tensor.hpp"

namespace dtcn {

enum class HopTag : std::uint64_t { device_to_relay = 1, relay_to_receiver = 2 };

// Power-normalized real symbol vector for one channel hop.
struct SemanticFrame {
    Tensor symbols;  // [batch, n_symbols]
    HopTag hop_tag = HopTag::device_to_relay;
};

struct ChannelConfig {
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

// sigma^2 under unit signal power
inline double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

// Stable per-hop stream seed: (master_seed, hop_tag, batch_index) mixed
// through splitmix64.
inline std::uint64_t derive_hop_seed(std::uint64_t master_seed, HopTag tag,
                                     std::uint64_t batch_index) {
    return combine_seed(master_seed, static_cast<std::uint64_t>(tag), batch_index);
}

// Scale each row to exact unit mean-square. Errors on an all-zero row.
SemanticFrame normalize_power(const SemanticFrame& frame);

// frame + iid Gaussian(0, sigma^2) noise, sigma^2 = 10^(-snr_db/10).
SemanticFrame awgn_transmit(const SemanticFrame& frame, const ChannelConfig& cfg, Rng& rng);

// Draw the noise block an awgn hop would add. Used by the differentiable
// pipeline, where noise enters as a constant (no gradient).
Tensor draw_awgn_noise(const std::vector<std::size_t>& shape, double snr_db, Rng& rng);

// 10*log10(P_signal / P_noise); +infinity when noisy == clean.
double measure_empirical_snr(const SemanticFrame& clean, const SemanticFrame& noisy);

}  // namespace dtcn
