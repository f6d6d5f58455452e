#include "dtcn/channel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtcn {

SemanticFrame normalize_power(const SemanticFrame& frame) {
    Tape t;
    Var out = normalize_rows_power(t.leaf(frame.symbols));
    return SemanticFrame{out.value(), frame.hop_tag};
}

Tensor draw_awgn_noise(const std::vector<std::size_t>& shape, double snr_db, Rng& rng) {
    const double sigma = std::sqrt(noise_variance(snr_db));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor noise(shape);
    for (auto& v : noise.data) v = sigma * gauss(rng);
    return noise;
}

SemanticFrame awgn_transmit(const SemanticFrame& frame, const ChannelConfig& cfg, Rng& rng) {
    Tensor noise = draw_awgn_noise(frame.symbols.shape, cfg.snr_db, rng);
    SemanticFrame out = frame;
    for (std::size_t i = 0; i < out.symbols.data.size(); ++i)
        out.symbols.data[i] += noise.data[i];
    return out;
}

double measure_empirical_snr(const SemanticFrame& clean, const SemanticFrame& noisy) {
    if (!clean.symbols.same_shape(noisy.symbols))
        throw std::invalid_argument("measure_empirical_snr: shape mismatch");
    double ps = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < clean.symbols.data.size(); ++i) {
        const double c = clean.symbols.data[i];
        const double d = noisy.symbols.data[i] - c;
        ps += c * c;
        pn += d * d;
    }
    if (pn == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ps / pn);
}

}  // namespace dtcn
