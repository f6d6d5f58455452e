#include <cmath>

#include "doctest.h"
#include "dtcn/channel.hpp"
#include "test_util.hpp"

using namespace dtcn;
using testutil::random_tensor;

TEST_CASE("normalize_power: constant row of 2 becomes constant row of 1") {
    SemanticFrame f{Tensor({1, 4}, 2.0), HopTag::device_to_relay};
    SemanticFrame out = normalize_power(f);
    for (double v : out.symbols.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("normalize_power: hand arithmetic on [3,4]") {
    SemanticFrame f{Tensor({1, 2}, {3.0, 4.0}), HopTag::device_to_relay};
    SemanticFrame out = normalize_power(f);
    const double s = std::sqrt(12.5);
    CHECK(out.symbols.data[0] == doctest::Approx(3.0 / s).epsilon(1e-12));
    CHECK(out.symbols.data[1] == doctest::Approx(4.0 / s).epsilon(1e-12));
}

TEST_CASE("normalize_power: random rows reach unit mean square") {
    std::mt19937_64 rng(4);
    SemanticFrame f{random_tensor({16, 24}, rng, -3.0, 3.0), HopTag::device_to_relay};
    SemanticFrame out = normalize_power(f);
    for (std::size_t i = 0; i < 16; ++i) {
        double ms = 0.0;
        for (std::size_t j = 0; j < 24; ++j) ms += out.symbols.at(i, j) * out.symbols.at(i, j);
        ms /= 24.0;
        CHECK(std::abs(ms - 1.0) < 1e-9);
    }
}

TEST_CASE("normalize_power: all-zero row is a degenerate-frame error") {
    SemanticFrame f{Tensor({2, 3}), HopTag::device_to_relay};
    f.symbols.data[0] = 1.0;  // row 0 fine, row 1 all zero
    CHECK_THROWS_AS(normalize_power(f), std::domain_error);
}

TEST_CASE("normalize_power gradient is the projection-scaled upstream") {
    // finite differences through the tape op
    std::mt19937_64 rng(8);
    Tensor x = random_tensor({3, 5}, rng, 0.5, 2.0);
    Tape t;
    Var xv = t.param("x", x);
    Var loss = sum(mul(normalize_rows_power(xv), normalize_rows_power(xv)));
    // ||normalize(x)||^2 is constant (= n per row), so the gradient must vanish.
    t.backward(loss);
    for (double g : t.param_grads().at("x").data) CHECK(std::abs(g) < 1e-10);
}

TEST_CASE("awgn_transmit: +300 dB is effectively noiseless") {
    std::mt19937_64 rng(2);
    SemanticFrame f = normalize_power({random_tensor({4, 8}, rng), HopTag::device_to_relay});
    Rng noise_rng(1);
    SemanticFrame out = awgn_transmit(f, {300.0, 0}, noise_rng);
    for (std::size_t i = 0; i < f.symbols.size(); ++i)
        CHECK(std::abs(out.symbols.data[i] - f.symbols.data[i]) < 1e-12);
}

TEST_CASE("awgn_transmit: empirical noise variance matches configured SNR") {
    const std::size_t n = 1'000'000;
    for (double snr_db : {0.0, -10.0}) {
        SemanticFrame f{Tensor({1, n}, 1.0), HopTag::device_to_relay};
        Rng rng(1234);
        SemanticFrame out = awgn_transmit(f, {snr_db, 0}, rng);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = out.symbols.data[i] - 1.0;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double expect = noise_variance(snr_db);
        CHECK(var / expect > 0.995);
        CHECK(var / expect < 1.005);
    }
}

TEST_CASE("awgn_transmit: deterministic for fixed seed") {
    std::mt19937_64 rng(6);
    SemanticFrame f = normalize_power({random_tensor({2, 16}, rng), HopTag::device_to_relay});
    Rng r1(77), r2(77);
    SemanticFrame a = awgn_transmit(f, {0.0, 0}, r1);
    SemanticFrame b = awgn_transmit(f, {0.0, 0}, r2);
    CHECK(a.symbols.data == b.symbols.data);
}

TEST_CASE("measure_empirical_snr: no noise gives +infinity sentinel") {
    SemanticFrame f{Tensor({1, 4}, 1.0), HopTag::device_to_relay};
    CHECK(std::isinf(measure_empirical_snr(f, f)));
}

TEST_CASE("measure_empirical_snr: constructed 10 dB case") {
    const std::size_t n = 1000;
    SemanticFrame clean{Tensor({1, n}, 1.0), HopTag::device_to_relay};
    SemanticFrame noisy = clean;
    // deterministic alternating noise of power exactly 0.1
    const double amp = std::sqrt(0.1);
    for (std::size_t i = 0; i < n; ++i) noisy.symbols.data[i] += (i % 2 ? amp : -amp);
    CHECK(measure_empirical_snr(clean, noisy) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("round-trip SNR within 0.1 dB over 1e6 symbols") {
    const std::size_t n = 1'000'000;
    for (double snr_db : {-10.0, -5.0, 0.0, 5.0, 10.0}) {
        SemanticFrame f{Tensor({1, n}, 1.0), HopTag::device_to_relay};
        Rng rng(derive_hop_seed(99, HopTag::device_to_relay, 0));
        SemanticFrame out = awgn_transmit(f, {snr_db, 0}, rng);
        CHECK(std::abs(measure_empirical_snr(f, out) - snr_db) < 0.1);
    }
}

TEST_CASE("hop seed derivation separates hops and batches") {
    const std::uint64_t master = 42;
    CHECK(derive_hop_seed(master, HopTag::device_to_relay, 0) !=
          derive_hop_seed(master, HopTag::relay_to_receiver, 0));
    CHECK(derive_hop_seed(master, HopTag::device_to_relay, 0) !=
          derive_hop_seed(master, HopTag::device_to_relay, 1));
    CHECK(derive_hop_seed(master, HopTag::device_to_relay, 3) ==
          derive_hop_seed(master, HopTag::device_to_relay, 3));
}
