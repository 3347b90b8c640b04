#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "turbobw/channel.hpp"
#include "turbobw/comm_chain.hpp"
#include "turbobw/turbo_receiver.hpp"

using namespace turbobw;
using Catch::Matchers::WithinAbs;

namespace {

// Owning bundle behind the ReceiverSystem view used by these tests.
struct Fixture {
    std::vector<double> taps;
    std::vector<unsigned> generators{07, 05};
    int constraint_registers = 2;
    int info_len;
    TrellisSpec isi_reduced;
    TrellisSpec isi_conventional;
    TrellisSpec code;
    Interleaver pi;
    ChannelSpec channel;
    std::vector<double> truth;
    TxFrame frame;

    Fixture(std::vector<double> taps_in, int K, double noise_variance, std::uint64_t seed)
        : taps(std::move(taps_in)),
          info_len(K),
          isi_reduced(build_isi_trellis_reduced(static_cast<int>(taps.size()))),
          isi_conventional(build_isi_trellis_conventional(static_cast<int>(taps.size()))),
          code(build_conv_trellis(generators, constraint_registers)),
          pi(generators.size() * (K + constraint_registers), 0x1111 + seed),
          channel(taps, noise_variance, seed * 31 + 7),
          truth(true_param_table(channel, isi_reduced)) {
        frame = build_tx_frame(K, generators, constraint_registers, pi, seed * 17 + 3);
        auto out = apply_channel(frame.symbols, channel);
        frame.noiseless = std::move(out.noiseless);
        frame.received = std::move(out.received);
    }

    ReceiverSystem system() const {
        return {isi_reduced, isi_conventional, code, pi, truth, info_len};
    }

    InitSpec init(double epsilon, std::uint64_t seed = 5) const {
        InitSpec i;
        i.true_means = truth;
        i.perturbation = epsilon;
        i.variance = channel.noise_variance;
        i.rng_seed = seed;
        return i;
    }

    EdgeGaussianTable true_emissions() const {
        EdgeGaussianTable em;
        em.means = truth;
        em.variances.assign(isi_reduced.num_params, channel.noise_variance);
        return em;
    }
};

}  // namespace

TEST_CASE("equalizer extrinsics") {
    SECTION("noiseless observations pin the transmitted symbols") {
        Fixture f({0.6, 0.8}, 40, 1e-9, 1);
        EdgeGaussianTable em = f.true_emissions();
        em.variances.assign(em.variances.size(), 1e-9);
        const Table priors = uniform_priors(f.frame.received.size());
        const auto eq = equalize(f.frame.noiseless, f.isi_reduced, em, priors);
        for (std::size_t t = 0; t < f.frame.interleaved_bits.size(); ++t)
            CHECK_THAT(eq.extrinsic(t, f.frame.interleaved_bits[t]), WithinAbs(1.0, 1e-6));
    }

    SECTION("uniform priors make extrinsic equal the normalized joint") {
        Fixture f({0.6, 0.8}, 24, 0.3, 2);
        const Table priors = uniform_priors(f.frame.received.size());
        const auto eq = equalize(f.frame.received, f.isi_reduced, f.true_emissions(), priors);
        for (std::size_t t = 0; t < eq.extrinsic.rows(); ++t) {
            const double z = eq.joint(t, 0) + eq.joint(t, 1);
            CHECK_THAT(eq.extrinsic(t, 0), WithinAbs(eq.joint(t, 0) / z, 1e-12));
        }
    }

    SECTION("joint table matches the sequence-sum oracle") {
        const TrellisSpec t = build_isi_trellis_reduced(2);
        Rng rng(47);
        EdgeGaussianTable em;
        for (int l = 0; l < t.num_params; ++l) {
            em.means.push_back(rng.next_uniform(-1.5, 1.5));
            em.variances.push_back(rng.next_uniform(0.3, 0.9));
        }
        std::vector<double> y(4);
        for (auto& v : y) v = rng.next_uniform(-2.0, 2.0);
        Table priors(4, 2);
        for (int tt = 0; tt < 4; ++tt) {
            const double a = rng.next_uniform(0.2, 0.8);
            priors(tt, 0) = a;
            priors(tt, 1) = 1.0 - a;
        }
        const auto eq = equalize(y, t, em, priors);
        const auto oracle = oracles::enumerate_posteriors(t, em, priors, y);
        for (int tt = 0; tt < 4; ++tt)
            for (int x = 0; x < 2; ++x)
                CHECK_THAT(eq.joint(tt, x), WithinAbs(oracle.symbol(tt, x), 1e-10));
    }
}

TEST_CASE("MAP decoder") {
    const std::vector<unsigned> gens{07, 05};
    const TrellisSpec code = build_conv_trellis(gens, 2);

    SECTION("near-certain inputs decode without errors") {
        Rng rng(3);
        std::vector<std::uint8_t> info(40);
        for (auto& b : info) b = static_cast<std::uint8_t>(rng.next_bit());
        const auto coded = conv_encode(info, gens, 2);
        Table probs(coded.size(), 2);
        for (std::size_t j = 0; j < coded.size(); ++j) {
            probs(j, coded[j]) = 0.999;
            probs(j, 1 - coded[j]) = 0.001;
        }
        const auto dec = decode(probs, code, static_cast<int>(info.size()));
        CHECK(dec.info_bits == info);
    }

    SECTION("uniform inputs give uniform info posteriors") {
        const Table probs(2 * (10 + 2), 2, 0.5);
        const auto dec = decode(probs, code, 10);
        for (int k = 0; k < 10; ++k) {
            CHECK_THAT(dec.info_posteriors(k, 0), WithinAbs(0.5, 1e-12));
            CHECK_THAT(dec.info_posteriors(k, 1), WithinAbs(0.5, 1e-12));
        }
    }

    SECTION("posteriors match exhaustive codebook enumeration") {
        const int K = 6;
        Rng rng(4);
        Table probs(2 * (K + 2), 2);
        for (std::size_t j = 0; j < probs.rows(); ++j) {
            const double a = rng.next_uniform(0.05, 0.95);
            probs(j, 0) = a;
            probs(j, 1) = 1.0 - a;
        }
        const auto dec = decode(probs, code, K);
        const auto oracle = oracles::enumerate_codebook(gens, 2, K, probs);

        for (int k = 0; k < K; ++k)
            for (int v = 0; v < 2; ++v)
                CHECK_THAT(dec.info_posteriors(k, v), WithinAbs(oracle.info(k, v), 1e-10));

        // coded extrinsic = coded posterior with the input divided out
        for (std::size_t j = 0; j < probs.rows(); ++j) {
            const double e0 = oracle.coded(j, 0) / probs(j, 0);
            const double e1 = oracle.coded(j, 1) / probs(j, 1);
            CHECK_THAT(dec.coded_extrinsic(j, 0), WithinAbs(e0 / (e0 + e1), 1e-10));
        }
    }

    SECTION("shape errors are rejected") {
        CHECK_THROWS_AS(decode(Table(7, 2, 0.5), code, 2), std::invalid_argument);
        CHECK_THROWS_AS(decode(Table(8, 2, 0.5), code, 9), std::invalid_argument);
        CHECK_THROWS_AS(decode(Table(8, 2, 0.5), build_isi_trellis_reduced(2), 2),
                        std::invalid_argument);
    }
}

TEST_CASE("zero-noise end-to-end chain recovers the payload") {
    for (std::uint64_t seed : {1ull, 2ull}) {
        Fixture f({0.407, 0.815, 0.407}, 256, 1e-6, seed);
        ReceiverConfig cfg;
        cfg.mode = ReceiverMode::kJoint;
        cfg.n_turbo_iters = 1;
        cfg.em_iters_per_turbo = 0;
        const auto trace = run_joint(f.frame, f.system(), f.init(0.0), cfg);
        REQUIRE(trace.records.size() == 1);
        REQUIRE(trace.records[0].ber.has_value());
        CHECK(*trace.records[0].ber == 0.0);
    }
}

TEST_CASE("joint receiver trace contract") {
    Fixture f({0.407, 0.815, 0.407}, 128, snr_to_variance(6.0), 11);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 4;

    const auto trace = run_joint(f.frame, f.system(), f.init(0.2), cfg);
    CHECK(trace.records.size() == 4);
    for (const auto& rec : trace.records) {
        CHECK(rec.ber.has_value());
        CHECK(rec.extrinsic_entropy.has_value());
        CHECK(rec.mse >= 0.0);
    }

    SECTION("deterministic given seeds") {
        const auto again = run_joint(f.frame, f.system(), f.init(0.2), cfg);
        CHECK(again == trace);
    }
}

TEST_CASE("first joint iteration equals the first standalone iteration") {
    Fixture f({0.407, 0.815, 0.407}, 128, snr_to_variance(4.0), 12);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 1;
    const auto joint = run_joint(f.frame, f.system(), f.init(0.2), cfg);
    const auto alone = run_standalone(f.frame, f.system(), f.init(0.2), cfg);
    // uniform first-iteration priors make the estimator steps identical
    CHECK(joint.records[0].mse == alone.records[0].mse);
    CHECK(joint.records[0].log_evidence == alone.records[0].log_evidence);
}

TEST_CASE("frozen estimator never touches the emissions") {
    Fixture f({0.407, 0.815, 0.407}, 192, snr_to_variance(5.0), 13);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 5;
    cfg.em_iters_per_turbo = 0;  // plain turbo equalization with true emissions
    const auto trace = run_joint(f.frame, f.system(), f.init(0.0), cfg);
    for (const auto& rec : trace.records) CHECK(rec.mse == 0.0);
    // decoder feedback must not hurt on a clean mid-SNR frame
    CHECK(*trace.records.back().ber <= *trace.records.front().ber);
}

TEST_CASE("standalone trace mirrors run_em") {
    Fixture f({0.407, 0.815, 0.407}, 128, snr_to_variance(4.0), 14);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 6;

    const auto trace = run_standalone(f.frame, f.system(), f.init(0.2), cfg);
    REQUIRE(trace.records.size() == 6);

    const auto est = bw::run_em(f.frame.received, f.isi_reduced, f.init(0.2),
                                uniform_priors(f.frame.received.size()), 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(trace.records[i].mse == est.history[i].mse);
        CHECK(trace.records[i].log_evidence == est.history[i].log_evidence);
        CHECK(trace.records[i].ber.has_value() == (i == 5));  // single final decode
    }
}

TEST_CASE("standalone with exact initialization stays near the truth") {
    Fixture f({0.407, 0.815, 0.407}, 512, snr_to_variance(6.0), 15);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 8;
    const auto trace = run_standalone(f.frame, f.system(), f.init(0.0), cfg);
    for (const auto& rec : trace.records) CHECK(rec.mse < 5e-3);
}

TEST_CASE("conventional baseline matches the reduced standalone estimator") {
    Fixture f({0.407, 0.815, 0.407}, 128, snr_to_variance(4.0), 16);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 5;
    const auto red = run_standalone(f.frame, f.system(), f.init(0.2), cfg);
    const auto conv = run_conventional_bw(f.frame, f.system(), f.init(0.2), cfg);
    REQUIRE(red.records.size() == conv.records.size());
    for (std::size_t i = 0; i < red.records.size(); ++i) {
        CHECK_THAT(red.records[i].mse, WithinAbs(conv.records[i].mse, 1e-9));
        CHECK_THAT(red.records[i].log_evidence,
                   WithinAbs(conv.records[i].log_evidence, 1e-9));
    }
}

TEST_CASE("receiver configuration is validated") {
    Fixture f({0.6, 0.8}, 16, 0.3, 17);
    ReceiverConfig cfg;
    cfg.n_turbo_iters = 0;
    CHECK_THROWS_AS(run_joint(f.frame, f.system(), f.init(0.1), cfg), std::invalid_argument);
    cfg.n_turbo_iters = 1;
    cfg.em_iters_per_turbo = -1;
    CHECK_THROWS_AS(run_joint(f.frame, f.system(), f.init(0.1), cfg), std::invalid_argument);
}
