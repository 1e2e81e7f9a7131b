#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>

#include "evcast/rand.hpp"
#include "evcast/temporal_crf.hpp"

using namespace evcast;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct EnumerationOracle {
    double log_z = 0.0;
    std::vector<double> p;    // T x L position marginals
    std::vector<double> pair; // (T-1) x L x L pairwise marginals
};

// Brute force over all L^T labelings; feasible for the tiny models used here.
EnumerationOracle enumerate_marginals(const CrfModel& model, const std::vector<int>& x,
                                      std::optional<int> clamp = std::nullopt) {
    const int T = static_cast<int>(x.size());
    const int L = model.num_labels;
    const auto tables = score_tables(model, x);
    EnumerationOracle out;
    out.p.assign(static_cast<std::size_t>(T * L), 0.0);
    out.pair.assign(static_cast<std::size_t>((T - 1) * L * L), 0.0);
    double z = 0.0;
    std::vector<int> y(static_cast<std::size_t>(T), 1);
    while (true) {
        if (!clamp || y[0] == *clamp) {
            const double w = std::exp(sequence_score(tables, y));
            z += w;
            for (int t = 0; t < T; ++t)
                out.p[static_cast<std::size_t>(t * L + y[static_cast<std::size_t>(t)] - 1)] += w;
            for (int t = 0; t + 1 < T; ++t)
                out.pair[static_cast<std::size_t>(
                    (t * L + y[static_cast<std::size_t>(t)] - 1) * L +
                    y[static_cast<std::size_t>(t + 1)] - 1)] += w;
        }
        int pos = T - 1;
        while (pos >= 0 && ++y[static_cast<std::size_t>(pos)] > L) {
            y[static_cast<std::size_t>(pos)] = 1;
            --pos;
        }
        if (pos < 0) break;
    }
    for (double& v : out.p) v /= z;
    for (double& v : out.pair) v /= z;
    out.log_z = std::log(z);
    return out;
}

CrfModel random_model(int L, int H, std::mt19937_64& rng, double l2 = 0.0) {
    CrfModel m(L, H, l2);
    for (double& w : m.mu) w = uniform(rng, -1.5, 1.5);
    for (double& w : m.gamma) w = uniform(rng, -1.5, 1.5);
    return m;
}

std::vector<int> random_hours(int T, int H, std::mt19937_64& rng) {
    std::vector<int> x(static_cast<std::size_t>(T));
    for (int& h : x) h = 1 + static_cast<int>(uniform(rng, 0.0, static_cast<double>(H)));
    return x;
}

} // namespace

TEST_CASE("score tables expose node and transition weights", "[crf]") {
    CrfModel m(4, 8, 0.1);
    m.mu_at(3, 7) = 2.0;
    m.gamma_at(2, 4) = -0.5;
    std::vector<int> x{7, 1};
    auto tables = score_tables(m, x);
    CHECK(tables.node_at(0, 3) == 2.0);
    CHECK(tables.node_at(0, 1) == 0.0);
    CHECK(tables.node_at(1, 3) == 0.0); // hour 1 carries no weight
    CHECK(tables.edge_at(2, 4) == -0.5);

    std::vector<int> y{3, 2};
    // mu(3, hour 7) + mu(2, hour 1) + gamma(3 -> 2) = 2 + 0 + 0
    CHECK(sequence_score(tables, y) == 2.0);
    std::vector<int> wrong_len{3};
    CHECK_THROWS_AS(sequence_score(tables, wrong_len), DataError);
    std::vector<int> bad_hour{9, 1};
    CHECK_THROWS_AS(score_tables(m, bad_hour), DataError);
}

TEST_CASE("a hand-built two-step chain scores exactly", "[crf]") {
    CrfModel m(2, 2, 0.0);
    m.mu_at(1, 1) = 0.3;
    m.mu_at(2, 2) = 0.2;
    m.gamma_at(1, 2) = 0.5;
    std::vector<int> x{1, 2}, y{1, 2};
    CHECK(sequence_score(score_tables(m, x), y) == 1.0);
}

TEST_CASE("zero weights give uniform marginals and a closed-form log Z", "[crf]") {
    CrfModel m(10, 24, 0.1);
    std::vector<int> x(24);
    for (int h = 0; h < 24; ++h) x[static_cast<std::size_t>(h)] = h + 1;
    auto marg = forward_backward(m, x);
    CHECK_THAT(marg.log_z, WithinRel(24.0 * std::log(10.0), 1e-12));
    for (int t = 0; t < 24; ++t)
        for (int i = 1; i <= 10; ++i) CHECK_THAT(marg.prob(t, i), WithinRel(0.1, 1e-12));

    LabeledSequence seq{x, std::vector<int>(24, 1)};
    std::vector<LabeledSequence> data{seq};
    CHECK_THAT(log_likelihood(m, data), WithinRel(-55.262042231857104, 1e-12));
}

TEST_CASE("clamping the first position is an exact point mass", "[crf]") {
    auto rng = make_rng(7);
    CrfModel m = random_model(3, 4, rng);
    std::vector<int> x{2, 4, 1};
    auto marg = forward_backward(m, x, 2);
    CHECK(marg.prob(0, 2) == 1.0);
    CHECK(marg.prob(0, 1) == 0.0);
    CHECK(marg.prob(0, 3) == 0.0);
    for (int t = 1; t < 3; ++t) {
        double total = 0.0;
        for (int i = 1; i <= 3; ++i) total += marg.prob(t, i);
        CHECK_THAT(total, WithinAbs(1.0, 1e-12));
    }
    CHECK_THROWS_AS(forward_backward(m, x, 0), DataError);
    CHECK_THROWS_AS(forward_backward(m, x, 4), DataError);
}

TEST_CASE("forward-backward agrees with brute-force enumeration", "[crf]") {
    auto rng = make_rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const int L = 2 + static_cast<int>(uniform(rng, 0.0, 2.0));  // 2..3
        const int T = 2 + static_cast<int>(uniform(rng, 0.0, 5.0));  // 2..6
        const int H = 4;
        CrfModel m = random_model(L, H, rng);
        auto x = random_hours(T, H, rng);
        const int clamp_label = trial % 3 == 0 ? 1 + trial % L : 0; // 0 = unclamped

        auto oracle = clamp_label ? enumerate_marginals(m, x, clamp_label)
                                  : enumerate_marginals(m, x);
        auto marg = clamp_label ? forward_backward(m, x, clamp_label) : forward_backward(m, x);

        REQUIRE_THAT(marg.log_z, WithinRel(oracle.log_z, 1e-9));
        for (int t = 0; t < T; ++t)
            for (int i = 1; i <= L; ++i)
                REQUIRE_THAT(marg.prob(t, i),
                             WithinAbs(oracle.p[static_cast<std::size_t>(t * L + i - 1)], 1e-9));
        for (int t = 0; t + 1 < T; ++t)
            for (int i = 1; i <= L; ++i)
                for (int j = 1; j <= L; ++j)
                    REQUIRE_THAT(marg.pair_prob(t, i, j),
                                 WithinAbs(oracle.pair[static_cast<std::size_t>(
                                               (t * L + i - 1) * L + j - 1)],
                                           1e-9));

        // Pairwise marginals must be consistent with position marginals.
        for (int t = 0; t + 1 < T; ++t)
            for (int i = 1; i <= L; ++i) {
                double row = 0.0;
                for (int j = 1; j <= L; ++j) row += marg.pair_prob(t, i, j);
                REQUIRE_THAT(row, WithinAbs(marg.prob(t, i), 1e-9));
            }
    }
}

TEST_CASE("analytic gradient matches central finite differences", "[crf]") {
    auto rng = make_rng(13);
    const int L = 3, H = 4;
    CrfModel m = random_model(L, H, rng, 0.1);
    std::vector<LabeledSequence> data;
    for (int s = 0; s < 2; ++s) {
        LabeledSequence seq;
        seq.x = random_hours(5, H, rng);
        for (int t = 0; t < 5; ++t)
            seq.y.push_back(1 + static_cast<int>(uniform(rng, 0.0, static_cast<double>(L))));
        data.push_back(seq);
    }
    const CrfGradient g = gradient(m, data);
    const double h = 1e-6;
    auto check_coord = [&](std::vector<double>& theta, std::size_t idx, double analytic) {
        const double saved = theta[idx];
        theta[idx] = saved + h;
        const double up = log_likelihood(m, data);
        theta[idx] = saved - h;
        const double down = log_likelihood(m, data);
        theta[idx] = saved;
        const double fd = (up - down) / (2.0 * h);
        REQUIRE_THAT(analytic, WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
    };
    for (std::size_t i = 0; i < m.mu.size(); ++i) check_coord(m.mu, i, g.mu[i]);
    for (std::size_t i = 0; i < m.gamma.size(); ++i) check_coord(m.gamma, i, g.gamma[i]);
}

TEST_CASE("the l2 term contributes exactly -2*l2*theta to the gradient", "[crf]") {
    auto rng = make_rng(17);
    CrfModel penalized = random_model(3, 4, rng, 0.25);
    CrfModel plain = penalized;
    plain.l2 = 0.0;
    std::vector<LabeledSequence> data{{{1, 2, 3}, {1, 3, 2}}};
    auto gp = gradient(penalized, data);
    auto g0 = gradient(plain, data);
    for (std::size_t i = 0; i < gp.mu.size(); ++i)
        CHECK_THAT(gp.mu[i] - g0.mu[i], WithinAbs(-0.5 * penalized.mu[i], 1e-12));
    for (std::size_t i = 0; i < gp.gamma.size(); ++i)
        CHECK_THAT(gp.gamma[i] - g0.gamma[i], WithinAbs(-0.5 * penalized.gamma[i], 1e-12));
}

TEST_CASE("duplicating the data doubles the unpenalized objective", "[crf]") {
    auto rng = make_rng(19);
    CrfModel m = random_model(3, 4, rng, 0.0);
    std::vector<LabeledSequence> once{{{1, 2, 4}, {2, 1, 3}}};
    std::vector<LabeledSequence> twice{once[0], once[0]};
    CHECK_THAT(log_likelihood(m, twice), WithinRel(2.0 * log_likelihood(m, once), 1e-12));
}

TEST_CASE("training ascends monotonically and is deterministic", "[crf]") {
    std::vector<LabeledSequence> data{
        {{1, 2, 3, 4}, {1, 2, 3, 2}},
        {{1, 2, 3, 4}, {1, 2, 3, 3}},
        {{1, 2, 3, 4}, {1, 1, 3, 2}},
    };
    CrfTrainConfig cfg;
    cfg.num_labels = 3;
    cfg.num_hours = 4;
    cfg.l2 = 0.05;
    cfg.max_iters = 60;

    std::vector<double> history;
    CrfModel m = train_crf(data, cfg, &history);
    REQUIRE(history.size() >= 2);
    for (std::size_t i = 1; i < history.size(); ++i) REQUIRE(history[i] >= history[i - 1]);
    CHECK(history.back() > history.front());

    CrfModel again = train_crf(data, cfg);
    CHECK(m.mu == again.mu);
    CHECK(m.gamma == again.gamma);

    CrfTrainConfig frozen = cfg;
    frozen.max_iters = 0;
    CrfModel zero = train_crf(data, frozen);
    for (double w : zero.mu) CHECK(w == 0.0);
    for (double w : zero.gamma) CHECK(w == 0.0);
}

TEST_CASE("training recovers a single deterministic sequence", "[crf]") {
    std::vector<LabeledSequence> data{{{1, 2, 3, 4}, {2, 3, 1, 2}}};
    CrfTrainConfig cfg;
    cfg.num_labels = 3;
    cfg.num_hours = 4;
    cfg.l2 = 0.01;
    cfg.max_iters = 200;
    cfg.tol = 1e-6;
    CrfModel m = train_crf(data, cfg);
    auto marg = forward_backward(m, data[0].x);
    for (std::size_t t = 0; t < data[0].y.size(); ++t) {
        int best = 1;
        for (int i = 2; i <= 3; ++i)
            if (marg.prob(static_cast<int>(t), i) > marg.prob(static_cast<int>(t), best)) best = i;
        CHECK(best == data[0].y[t]);
    }
}

TEST_CASE("malformed sequences and configs are rejected", "[crf]") {
    CrfTrainConfig cfg;
    cfg.num_labels = 3;
    cfg.num_hours = 4;
    CHECK_THROWS_AS(train_crf({}, cfg), DataError);

    std::vector<LabeledSequence> ragged{{{1, 2}, {1}}};
    CHECK_THROWS_AS(train_crf(ragged, cfg), DataError);
    std::vector<LabeledSequence> bad_hour{{{1, 5}, {1, 2}}};
    CHECK_THROWS_AS(train_crf(bad_hour, cfg), DataError);
    std::vector<LabeledSequence> bad_label{{{1, 2}, {1, 4}}};
    CHECK_THROWS_AS(train_crf(bad_label, cfg), DataError);
    std::vector<LabeledSequence> empty_seq{{{}, {}}};
    CHECK_THROWS_AS(train_crf(empty_seq, cfg), DataError);

    CrfTrainConfig bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.l2 = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK_THROWS_AS(CrfModel(0, 24, 0.1), ConfigError);
    CHECK_THROWS_AS(CrfModel(10, 24, -1.0), ConfigError);
}

TEST_CASE("day prediction blends level values by marginal probability", "[crf]") {
    CrfModel m(10, 24, 0.1); // zero weights: uniform after the clamped start
    LevelValueTable levels;
    levels.y = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};

    auto pred = predict_day(m, levels, 12.0); // nearest level is 1 (value 10)
    REQUIRE(pred.size() == 24);
    CHECK(pred[0] == 10.0);
    for (std::size_t t = 1; t < 24; ++t) CHECK_THAT(pred[t], WithinRel(55.0, 1e-12));

    LevelValueTable flat;
    flat.y.assign(10, 42.0);
    auto flat_pred = predict_day(m, flat, 99.0);
    for (double v : flat_pred) CHECK_THAT(v, WithinRel(42.0, 1e-12));

    LevelValueTable wrong;
    wrong.y.assign(9, 1.0);
    CHECK_THROWS_AS(predict_day(m, wrong, 1.0), DataError);
}
