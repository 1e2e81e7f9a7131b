#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/features.hpp"

namespace evcast {

/// Linear-chain CRF over discrete energy levels with hour-of-day
/// observations. Node weights mu couple a label to the observed hour;
/// transition weights gamma couple consecutive labels and are shared across
/// positions.
struct CrfModel {
    int num_labels = 10;
    int num_hours = 24;
    std::vector<double> mu;    // num_labels x num_hours
    std::vector<double> gamma; // num_labels x num_labels
    double l2 = 0.1;

    CrfModel() = default;
    CrfModel(int labels, int hours, double l2_penalty)
        : num_labels(labels),
          num_hours(hours),
          mu(static_cast<std::size_t>(labels) * static_cast<std::size_t>(hours), 0.0),
          gamma(static_cast<std::size_t>(labels) * static_cast<std::size_t>(labels), 0.0),
          l2(l2_penalty) {
        if (labels < 1 || hours < 1) throw ConfigError("crf: need at least one label and hour");
        if (l2_penalty < 0.0) throw ConfigError("crf: l2 penalty must be >= 0");
    }

    /// label in 1..num_labels, hour in 1..num_hours
    double& mu_at(int label, int hour) {
        return mu[static_cast<std::size_t>(label - 1) * static_cast<std::size_t>(num_hours) +
                  static_cast<std::size_t>(hour - 1)];
    }
    double mu_at(int label, int hour) const {
        return mu[static_cast<std::size_t>(label - 1) * static_cast<std::size_t>(num_hours) +
                  static_cast<std::size_t>(hour - 1)];
    }
    double& gamma_at(int from, int to) {
        return gamma[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(num_labels) +
                     static_cast<std::size_t>(to - 1)];
    }
    double gamma_at(int from, int to) const {
        return gamma[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(num_labels) +
                     static_cast<std::size_t>(to - 1)];
    }
};

/// One training sequence: hourly observations x (hour indices) and their
/// labels y.
struct LabeledSequence {
    std::vector<int> x;
    std::vector<int> y;
};

/// Unnormalized log-potentials for one observation sequence.
struct ScoreTables {
    int length = 0;
    int num_labels = 0;
    std::vector<double> node; // length x num_labels
    std::vector<double> edge; // num_labels x num_labels

    double node_at(int t, int label) const { // t 0-based, label 1-based
        return node[static_cast<std::size_t>(t) * static_cast<std::size_t>(num_labels) +
                    static_cast<std::size_t>(label - 1)];
    }
    double edge_at(int from, int to) const {
        return edge[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(num_labels) +
                    static_cast<std::size_t>(to - 1)];
    }
};

/// Position and pairwise marginals from forward-backward, plus log Z.
struct MarginalTable {
    int length = 0;
    int num_labels = 0;
    std::vector<double> p;        // length x num_labels
    std::vector<double> pairwise; // (length-1) x num_labels x num_labels
    double log_z = 0.0;

    double prob(int t, int label) const { // t 0-based, label 1-based
        return p[static_cast<std::size_t>(t) * static_cast<std::size_t>(num_labels) +
                 static_cast<std::size_t>(label - 1)];
    }
    /// P(Y_t = from, Y_{t+1} = to); t in 0..length-2
    double pair_prob(int t, int from, int to) const {
        const auto L = static_cast<std::size_t>(num_labels);
        return pairwise[(static_cast<std::size_t>(t) * L + static_cast<std::size_t>(from - 1)) * L +
                        static_cast<std::size_t>(to - 1)];
    }
};

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline void check_sequence(const CrfModel& model, const LabeledSequence& seq) {
    if (seq.x.size() != seq.y.size() || seq.x.empty())
        throw DataError("crf: observation and label sequences must be equal-length and non-empty");
    for (int h : seq.x)
        if (h < 1 || h > model.num_hours) throw DataError("crf: hour observation out of range");
    for (int l : seq.y)
        if (l < 1 || l > model.num_labels) throw DataError("crf: label out of range");
}

} // namespace detail

inline ScoreTables score_tables(const CrfModel& model, std::span<const int> x) {
    ScoreTables t;
    t.length = static_cast<int>(x.size());
    t.num_labels = model.num_labels;
    t.node.resize(x.size() * static_cast<std::size_t>(model.num_labels));
    for (std::size_t pos = 0; pos < x.size(); ++pos) {
        if (x[pos] < 1 || x[pos] > model.num_hours)
            throw DataError("crf: hour observation out of range");
        for (int i = 1; i <= model.num_labels; ++i)
            t.node[pos * static_cast<std::size_t>(model.num_labels) +
                   static_cast<std::size_t>(i - 1)] = model.mu_at(i, x[pos]);
    }
    t.edge = model.gamma;
    return t;
}

/// Unnormalized log-score of a labeling under the given potentials.
inline double sequence_score(const ScoreTables& tables, std::span<const int> y) {
    if (static_cast<int>(y.size()) != tables.length)
        throw DataError("crf: labeling length does not match the score tables");
    double s = 0.0;
    for (int t = 0; t < tables.length; ++t) {
        s += tables.node_at(t, y[static_cast<std::size_t>(t)]);
        if (t > 0) s += tables.edge_at(y[static_cast<std::size_t>(t - 1)], y[static_cast<std::size_t>(t)]);
    }
    return s;
}

/// Log-space forward-backward. When clamp_first is set, all mass at the
/// first position is forced onto that label, which is how a known initial
/// energy level enters a day's prediction.
inline MarginalTable forward_backward(const CrfModel& model, std::span<const int> x,
                                      std::optional<int> clamp_first = std::nullopt) {
    const ScoreTables tables = score_tables(model, x);
    const int T = tables.length;
    const int L = model.num_labels;
    if (T == 0) throw DataError("crf: empty observation sequence");
    if (clamp_first && (*clamp_first < 1 || *clamp_first > L))
        throw DataError("crf: clamp label out of range");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const auto Ls = static_cast<std::size_t>(L);

    std::vector<double> node0(Ls); // first-position scores after clamping
    for (int i = 1; i <= L; ++i)
        node0[static_cast<std::size_t>(i - 1)] =
            (clamp_first && i != *clamp_first) ? neg_inf : tables.node_at(0, i);

    std::vector<double> alpha(static_cast<std::size_t>(T) * Ls);
    std::vector<double> beta(static_cast<std::size_t>(T) * Ls);
    std::vector<double> tmp(Ls);
    for (int i = 0; i < L; ++i) alpha[static_cast<std::size_t>(i)] = node0[static_cast<std::size_t>(i)];
    for (int t = 1; t < T; ++t) {
        for (int i = 1; i <= L; ++i) {
            for (int j = 1; j <= L; ++j)
                tmp[static_cast<std::size_t>(j - 1)] =
                    alpha[static_cast<std::size_t>(t - 1) * Ls + static_cast<std::size_t>(j - 1)] +
                    tables.edge_at(j, i);
            alpha[static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i - 1)] =
                tables.node_at(t, i) + detail::log_sum_exp(tmp);
        }
    }
    for (int i = 0; i < L; ++i) beta[static_cast<std::size_t>(T - 1) * Ls + static_cast<std::size_t>(i)] = 0.0;
    for (int t = T - 2; t >= 0; --t) {
        for (int i = 1; i <= L; ++i) {
            for (int j = 1; j <= L; ++j)
                tmp[static_cast<std::size_t>(j - 1)] =
                    tables.edge_at(i, j) + tables.node_at(t + 1, j) +
                    beta[static_cast<std::size_t>(t + 1) * Ls + static_cast<std::size_t>(j - 1)];
            beta[static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i - 1)] =
                detail::log_sum_exp(tmp);
        }
    }

    MarginalTable m;
    m.length = T;
    m.num_labels = L;
    m.log_z = detail::log_sum_exp(
        std::span<const double>(alpha).subspan(static_cast<std::size_t>(T - 1) * Ls, Ls));
    if (!std::isfinite(m.log_z)) throw NumericError("crf: normalization constant is not finite");

    m.p.resize(static_cast<std::size_t>(T) * Ls);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < L; ++i)
            m.p[static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i)] =
                std::exp(alpha[static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i)] +
                         beta[static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i)] -
                         m.log_z);
    if (clamp_first) {
        // exact point mass, independent of rounding in alpha/beta
        for (int i = 0; i < L; ++i) m.p[static_cast<std::size_t>(i)] = 0.0;
        m.p[static_cast<std::size_t>(*clamp_first - 1)] = 1.0;
    }

    if (T > 1) {
        m.pairwise.resize(static_cast<std::size_t>(T - 1) * Ls * Ls);
        for (int t = 0; t + 1 < T; ++t)
            for (int i = 1; i <= L; ++i)
                for (int j = 1; j <= L; ++j)
                    m.pairwise[(static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i - 1)) * Ls +
                               static_cast<std::size_t>(j - 1)] =
                        std::exp(alpha[static_cast<std::size_t>(t) * Ls + static_cast<std::size_t>(i - 1)] +
                                 tables.edge_at(i, j) + tables.node_at(t + 1, j) +
                                 beta[static_cast<std::size_t>(t + 1) * Ls + static_cast<std::size_t>(j - 1)] -
                                 m.log_z);
    }
    return m;
}

/// L2-penalized conditional log-likelihood of the labeled sequences.
inline double log_likelihood(const CrfModel& model, std::span<const LabeledSequence> data) {
    if (data.empty()) throw DataError("crf: no training sequences");
    double ll = 0.0;
    for (const auto& seq : data) {
        detail::check_sequence(model, seq);
        const ScoreTables tables = score_tables(model, seq.x);
        const MarginalTable m = forward_backward(model, seq.x);
        ll += sequence_score(tables, seq.y) - m.log_z;
    }
    double norm2 = 0.0;
    for (double w : model.mu) norm2 += w * w;
    for (double w : model.gamma) norm2 += w * w;
    return ll - model.l2 * norm2;
}

struct CrfGradient {
    std::vector<double> mu;
    std::vector<double> gamma;

    double max_abs() const {
        double m = 0.0;
        for (double g : mu) m = std::max(m, std::abs(g));
        for (double g : gamma) m = std::max(m, std::abs(g));
        return m;
    }
};

/// Gradient of the penalized log-likelihood: empirical feature counts minus
/// expected counts minus 2*l2*theta.
inline CrfGradient gradient(const CrfModel& model, std::span<const LabeledSequence> data) {
    if (data.empty()) throw DataError("crf: no training sequences");
    CrfGradient g;
    g.mu.assign(model.mu.size(), 0.0);
    g.gamma.assign(model.gamma.size(), 0.0);
    const auto L = static_cast<std::size_t>(model.num_labels);
    const auto H = static_cast<std::size_t>(model.num_hours);
    for (const auto& seq : data) {
        detail::check_sequence(model, seq);
        const MarginalTable m = forward_backward(model, seq.x);
        for (std::size_t t = 0; t < seq.x.size(); ++t) {
            const auto hour = static_cast<std::size_t>(seq.x[t] - 1);
            g.mu[static_cast<std::size_t>(seq.y[t] - 1) * H + hour] += 1.0;
            for (std::size_t i = 0; i < L; ++i)
                g.mu[i * H + hour] -= m.prob(static_cast<int>(t), static_cast<int>(i) + 1);
            if (t > 0) {
                g.gamma[static_cast<std::size_t>(seq.y[t - 1] - 1) * L +
                        static_cast<std::size_t>(seq.y[t] - 1)] += 1.0;
                for (std::size_t i = 0; i < L; ++i)
                    for (std::size_t j = 0; j < L; ++j)
                        g.gamma[i * L + j] -= m.pair_prob(static_cast<int>(t) - 1,
                                                          static_cast<int>(i) + 1,
                                                          static_cast<int>(j) + 1);
            }
        }
    }
    for (std::size_t i = 0; i < g.mu.size(); ++i) g.mu[i] -= 2.0 * model.l2 * model.mu[i];
    for (std::size_t i = 0; i < g.gamma.size(); ++i) g.gamma[i] -= 2.0 * model.l2 * model.gamma[i];
    return g;
}

struct CrfTrainConfig {
    int num_labels = 10;
    int num_hours = 24;
    double l2 = 0.1;
    double learning_rate = 0.5; // initial step; halved until ascent holds
    int max_iters = 500;
    double tol = 1e-4;          // stop when the gradient's max-norm drops below
    std::uint64_t rng_seed = 0; // reserved; training is deterministic from zero init

    void validate() const {
        if (num_labels < 1 || num_hours < 1) throw ConfigError("crf: need >= 1 label and hour");
        if (l2 < 0.0) throw ConfigError("crf: l2 must be >= 0");
        if (learning_rate <= 0.0) throw ConfigError("crf: learning rate must be > 0");
        if (max_iters < 0) throw ConfigError("crf: max_iters must be >= 0");
        if (tol <= 0.0) throw ConfigError("crf: tol must be > 0");
    }
};

/// Trains by gradient ascent from zero weights. Each iteration backtracks
/// (halving the step) until the penalized log-likelihood does not decrease,
/// so the objective is non-decreasing across iterations.
inline CrfModel train_crf(std::span<const LabeledSequence> data, const CrfTrainConfig& cfg,
                          std::vector<double>* objective_history = nullptr) {
    cfg.validate();
    if (data.empty()) throw DataError("crf: no training sequences");
    CrfModel model(cfg.num_labels, cfg.num_hours, cfg.l2);
    for (const auto& seq : data) detail::check_sequence(model, seq);

    double ll = log_likelihood(model, data);
    if (objective_history) objective_history->push_back(ll);
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const CrfGradient g = gradient(model, data);
        if (g.max_abs() < cfg.tol) break;
        double step = cfg.learning_rate;
        CrfModel cand = model;
        double cand_ll = ll;
        bool accepted = false;
        while (step > 1e-12) {
            for (std::size_t i = 0; i < model.mu.size(); ++i)
                cand.mu[i] = model.mu[i] + step * g.mu[i];
            for (std::size_t i = 0; i < model.gamma.size(); ++i)
                cand.gamma[i] = model.gamma[i] + step * g.gamma[i];
            cand_ll = log_likelihood(cand, data);
            if (cand_ll >= ll) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // no improving step exists at this scale
        model.mu.swap(cand.mu);
        model.gamma.swap(cand.gamma);
        ll = cand_ll;
        if (objective_history) objective_history->push_back(ll);
    }
    return model;
}

/// Expected kWh for each hour of a day: marginal label probabilities times
/// the level-value table, with the first position clamped to the level
/// nearest the known initial energy.
inline std::vector<double> predict_day(const CrfModel& model, const LevelValueTable& levels,
                                       double initial_energy_kwh) {
    if (static_cast<int>(levels.y.size()) != model.num_labels)
        throw DataError("crf: level-value table size does not match the model");
    std::vector<int> x(static_cast<std::size_t>(model.num_hours));
    for (int h = 0; h < model.num_hours; ++h) x[static_cast<std::size_t>(h)] = h + 1;
    const int clamp = nearest_level(levels, initial_energy_kwh);
    const MarginalTable m = forward_backward(model, x, clamp);
    std::vector<double> out(static_cast<std::size_t>(model.num_hours), 0.0);
    for (int t = 0; t < model.num_hours; ++t)
        for (int i = 1; i <= model.num_labels; ++i)
            out[static_cast<std::size_t>(t)] += m.prob(t, i) * levels.y[static_cast<std::size_t>(i - 1)];
    return out;
}

} // namespace evcast
