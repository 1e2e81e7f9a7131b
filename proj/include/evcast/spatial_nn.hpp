#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/features.hpp"
#include "evcast/grid.hpp"
#include "evcast/rand.hpp"

namespace evcast {

/// One training pair for the spatial predictor: a neighborhood feature
/// vector at hour t and the region's aggregated energy at t + delta_t.
struct Sample {
    std::vector<double> x;
    double y = 0.0;
};

struct NNTrainConfig {
    int hidden_dim = 16;
    double learning_rate = 0.01;
    int max_epochs = 2000;
    int patience = 100; // epochs without loss improvement before stopping
    double l2 = 1e-4;
    std::uint64_t rng_seed = 0;
    int delta_t = 1; // hours ahead the targets were shifted when pairing

    void validate() const {
        if (hidden_dim < 1) throw ConfigError("nn: hidden_dim must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("nn: learning rate must be > 0");
        if (max_epochs < 0) throw ConfigError("nn: max_epochs must be >= 0");
        if (patience < 1) throw ConfigError("nn: patience must be >= 1");
        if (l2 < 0.0) throw ConfigError("nn: l2 must be >= 0");
        if (delta_t < 1) throw ConfigError("nn: delta_t must be >= 1");
    }
};

/// Affine standardizer for one feature or the target.
struct Scaler1d {
    double mean = 0.0;
    double std = 1.0;

    double scale(double v) const { return (v - mean) / std; }
    double unscale(double v) const { return v * std + mean; }
    bool operator==(const Scaler1d&) const = default;
};

namespace detail {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Two-layer net in scaled space: sigmoid hidden layer, linear scalar output.
struct RawNet {
    int input_dim = 0;
    int hidden_dim = 0;
    std::vector<double> w1; // hidden_dim x input_dim, row-major
    std::vector<double> b1; // hidden_dim
    std::vector<double> w2; // hidden_dim
    double b2 = 0.0;

    double forward(std::span<const double> x, std::vector<double>* hidden = nullptr) const {
        double out = b2;
        if (hidden) hidden->resize(static_cast<std::size_t>(hidden_dim));
        for (int h = 0; h < hidden_dim; ++h) {
            const double* row = &w1[static_cast<std::size_t>(h) * static_cast<std::size_t>(input_dim)];
            // four independent partial sums so the additions pipeline instead
            // of forming one serial dependency chain over the input
            double z0 = 0.0, z1 = 0.0, z2 = 0.0, z3 = 0.0;
            int i = 0;
            for (; i + 4 <= input_dim; i += 4) {
                z0 += row[i] * x[static_cast<std::size_t>(i)];
                z1 += row[i + 1] * x[static_cast<std::size_t>(i + 1)];
                z2 += row[i + 2] * x[static_cast<std::size_t>(i + 2)];
                z3 += row[i + 3] * x[static_cast<std::size_t>(i + 3)];
            }
            double z = b1[static_cast<std::size_t>(h)] + ((z0 + z1) + (z2 + z3));
            for (; i < input_dim; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
            const double a = sigmoid(z);
            if (hidden) (*hidden)[static_cast<std::size_t>(h)] = a;
            out += w2[static_cast<std::size_t>(h)] * a;
        }
        return out;
    }
};

/// Mean squared error over scaled samples plus l2 * (|w1|^2 + |w2|^2);
/// biases carry no penalty.
inline double nn_loss(const RawNet& net, std::span<const Sample> scaled, double l2) {
    double mse = 0.0;
    for (const auto& s : scaled) {
        const double e = net.forward(s.x) - s.y;
        mse += e * e;
    }
    mse /= static_cast<double>(scaled.size());
    double penalty = 0.0;
    for (double w : net.w1) penalty += w * w;
    for (double w : net.w2) penalty += w * w;
    return mse + l2 * penalty;
}

/// One pass over the samples that accumulates the gradient into g and returns
/// the penalized loss; both match nn_loss / the naive gradient bit for bit.
inline double nn_loss_and_gradient(const RawNet& net, std::span<const Sample> scaled, double l2,
                                   RawNet& g, std::vector<double>& hidden) {
    g.input_dim = net.input_dim;
    g.hidden_dim = net.hidden_dim;
    g.w1.assign(net.w1.size(), 0.0);
    g.b1.assign(net.b1.size(), 0.0);
    g.w2.assign(net.w2.size(), 0.0);
    g.b2 = 0.0;
    const double inv_n = 1.0 / static_cast<double>(scaled.size());
    double mse = 0.0;
    for (const auto& s : scaled) {
        const double pred = net.forward(s.x, &hidden);
        const double e = pred - s.y;
        mse += e * e;
        const double de = 2.0 * e * inv_n;
        g.b2 += de;
        for (int h = 0; h < net.hidden_dim; ++h) {
            const double a = hidden[static_cast<std::size_t>(h)];
            g.w2[static_cast<std::size_t>(h)] += de * a;
            const double dz = de * net.w2[static_cast<std::size_t>(h)] * a * (1.0 - a);
            g.b1[static_cast<std::size_t>(h)] += dz;
            double* row = &g.w1[static_cast<std::size_t>(h) * static_cast<std::size_t>(net.input_dim)];
            for (int i = 0; i < net.input_dim; ++i) row[i] += dz * s.x[static_cast<std::size_t>(i)];
        }
    }
    for (std::size_t i = 0; i < net.w1.size(); ++i) g.w1[i] += 2.0 * l2 * net.w1[i];
    for (std::size_t i = 0; i < net.w2.size(); ++i) g.w2[i] += 2.0 * l2 * net.w2[i];
    mse /= static_cast<double>(scaled.size());
    double penalty = 0.0;
    for (double w : net.w1) penalty += w * w;
    for (double w : net.w2) penalty += w * w;
    return mse + l2 * penalty;
}

inline RawNet nn_gradient(const RawNet& net, std::span<const Sample> scaled, double l2) {
    RawNet g;
    std::vector<double> hidden;
    nn_loss_and_gradient(net, scaled, l2, g, hidden);
    return g;
}

} // namespace detail

struct NNModel {
    detail::RawNet net;
    std::vector<Scaler1d> input_scalers;
    Scaler1d target_scaler;
    NNTrainConfig config; // echo of the training configuration

    int input_dim() const { return net.input_dim; }

    /// kWh prediction for a raw (unscaled) feature vector, clamped at 0.
    double predict(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != net.input_dim)
            throw DataError("nn: input vector has wrong dimension");
        std::vector<double> scaled(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = input_scalers[i].scale(x[i]);
        return std::max(0.0, target_scaler.unscale(net.forward(scaled)));
    }
};

inline double forward(const NNModel& model, std::span<const double> x) { return model.predict(x); }

/// Epoch bookkeeping reported by train / retrain_online.
struct TrainInfo {
    int epochs = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0; // loss of the returned (best) parameters
};

namespace detail {

inline void check_samples(std::span<const Sample> data) {
    if (data.size() < 2) throw DataError("nn: need at least two training pairs");
    const std::size_t dim = data.front().x.size();
    if (dim == 0) throw DataError("nn: empty input vectors");
    for (const auto& s : data) {
        if (s.x.size() != dim) throw DataError("nn: inconsistent input dimensions");
        if (!std::isfinite(s.y)) throw DataError("nn: non-finite target");
        for (double v : s.x)
            if (!std::isfinite(v)) throw DataError("nn: non-finite feature");
    }
}

// Full-batch descent is order-independent up to floating-point association,
// so a canonical sample order makes training exactly permutation-invariant.
inline std::vector<Sample> canonical_order(std::span<const Sample> data) {
    std::vector<Sample> sorted(data.begin(), data.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Sample& a, const Sample& b) {
        if (a.x != b.x) return a.x < b.x;
        return a.y < b.y;
    });
    return sorted;
}

inline TrainInfo descend(RawNet& net, std::span<const Sample> scaled, const NNTrainConfig& cfg) {
    TrainInfo info;
    RawNet best = net;
    RawNet g;
    std::vector<double> hidden;
    // Each fused call yields the loss at the current parameters together with
    // the gradient for the next step, so every epoch costs one data pass.
    double best_loss = nn_loss_and_gradient(net, scaled, cfg.l2, g, hidden);
    info.initial_loss = best_loss;
    int bad_epochs = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = 0; i < net.w1.size(); ++i) net.w1[i] -= cfg.learning_rate * g.w1[i];
        for (std::size_t i = 0; i < net.b1.size(); ++i) net.b1[i] -= cfg.learning_rate * g.b1[i];
        for (std::size_t i = 0; i < net.w2.size(); ++i) net.w2[i] -= cfg.learning_rate * g.w2[i];
        net.b2 -= cfg.learning_rate * g.b2;
        const double loss = nn_loss_and_gradient(net, scaled, cfg.l2, g, hidden);
        if (!std::isfinite(loss)) throw NumericError("nn: training loss diverged");
        ++info.epochs;
        if (loss < best_loss * (1.0 - 1e-9)) {
            best = net;
            best_loss = loss;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }
    net = best; // return the best parameters seen, not the last iterate
    info.final_loss = best_loss;
    return info;
}

inline std::vector<Sample> apply_scalers(std::span<const Sample> data,
                                         std::span<const Scaler1d> input_scalers,
                                         const Scaler1d& target_scaler) {
    std::vector<Sample> scaled(data.begin(), data.end());
    for (auto& s : scaled) {
        for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = input_scalers[i].scale(s.x[i]);
        s.y = target_scaler.scale(s.y);
    }
    return scaled;
}

} // namespace detail

/// Full-batch gradient descent on the standardized samples. Inputs are
/// standardized per feature (constant features pass through unchanged);
/// targets are standardized so kWh magnitudes cannot saturate the hidden
/// layer. Deterministic for a given seed, and invariant to sample order.
inline NNModel train(std::span<const Sample> data, const NNTrainConfig& cfg,
                     TrainInfo* info = nullptr) {
    cfg.validate();
    detail::check_samples(data);
    const std::vector<Sample> sorted = detail::canonical_order(data);
    const auto n = static_cast<double>(sorted.size());
    const auto dim = sorted.front().x.size();

    NNModel model;
    model.config = cfg;
    model.input_scalers.assign(dim, Scaler1d{});
    for (std::size_t i = 0; i < dim; ++i) {
        double mean = 0.0;
        for (const auto& s : sorted) mean += s.x[i];
        mean /= n;
        double var = 0.0;
        for (const auto& s : sorted) var += (s.x[i] - mean) * (s.x[i] - mean);
        const double sd = std::sqrt(var / n);
        if (sd > 0.0) model.input_scalers[i] = {mean, sd};
    }
    {
        double mean = 0.0;
        for (const auto& s : sorted) mean += s.y;
        mean /= n;
        double var = 0.0;
        for (const auto& s : sorted) var += (s.y - mean) * (s.y - mean);
        const double sd = std::sqrt(var / n);
        model.target_scaler = {mean, sd > 0.0 ? sd : 1.0};
    }

    auto& net = model.net;
    net.input_dim = static_cast<int>(dim);
    net.hidden_dim = cfg.hidden_dim;
    net.w1.resize(static_cast<std::size_t>(cfg.hidden_dim) * dim);
    net.b1.assign(static_cast<std::size_t>(cfg.hidden_dim), 0.0);
    net.w2.resize(static_cast<std::size_t>(cfg.hidden_dim));
    net.b2 = 0.0;
    auto rng = make_rng(cfg.rng_seed, 0);
    const double r1 = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto& w : net.w1) w = uniform(rng, -r1, r1);
    const double r2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    for (auto& w : net.w2) w = uniform(rng, -r2, r2);

    const std::vector<Sample> scaled =
        detail::apply_scalers(sorted, model.input_scalers, model.target_scaler);
    const TrainInfo ti = detail::descend(net, scaled, cfg);
    if (info) *info = ti;
    return model;
}

/// Retrains on the augmented dataset, warm-starting from the model's current
/// parameters and keeping its original scalers. Because the best iterate is
/// returned, the loss on the augmented set never exceeds the warm-start loss.
inline NNModel retrain_online(const NNModel& model, std::span<const Sample> augmented,
                              const NNTrainConfig& cfg, TrainInfo* info = nullptr) {
    cfg.validate();
    detail::check_samples(augmented);
    if (static_cast<int>(augmented.front().x.size()) != model.net.input_dim)
        throw DataError("nn: augmented data dimension does not match the model");
    NNModel next = model;
    next.config = cfg;
    const std::vector<Sample> sorted = detail::canonical_order(augmented);
    const std::vector<Sample> scaled =
        detail::apply_scalers(sorted, next.input_scalers, next.target_scaler);
    const TrainInfo ti = detail::descend(next.net, scaled, cfg);
    if (info) *info = ti;
    return next;
}

/// Concatenates the selected feature groups of region k's eight neighbors in
/// ascending region-id order; k's own features are excluded. Group order
/// within a neighbor: f_n; v_ave, v_var; d1..d4, d_var; e_sum, e_var.
inline std::vector<double> assemble_input(const FeatureTable& features, const RegionGrid& grid,
                                          int region, std::int64_t day, int hour,
                                          const FeatureSubset& subset) {
    if (subset.empty()) throw ConfigError("assemble_input: empty feature subset");
    const auto neighbors = grid.neighbor_set(region);
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(subset.width()) * neighbors.size());
    for (int nb : neighbors) {
        const SpatialFeatureRow& r = features.at(nb, day, hour);
        if (subset.f_n) x.push_back(r.f_n);
        if (subset.f_v) {
            x.push_back(r.v_ave);
            x.push_back(r.v_var);
        }
        if (subset.f_d) {
            x.push_back(r.d1);
            x.push_back(r.d2);
            x.push_back(r.d3);
            x.push_back(r.d4);
            x.push_back(r.d_var);
        }
        if (subset.f_e) {
            x.push_back(r.e_sum);
            x.push_back(r.e_var);
        }
    }
    return x;
}

} // namespace evcast
