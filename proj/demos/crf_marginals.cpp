// Uses the sequence model on its own: fit two toy label sequences, then
// print the per-hour marginal distribution with the first hour clamped to a
// known starting level.

#include <iomanip>
#include <iostream>
#include <vector>

#include "evcast/temporal_crf.hpp"

int main() {
    using namespace evcast;

    // three energy levels over a six-hour "day" that peaks at hour 4
    const std::vector<LabeledSequence> data{
        {{1, 2, 3, 4, 5, 6}, {1, 1, 2, 3, 2, 1}},
        {{1, 2, 3, 4, 5, 6}, {1, 2, 2, 3, 2, 1}},
    };

    CrfTrainConfig cfg;
    cfg.num_labels = 3;
    cfg.num_hours = 6;
    cfg.max_iters = 300;
    const CrfModel model = train_crf(data, cfg);

    const std::vector<int> hours{1, 2, 3, 4, 5, 6};
    const MarginalTable m = forward_backward(model, hours, 1); // start at level 1

    std::cout << "P(level | hour), first hour clamped to level 1\n";
    std::cout << std::fixed << std::setprecision(3);
    for (int t = 0; t < m.length; ++t) {
        std::cout << "hour " << (t + 1) << ":";
        for (int level = 1; level <= 3; ++level) std::cout << "  " << m.prob(t, level);
        std::cout << '\n';
    }
    return 0;
}
