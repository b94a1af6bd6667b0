#ifndef MVLAB_ROPE_HPP
#define MVLAB_ROPE_HPP

#include <Eigen/Dense>
#include <vector>

#include "mvlab/layout.hpp"

namespace mvlab {

/// Split of the head dimension across the (t, h, w) axes. Each part is even.
struct AxisSplit {
    int t = 0;
    int h = 0;
    int w = 0;

    int head_dim() const { return t + h + w; }
};

/// Near-equal thirds rounded down to even, remainder to the temporal axis.
AxisSplit default_axis_split(int head_dim);

/// Per-axis geometric frequency ladders: freq_j = base^(-2j/d_axis).
struct FrequencyTable {
    AxisSplit split;
    std::vector<double> t_freqs;
    std::vector<double> h_freqs;
    std::vector<double> w_freqs;

    int head_dim() const { return split.head_dim(); }
};

FrequencyTable rope_frequencies(int head_dim, const AxisSplit& split, double base = 10000.0);
FrequencyTable rope_frequencies(int head_dim, double base = 10000.0);

enum class RopeDirection { Forward, Inverse };

/// Rotates one head vector in place. Dims [0,t) pair up for the temporal
/// angle pos.t * t_freqs[j], then [t,t+h) for pos.h, then the rest for pos.w.
void apply_rope(Eigen::Ref<Eigen::VectorXd> vec, const Position& pos,
                const FrequencyTable& freqs, RopeDirection dir = RopeDirection::Forward);

/// Row i of `vectors` is the head vector of token i in `layout`.
void apply_rope(Eigen::Ref<Eigen::MatrixXd> vectors, const TokenLayout& layout,
                const FrequencyTable& freqs, RopeDirection dir = RopeDirection::Forward);

}  // namespace mvlab

#endif  // MVLAB_ROPE_HPP
