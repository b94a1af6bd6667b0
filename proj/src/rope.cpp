#include "mvlab/rope.hpp"

#include <cmath>

#include "mvlab/common.hpp"

namespace mvlab {

AxisSplit default_axis_split(int head_dim) {
    MV_CHECK_ARG(head_dim >= 6 && head_dim % 2 == 0,
                 "head_dim must be even and at least 6 to cover three axes");
    const int spatial = 2 * (head_dim / 6);
    return AxisSplit{head_dim - 2 * spatial, spatial, spatial};
}

namespace {

std::vector<double> axis_ladder(int dim, double base) {
    std::vector<double> freqs(dim / 2);
    for (int j = 0; j < dim / 2; ++j) {
        freqs[j] = std::pow(base, -2.0 * j / dim);
    }
    return freqs;
}

inline void rotate_pairs(Eigen::Ref<Eigen::VectorXd> vec, int offset,
                         const std::vector<double>& freqs, double pos, double sign) {
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        const double angle = sign * pos * freqs[j];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const int iu = offset + 2 * static_cast<int>(j);
        const double u = vec[iu];
        const double v = vec[iu + 1];
        vec[iu] = u * c - v * s;
        vec[iu + 1] = u * s + v * c;
    }
}

}  // namespace

FrequencyTable rope_frequencies(int head_dim, const AxisSplit& split, double base) {
    MV_CHECK_ARG(head_dim > 0 && head_dim % 2 == 0, "head_dim must be even and positive");
    MV_CHECK_ARG(split.t >= 0 && split.h >= 0 && split.w >= 0, "axis split must be nonnegative");
    MV_CHECK_ARG(split.t % 2 == 0 && split.h % 2 == 0 && split.w % 2 == 0,
                 "axis split components must be even");
    MV_CHECK_ARG(split.head_dim() == head_dim, "axis split must sum to head_dim");
    FrequencyTable table;
    table.split = split;
    table.t_freqs = axis_ladder(split.t, base);
    table.h_freqs = axis_ladder(split.h, base);
    table.w_freqs = axis_ladder(split.w, base);
    return table;
}

FrequencyTable rope_frequencies(int head_dim, double base) {
    return rope_frequencies(head_dim, default_axis_split(head_dim), base);
}

void apply_rope(Eigen::Ref<Eigen::VectorXd> vec, const Position& pos,
                const FrequencyTable& freqs, RopeDirection dir) {
    MV_CHECK_ARG(vec.size() == freqs.head_dim(), "apply_rope: vector dim != head_dim");
    const double sign = (dir == RopeDirection::Forward) ? 1.0 : -1.0;
    rotate_pairs(vec, 0, freqs.t_freqs, pos.t, sign);
    rotate_pairs(vec, freqs.split.t, freqs.h_freqs, pos.h, sign);
    rotate_pairs(vec, freqs.split.t + freqs.split.h, freqs.w_freqs, pos.w, sign);
}

void apply_rope(Eigen::Ref<Eigen::MatrixXd> vectors, const TokenLayout& layout,
                const FrequencyTable& freqs, RopeDirection dir) {
    MV_CHECK_ARG(static_cast<std::size_t>(vectors.rows()) == layout.size(),
                 "apply_rope: row count != token count");
    MV_CHECK_ARG(vectors.cols() == freqs.head_dim(), "apply_rope: column count != head_dim");
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        Eigen::VectorXd row = vectors.row(i);
        apply_rope(row, layout.positions[static_cast<std::size_t>(i)], freqs, dir);
        vectors.row(i) = row;
    }
}

}  // namespace mvlab
