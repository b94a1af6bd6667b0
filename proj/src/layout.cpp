#include "mvlab/layout.hpp"

#include <sstream>

#include "mvlab/common.hpp"

namespace mvlab {

void LatentGrid::validate() const {
    MV_CHECK_ARG(temporal_len >= 1, "LatentGrid: temporal_len must be >= 1");
    MV_CHECK_ARG(height >= 1, "LatentGrid: height must be >= 1");
    MV_CHECK_ARG(width >= 1, "LatentGrid: width must be >= 1");
    MV_CHECK_ARG(channels >= 1, "LatentGrid: channels must be >= 1");
}

int ReferenceShape::total_views() const {
    int sum = 0;
    for (int m : views_per_subject) sum += m;
    return sum;
}

void ReferenceShape::validate() const {
    for (int m : views_per_subject) {
        MV_CHECK_ARG(m >= 1, "ReferenceShape: every subject needs at least one view");
    }
}

std::string scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::Vanilla: return "vanilla";
        case SchemeKind::SS: return "ss";
        case SchemeKind::TS: return "ts";
    }
    throw std::logic_error("scheme_name: bad kind");
}

SchemeKind parse_scheme(const std::string& name) {
    if (name == "vanilla") return SchemeKind::Vanilla;
    if (name == "ss") return SchemeKind::SS;
    if (name == "ts") return SchemeKind::TS;
    throw std::invalid_argument("unknown layout scheme: " + name);
}

namespace {

void append_video_tokens(const LatentGrid& grid, TokenLayout& out) {
    for (int t = 0; t < grid.temporal_len; ++t) {
        for (int h = 0; h < grid.height; ++h) {
            for (int w = 0; w < grid.width; ++w) {
                out.positions.push_back({t, h, w});
                out.segments.push_back(TokenSegment{});
            }
        }
    }
}

void append_ref_frame(const LatentGrid& grid, int subject, int view,
                      int frame, int w_offset, TokenLayout& out) {
    for (int h = 0; h < grid.height; ++h) {
        for (int w = 0; w < grid.width; ++w) {
            out.positions.push_back({frame, h, w_offset + w});
            out.segments.push_back({subject, view});
        }
    }
}

}  // namespace

TokenLayout build_vanilla_layout(const LatentGrid& grid, const ReferenceShape& refs) {
    grid.validate();
    refs.validate();
    TokenLayout out;
    out.positions.reserve(grid.video_tokens() + refs.total_views() * grid.tokens_per_frame());
    append_video_tokens(grid, out);
    int frame = grid.temporal_len;
    for (int i = 0; i < refs.subject_count(); ++i) {
        for (int m = 0; m < refs.views_per_subject[i]; ++m) {
            append_ref_frame(grid, i, m, frame++, 0, out);
        }
    }
    return out;
}

TokenLayout build_ss_layout(const LatentGrid& grid, const ReferenceShape& refs) {
    grid.validate();
    refs.validate();
    TokenLayout out;
    out.positions.reserve(grid.video_tokens() + refs.total_views() * grid.tokens_per_frame());
    append_video_tokens(grid, out);
    for (int i = 0; i < refs.subject_count(); ++i) {
        const int frame = grid.temporal_len + i;
        for (int m = 0; m < refs.views_per_subject[i]; ++m) {
            append_ref_frame(grid, i, m, frame, m * grid.width, out);
        }
    }
    return out;
}

TokenLayout build_ts_layout(const LatentGrid& grid, const ReferenceShape& refs, int delta) {
    grid.validate();
    refs.validate();
    MV_CHECK_ARG(delta >= 1, "TS layout: delta must be >= 1");
    TokenLayout out;
    out.positions.reserve(grid.video_tokens() + refs.total_views() * grid.tokens_per_frame());
    append_video_tokens(grid, out);
    // Gap of delta frame indices after the video, then after each subject block;
    // views within a block sit on consecutive frames.
    int last_frame = grid.temporal_len - 1;
    for (int i = 0; i < refs.subject_count(); ++i) {
        const int start = last_frame + delta;
        for (int m = 0; m < refs.views_per_subject[i]; ++m) {
            append_ref_frame(grid, i, m, start + m, 0, out);
        }
        last_frame = start + refs.views_per_subject[i] - 1;
    }
    return out;
}

TokenLayout build_layout(const LatentGrid& grid, const ReferenceShape& refs,
                         const LayoutScheme& scheme) {
    switch (scheme.kind) {
        case SchemeKind::Vanilla: return build_vanilla_layout(grid, refs);
        case SchemeKind::SS: return build_ss_layout(grid, refs);
        case SchemeKind::TS: return build_ts_layout(grid, refs, scheme.ts_delta);
    }
    throw std::logic_error("build_layout: bad scheme");
}

std::string format_layout(const TokenLayout& layout) {
    std::ostringstream os;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const Position& p = layout.positions[i];
        const TokenSegment& s = layout.segments[i];
        os << p.t << ' ' << p.h << ' ' << p.w << ' ';
        if (s.is_video()) {
            os << "video";
        } else {
            os << "ref:" << s.subject << ':' << s.view;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace mvlab
