#include "mvlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "mvlab/common.hpp"
#include "mvlab/io.hpp"

namespace mvlab {

namespace fs = std::filesystem;

void MetricTable::validate() const {
    MV_CHECK_ARG(!columns.empty(), "MetricTable: no columns");
    for (const auto& row : rows) {
        MV_CHECK_ARG(row.values.size() == columns.size(),
                     "MetricTable: row width mismatch at id " + row.id);
    }
}

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

}  // namespace

void write_metric_table(const std::string& path, const MetricTable& table) {
    table.validate();
    std::string out = "id,scene";
    for (const auto& col : table.columns) {
        MV_CHECK_ARG(col.find(',') == std::string::npos, "MetricTable: comma in column name");
        out += "," + col;
    }
    out += '\n';
    for (const auto& row : table.rows) {
        MV_CHECK_ARG(row.id.find(',') == std::string::npos &&
                         row.scene.find(',') == std::string::npos,
                     "MetricTable: comma in row label");
        out += row.id + "," + row.scene;
        for (double v : row.values) out += "," + format_value(v);
        out += '\n';
    }
    write_text_file(path, out);
}

MetricTable read_metric_table(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    MV_CHECK(static_cast<bool>(std::getline(in, line)), "metric table is empty: " + path);
    const auto header = split_csv_line(line);
    MV_CHECK(header.size() >= 3 && header[0] == "id" && header[1] == "scene",
             "malformed metric table header in " + path);
    MetricTable table;
    table.columns.assign(header.begin() + 2, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        MV_CHECK(fields.size() == header.size(), "malformed metric table row in " + path);
        MetricTable::Row row;
        row.id = fields[0];
        row.scene = fields[1];
        for (std::size_t i = 2; i < fields.size(); ++i) {
            row.values.push_back(std::stod(fields[i]));
        }
        table.rows.push_back(std::move(row));
    }
    table.validate();
    return table;
}

std::vector<SceneAggregate> aggregate_by_scene(const MetricTable& table) {
    table.validate();
    MV_CHECK_ARG(!table.rows.empty(), "aggregate_by_scene: no rows");
    std::vector<SceneAggregate> aggregates;
    for (const auto& row : table.rows) {
        auto it = std::find_if(aggregates.begin(), aggregates.end(),
                               [&](const SceneAggregate& a) { return a.scene == row.scene; });
        if (it == aggregates.end()) {
            aggregates.push_back({row.scene, 0, std::vector<double>(table.columns.size(), 0.0)});
            it = aggregates.end() - 1;
        }
        it->count += 1;
        for (std::size_t i = 0; i < row.values.size(); ++i) it->means[i] += row.values[i];
    }
    for (auto& agg : aggregates) {
        for (double& m : agg.means) m /= agg.count;
    }
    return aggregates;
}

std::string render_bar_chart_svg(const std::string& title,
                                 const std::vector<std::string>& labels,
                                 const std::vector<double>& values) {
    MV_CHECK_ARG(!labels.empty() && labels.size() == values.size(),
                 "render_bar_chart_svg: labels/values mismatch");
    constexpr int kBarWidth = 60;
    constexpr int kGap = 20;
    constexpr int kPlotHeight = 160;
    constexpr int kMargin = 30;
    const int width = kMargin * 2 + static_cast<int>(labels.size()) * (kBarWidth + kGap);
    const int height = kPlotHeight + 2 * kMargin + 20;
    double peak = 1e-12;
    for (double v : values) {
        if (std::isfinite(v)) peak = std::max(peak, std::abs(v));
    }
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"" << kMargin << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    const int baseline = kMargin + kPlotHeight;
    svg << "<line x1=\"" << kMargin << "\" y1=\"" << baseline << "\" x2=\"" << width - kMargin
        << "\" y2=\"" << baseline << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double v = std::isfinite(values[i]) ? values[i] : 0.0;
        const int bar = static_cast<int>(std::abs(v) / peak * (kPlotHeight - 10));
        const int x = kMargin + static_cast<int>(i) * (kBarWidth + kGap) + kGap / 2;
        const int y = v >= 0.0 ? baseline - bar : baseline;
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kBarWidth
            << "\" height=\"" << bar << "\" fill=\"#4878a8\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << baseline + 16 << "\" font-size=\"11\">"
            << labels[i] << "</text>\n";
        svg << "<text x=\"" << x << "\" y=\"" << (v >= 0.0 ? y - 4 : baseline + 30)
            << "\" font-size=\"10\">" << format_value(v) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::vector<std::string> write_report(const MetricTable& table, const std::string& out_dir) {
    const auto aggregates = aggregate_by_scene(table);
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    std::string csv = "scene,count";
    for (const auto& col : table.columns) csv += "," + col;
    csv += '\n';
    for (const auto& agg : aggregates) {
        csv += agg.scene + "," + std::to_string(agg.count);
        for (double m : agg.means) csv += "," + format_value(m);
        csv += '\n';
    }
    const std::string agg_path = (fs::path(out_dir) / "aggregate.csv").string();
    write_text_file(agg_path, csv);
    written.push_back(agg_path);

    std::vector<std::string> labels;
    for (const auto& agg : aggregates) labels.push_back(agg.scene);
    for (std::size_t col = 0; col < table.columns.size(); ++col) {
        std::vector<double> values;
        for (const auto& agg : aggregates) values.push_back(agg.means[col]);
        const std::string path =
            (fs::path(out_dir) / ("metric_" + table.columns[col] + ".svg")).string();
        write_text_file(path, render_bar_chart_svg(table.columns[col], labels, values));
        written.push_back(path);
    }
    return written;
}

}  // namespace mvlab
