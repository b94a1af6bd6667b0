#ifndef MVLAB_REPORT_HPP
#define MVLAB_REPORT_HPP

#include <string>
#include <vector>

namespace mvlab {

/// Sample rows by metric columns, the shape shared by evaluation reports and
/// ablation tables.
struct MetricTable {
    struct Row {
        std::string id;
        std::string scene;
        std::vector<double> values;
    };

    std::vector<std::string> columns;
    std::vector<Row> rows;

    void validate() const;
};

/// CSV with header "id,scene,<columns...>".
void write_metric_table(const std::string& path, const MetricTable& table);
MetricTable read_metric_table(const std::string& path);

struct SceneAggregate {
    std::string scene;
    int count = 0;
    std::vector<double> means;
};

/// One aggregate per scene type, in first-appearance order.
std::vector<SceneAggregate> aggregate_by_scene(const MetricTable& table);

/// Minimal standalone bar chart, one bar per label.
std::string render_bar_chart_svg(const std::string& title,
                                 const std::vector<std::string>& labels,
                                 const std::vector<double>& values);

/// Writes aggregate.csv plus one metric_<column>.svg per column into out_dir.
/// Returns the written paths.
std::vector<std::string> write_report(const MetricTable& table, const std::string& out_dir);

}  // namespace mvlab

#endif  // MVLAB_REPORT_HPP
