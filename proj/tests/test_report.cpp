#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "mvlab/io.hpp"
#include "mvlab/report.hpp"
#include "test_util.hpp"

using namespace mvlab;
using namespace mvlab::testutil;
namespace fs = std::filesystem;

namespace {

MetricTable sample_table() {
    MetricTable t;
    t.columns = {"alpha", "beta"};
    t.rows = {
        {"s1", "OC", {0.5, 1.0}},
        {"s2", "HOI", {0.25, 2.0}},
        {"s3", "OC", {0.75, 3.0}},
        {"s4", "HOI", {0.75, 5.0}},
    };
    return t;
}

}  // namespace

TEST_CASE("metric tables survive a csv round trip") {
    const TempDir dir("report_csv");
    const MetricTable t = sample_table();
    const std::string path = dir.str("t.csv");
    write_metric_table(path, t);
    const MetricTable back = read_metric_table(path);
    CHECK(back.columns == t.columns);
    REQUIRE(back.rows.size() == 4);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(back.rows[i].id == t.rows[i].id);
        CHECK(back.rows[i].scene == t.rows[i].scene);
        CHECK(back.rows[i].values == t.rows[i].values);
    }
    const std::string text = read_text_file(path);
    CHECK(text.rfind("id,scene,alpha,beta\n", 0) == 0);
}

TEST_CASE("tiny and huge magnitudes survive the csv round trip") {
    const TempDir dir("report_precision");
    MetricTable t;
    t.columns = {"v"};
    t.rows = {{"a", "OC", {1e-12}}, {"b", "OC", {123456789.25}}, {"c", "OC", {-0.0625}}};
    const std::string path = dir.str("p.csv");
    write_metric_table(path, t);
    const MetricTable back = read_metric_table(path);
    CHECK(back.rows[0].values[0] == 1e-12);
    CHECK(back.rows[1].values[0] == 123456789.25);
    CHECK(back.rows[2].values[0] == -0.0625);
}

TEST_CASE("table validation catches ragged rows and reserved characters") {
    const TempDir dir("report_invalid");
    MetricTable t = sample_table();
    t.rows[1].values.pop_back();
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = sample_table();
    t.rows[0].id = "bad,id";
    CHECK_THROWS_AS(write_metric_table(dir.str("x.csv"), t), std::invalid_argument);
    t = sample_table();
    t.columns[0] = "bad,column";
    CHECK_THROWS_AS(write_metric_table(dir.str("y.csv"), t), std::invalid_argument);
}

TEST_CASE("scene aggregation averages per scene in first-appearance order") {
    const auto aggs = aggregate_by_scene(sample_table());
    REQUIRE(aggs.size() == 2);
    CHECK(aggs[0].scene == "OC");
    CHECK(aggs[0].count == 2);
    CHECK(aggs[0].means == std::vector<double>{0.625, 2.0});
    CHECK(aggs[1].scene == "HOI");
    CHECK(aggs[1].count == 2);
    CHECK(aggs[1].means == std::vector<double>{0.5, 3.5});
}

TEST_CASE("bar charts are standalone svg with one bar per label") {
    const std::string svg = render_bar_chart_svg("demo", {"a", "b", "c"}, {1.0, 2.0, 0.5});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("demo") != std::string::npos);
    std::size_t rects = 0;
    for (std::size_t pos = svg.find("<rect"); pos != std::string::npos;
         pos = svg.find("<rect", pos + 1)) {
        ++rects;
    }
    CHECK(rects >= 3);
    CHECK(svg.find(">a</text>") != std::string::npos);
    CHECK(svg.find(">c</text>") != std::string::npos);
    CHECK_THROWS_AS(render_bar_chart_svg("t", {"a"}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("report output lists every artifact it wrote") {
    const TempDir dir("report_out");
    const auto paths = write_report(sample_table(), dir.str("rep"));
    REQUIRE(paths.size() == 3);  // aggregate.csv + one svg per column
    for (const auto& p : paths) CHECK(fs::exists(p));
    CHECK(fs::path(paths[0]).filename() == "aggregate.csv");
    CHECK(fs::exists(fs::path(dir.str("rep")) / "metric_alpha.svg"));
    CHECK(fs::exists(fs::path(dir.str("rep")) / "metric_beta.svg"));

    const std::string agg = read_text_file(paths[0]);
    CHECK(agg.rfind("scene,count,alpha,beta\n", 0) == 0);
    CHECK(agg.find("OC,2,") != std::string::npos);
}
