#pragma once

#include <span>
#include <string>
#include <vector>

namespace moxgate {

// Per-class and aggregate classification metrics. Undefined ratios (empty
// class or no predictions for a class) are reported as 0. Aggregates are
// support-weighted averages.
struct MetricsReport {
    std::size_t num_classes = 0;
    std::size_t total = 0;
    std::vector<std::size_t> confusion;  // row-major [true class][predicted]
    std::vector<std::size_t> support;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;

    std::size_t at(std::size_t true_class, std::size_t predicted) const {
        return confusion[true_class * num_classes + predicted];
    }
};

MetricsReport compute_metrics(std::span<const int> targets,
                              std::span<const int> predictions, std::size_t num_classes);

// Paper-style table row: accuracy, weighted precision/recall/F1.
std::string format_metrics_line(const MetricsReport& r);

// Multi-line report with one row per class plus the weighted aggregate.
std::string format_metrics_table(const MetricsReport& r,
                                 std::span<const std::string> class_names);

// CSV with one aggregate row and one row per class for each named section
// (e.g. "val", "test").
void write_metrics_csv(const std::string& path,
                       std::span<const std::pair<std::string, MetricsReport>> sections,
                       std::span<const std::string> class_names);

}  // namespace moxgate
