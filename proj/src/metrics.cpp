#include "moxgate/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "moxgate/errors.hpp"

namespace moxgate {

MetricsReport compute_metrics(std::span<const int> targets,
                              std::span<const int> predictions,
                              std::size_t num_classes) {
    if (targets.size() != predictions.size()) {
        throw ShapeError("compute_metrics: targets and predictions differ in length");
    }
    MetricsReport r;
    r.num_classes = num_classes;
    r.total = targets.size();
    r.confusion.assign(num_classes * num_classes, 0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const int t = targets[i], p = predictions[i];
        if (t < 0 || static_cast<std::size_t>(t) >= num_classes || p < 0 ||
            static_cast<std::size_t>(p) >= num_classes) {
            throw ValueError("compute_metrics: class index out of range");
        }
        ++r.confusion[static_cast<std::size_t>(t) * num_classes + static_cast<std::size_t>(p)];
    }

    r.support.assign(num_classes, 0);
    r.precision.assign(num_classes, 0.0);
    r.recall.assign(num_classes, 0.0);
    r.f1.assign(num_classes, 0.0);
    std::size_t correct = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t tp = r.at(c, c), fn = 0, fp = 0;
        for (std::size_t o = 0; o < num_classes; ++o) {
            if (o != c) {
                fn += r.at(c, o);
                fp += r.at(o, c);
            }
        }
        correct += tp;
        r.support[c] = tp + fn;
        r.precision[c] = (tp + fp) == 0 ? 0.0
                                        : static_cast<double>(tp) / static_cast<double>(tp + fp);
        r.recall[c] = (tp + fn) == 0 ? 0.0
                                     : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double pr = r.precision[c] + r.recall[c];
        r.f1[c] = pr == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / pr;
    }
    if (r.total > 0) {
        r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double w = static_cast<double>(r.support[c]) / static_cast<double>(r.total);
            r.weighted_precision += w * r.precision[c];
            r.weighted_recall += w * r.recall[c];
            r.weighted_f1 += w * r.f1[c];
        }
    }
    return r;
}

std::string format_metrics_line(const MetricsReport& r) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.4f  %.4f  %.4f  %.4f", r.accuracy,
                  r.weighted_precision, r.weighted_recall, r.weighted_f1);
    return buf;
}

std::string format_metrics_table(const MetricsReport& r,
                                 std::span<const std::string> class_names) {
    std::size_t width = 10;
    for (const std::string& name : class_names) width = std::max(width, name.size() + 2);
    std::ostringstream out;
    out << std::string(width, ' ') << "Precision  Recall  F1-Score  Support\n";
    char buf[96];
    for (std::size_t c = 0; c < r.num_classes; ++c) {
        std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
        name.resize(width, ' ');
        std::snprintf(buf, sizeof(buf), "%.4f     %.4f  %.4f    %zu", r.precision[c],
                      r.recall[c], r.f1[c], r.support[c]);
        out << name << buf << '\n';
    }
    std::string agg = "weighted";
    agg.resize(width, ' ');
    std::snprintf(buf, sizeof(buf), "%.4f     %.4f  %.4f    %zu", r.weighted_precision,
                  r.weighted_recall, r.weighted_f1, r.total);
    out << agg << buf << '\n';
    std::snprintf(buf, sizeof(buf), "accuracy: %.4f (%zu samples)\n", r.accuracy, r.total);
    out << buf;
    return out.str();
}

void write_metrics_csv(const std::string& path,
                       std::span<const std::pair<std::string, MetricsReport>> sections,
                       std::span<const std::string> class_names) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write metrics: " + path);
    out << "split,scope,accuracy,precision,recall,f1,support\n";
    char buf[32];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& [name, r] : sections) {
        out << name << ",weighted," << num(r.accuracy) << ',' << num(r.weighted_precision)
            << ',' << num(r.weighted_recall) << ',' << num(r.weighted_f1) << ',' << r.total
            << '\n';
        for (std::size_t c = 0; c < r.num_classes; ++c) {
            const std::string cls =
                c < class_names.size() ? class_names[c] : std::to_string(c);
            out << name << ",class:" << cls << ",," << num(r.precision[c]) << ','
                << num(r.recall[c]) << ',' << num(r.f1[c]) << ',' << r.support[c] << '\n';
        }
    }
}

}  // namespace moxgate
