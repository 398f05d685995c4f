#pragma once

#include <string>
#include <vector>

#include "hyqal/tensor.hpp"

namespace hyqal::eval {

struct ConfusionMatrix {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    long total() const { return tp + fp + tn + fn; }
};

struct RocPoint {
    double fpr = 0.0, tpr = 0.0;
};

// Scalar metrics derived from a confusion matrix. Table-style F1/precision/
// recall are macro averages over both classes (on a balanced test set this
// makes recall equal accuracy); the positive-class values are kept alongside.
// A zero-denominator ratio is reported as 0 with `degenerate` set.
struct MetricsReport {
    std::string name;
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double auc = 0.0;
    double f1 = 0.0;          // macro
    double precision = 0.0;   // macro
    double recall = 0.0;      // macro
    double sensitivity = 0.0; // positive-class recall
    double specificity = 0.0; // negative-class recall
    double f1_positive = 0.0;
    double precision_positive = 0.0;
    double recall_positive = 0.0;
    bool degenerate = false;
    bool has_auc = false;
    std::vector<RocPoint> roc_points;
};

// Counts with positive class = 1. Lengths must match and be nonempty.
ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& predictions);

// All scalar metrics except AUC.
MetricsReport metrics(const ConfusionMatrix& cm);

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> points; // (0,0) .. (1,1), both coordinates non-decreasing
};

// Threshold sweep over every distinct score; AUC by trapezoidal integration
// (equals the Mann-Whitney statistic with ties counted 1/2). Both classes
// must be present.
RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

// Full evaluation of probability scores at the 0.5 decision threshold.
MetricsReport evaluate_scores(const std::string& name, const std::vector<int>& labels,
                              const std::vector<double>& scores);

// Writes metrics.csv (4 d.p., Table-style columns), metrics.json (full
// precision), roc.csv, confusion.json and radar.json. Deterministic: same
// reports produce byte-identical files.
void emit_reports(const std::vector<MetricsReport>& reports, const std::string& out_dir,
                  const std::string& config_hash);

} // namespace hyqal::eval
