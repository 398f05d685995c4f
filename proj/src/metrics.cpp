#include "hyqal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace hyqal::eval {

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& predictions) {
    if (labels.empty() || labels.size() != predictions.size()) {
        throw DataError("confusion: need equal nonempty label/prediction vectors, got " +
                        std::to_string(labels.size()) + " and " +
                        std::to_string(predictions.size()));
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if ((labels[i] != 0 && labels[i] != 1) || (predictions[i] != 0 && predictions[i] != 1)) {
            throw DataError("confusion: labels and predictions must be 0/1");
        }
        if (labels[i] == 1) {
            predictions[i] == 1 ? ++cm.tp : ++cm.fn;
        } else {
            predictions[i] == 1 ? ++cm.fp : ++cm.tn;
        }
    }
    return cm;
}

namespace {

// Ratio with zero-denominator flagged instead of NaN.
double safe_ratio(double num, double den, bool* degenerate) {
    if (den == 0.0) {
        *degenerate = true;
        return 0.0;
    }
    return num / den;
}

double f1_of(double precision, double recall, bool* degenerate) {
    return safe_ratio(2.0 * precision * recall, precision + recall, degenerate);
}

} // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) {
        throw DataError("metrics: empty confusion matrix");
    }
    MetricsReport r;
    r.confusion = cm;
    const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
    const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
    r.accuracy = (tp + tn) / static_cast<double>(cm.total());
    r.recall_positive = safe_ratio(tp, tp + fn, &r.degenerate);
    r.precision_positive = safe_ratio(tp, tp + fp, &r.degenerate);
    r.f1_positive = f1_of(r.precision_positive, r.recall_positive, &r.degenerate);
    r.sensitivity = r.recall_positive;
    r.specificity = safe_ratio(tn, tn + fp, &r.degenerate);
    const double precision_negative = safe_ratio(tn, tn + fn, &r.degenerate);
    const double f1_negative = f1_of(precision_negative, r.specificity, &r.degenerate);
    r.precision = 0.5 * (r.precision_positive + precision_negative);
    r.recall = 0.5 * (r.sensitivity + r.specificity);
    r.f1 = 0.5 * (r.f1_positive + f1_negative);
    return r;
}

RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.empty() || labels.size() != scores.size()) {
        throw DataError("roc_auc: need equal nonempty label/score vectors");
    }
    long pos = 0, neg = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw DataError("roc_auc: labels must be 0/1");
        }
        y == 1 ? ++pos : ++neg;
    }
    if (pos == 0 || neg == 0) {
        throw DataError("roc_auc: AUC undefined with a single class (" + std::to_string(pos) +
                        " positives, " + std::to_string(neg) + " negatives)");
    }

    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocResult out;
    out.points.push_back({0.0, 0.0});
    double auc = 0.0;
    long tp = 0, fp = 0;
    double prev_tpr = 0.0, prev_fpr = 0.0;
    std::size_t i = 0;
    // One ROC vertex per distinct score; ties advance TP and FP together,
    // which the trapezoid credits as one half, matching Mann-Whitney.
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            labels[order[i]] == 1 ? ++tp : ++fp;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        out.points.push_back({fpr, tpr});
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    out.auc = auc;
    return out;
}

MetricsReport evaluate_scores(const std::string& name, const std::vector<int>& labels,
                              const std::vector<double>& scores) {
    std::vector<int> predictions(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        predictions[i] = scores[i] >= 0.5 ? 1 : 0;
    }
    MetricsReport r = metrics(confusion(labels, predictions));
    r.name = name;
    const RocResult roc = roc_auc(labels, scores);
    r.auc = roc.auc;
    r.has_auc = true;
    r.roc_points = roc.points;
    return r;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

nlohmann::json report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["accuracy"] = r.accuracy;
    j["auc"] = r.auc;
    j["f1"] = r.f1;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["sensitivity"] = r.sensitivity;
    j["specificity"] = r.specificity;
    j["f1_positive"] = r.f1_positive;
    j["precision_positive"] = r.precision_positive;
    j["recall_positive"] = r.recall_positive;
    j["degenerate"] = r.degenerate;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp},
                      {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    return j;
}

} // namespace

void emit_reports(const std::vector<MetricsReport>& reports, const std::string& out_dir,
                  const std::string& config_hash) {
    if (reports.empty()) {
        throw DataError("emit_reports: no reports given");
    }
    std::filesystem::create_directories(out_dir);
    auto open = [&](const std::string& file) {
        std::ofstream out(out_dir + "/" + file, std::ios::binary);
        if (!out) {
            throw DataError(out_dir + "/" + file + ": cannot open for writing");
        }
        return out;
    };

    {
        // f1/precision/recall columns are macro averages; the *_positive
        // columns carry the positive-class values.
        auto csv = open("metrics.csv");
        csv << "model,accuracy,auc,f1,precision,recall,sensitivity,specificity,"
               "f1_positive,precision_positive,recall_positive,degenerate\n";
        for (const auto& r : reports) {
            csv << r.name << ',' << fixed4(r.accuracy) << ',' << fixed4(r.auc) << ','
                << fixed4(r.f1) << ',' << fixed4(r.precision) << ',' << fixed4(r.recall) << ','
                << fixed4(r.sensitivity) << ',' << fixed4(r.specificity) << ','
                << fixed4(r.f1_positive) << ',' << fixed4(r.precision_positive) << ','
                << fixed4(r.recall_positive) << ',' << (r.degenerate ? 1 : 0) << '\n';
        }
    }
    {
        auto roc = open("roc.csv");
        roc << "model,fpr,tpr\n";
        for (const auto& r : reports) {
            for (const auto& p : r.roc_points) {
                roc << r.name << ',' << fixed4(p.fpr) << ',' << fixed4(p.tpr) << '\n';
            }
        }
    }
    {
        nlohmann::json j;
        j["config_hash"] = config_hash;
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : reports) {
            arr.push_back(report_json(r));
        }
        j["reports"] = arr;
        auto js = open("metrics.json");
        js << j.dump(2) << "\n";
    }
    {
        nlohmann::json j;
        j["config_hash"] = config_hash;
        for (const auto& r : reports) {
            j["models"][r.name] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp},
                                   {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
        }
        auto js = open("confusion.json");
        js << j.dump(2) << "\n";
    }
    {
        // Radar axes in Table order; values duplicated from metrics.json for
        // direct plotting.
        nlohmann::json j;
        j["config_hash"] = config_hash;
        j["axes"] = {"accuracy", "auc", "f1", "precision", "recall", "sensitivity",
                     "specificity"};
        for (const auto& r : reports) {
            j["models"][r.name] = {r.accuracy, r.auc, r.f1, r.precision,
                                   r.recall, r.sensitivity, r.specificity};
        }
        auto js = open("radar.json");
        js << j.dump(2) << "\n";
    }
}

} // namespace hyqal::eval
