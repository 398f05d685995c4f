#include "hyqal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "hyqal/pgm.hpp"
#include "hyqal/rng.hpp"
#include "json.hpp"

namespace hyqal::data {

namespace fs = std::filesystem;

const Sample& Dataset::by_id(const std::string& sample_id) const {
    for (const Sample& s : samples) {
        if (s.sample_id == sample_id) {
            return s;
        }
    }
    throw DataError("dataset: unknown sample id " + sample_id);
}

std::vector<std::string> Dataset::patient_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const Sample& s : samples) {
        if (seen.insert(s.patient_id).second) {
            out.push_back(s.patient_id);
        }
    }
    return out;
}

void SyntheticConfig::validate() const {
    if (count < 1) {
        throw DataError("synthetic: count must be >= 1");
    }
    if (patients < 4) {
        throw DataError("synthetic: at least 4 patients required");
    }
    if (height < 32 || width < 32) {
        throw DataError("synthetic: image side must be >= 32 (structures unresolvable below)");
    }
    if (stenosis_fraction < 0.0 || stenosis_fraction > 1.0) {
        throw DataError("synthetic: stenosis_fraction must be in [0,1]");
    }
    if (noise_level < 0.0 || noise_level > 0.5) {
        throw DataError("synthetic: noise_level must be in [0,0.5]");
    }
}

namespace {

struct PatientProfile {
    double background;   // bright background intensity
    double thickness;    // vessel base half-width scale
    double darkness;     // vessel contrast against background
};

PatientProfile patient_profile(std::uint64_t seed, std::size_t patient_index) {
    Rng rng(derive_seed(seed, {0x70617469656e7400ULL, patient_index}));
    PatientProfile p;
    p.background = rng.uniform(0.70, 0.88);
    p.thickness = rng.uniform(1.6, 2.8);
    p.darkness = rng.uniform(0.32, 0.46);
    return p;
}

struct Point {
    double y, x;
};

// Quadratic Bezier across the frame: endpoints on opposite edges, control
// point pulled off-axis so the vessel bends.
struct VesselCurve {
    Point p0, p1, p2;

    Point at(double t) const {
        const double a = (1.0 - t) * (1.0 - t), b = 2.0 * (1.0 - t) * t, c = t * t;
        return {a * p0.y + b * p1.y + c * p2.y, a * p0.x + b * p1.x + c * p2.x};
    }
};

Tensor render_sample(const SyntheticConfig& cfg, const PatientProfile& prof, bool stenosis,
                     Rng& rng) {
    const double h = static_cast<double>(cfg.height);
    const double w = static_cast<double>(cfg.width);

    VesselCurve curve;
    const bool vertical = rng.bernoulli(0.5);
    if (vertical) {
        curve.p0 = {0.0, rng.uniform(0.2, 0.8) * w};
        curve.p2 = {h - 1.0, rng.uniform(0.2, 0.8) * w};
        curve.p1 = {rng.uniform(0.3, 0.7) * h,
                    0.5 * (curve.p0.x + curve.p2.x) + rng.uniform(-0.3, 0.3) * w};
    } else {
        curve.p0 = {rng.uniform(0.2, 0.8) * h, 0.0};
        curve.p2 = {rng.uniform(0.2, 0.8) * h, w - 1.0};
        curve.p1 = {0.5 * (curve.p0.y + curve.p2.y) + rng.uniform(-0.3, 0.3) * h,
                    rng.uniform(0.3, 0.7) * w};
    }

    // Mild natural caliber variation along the vessel.
    const double wobble_phase = rng.uniform(0.0, 2.0 * M_PI);
    const double wobble_cycles = rng.uniform(0.5, 1.5);

    double sten_center = 0.0, sten_half = 0.0, sten_reduction = 0.0;
    if (stenosis) {
        sten_half = rng.uniform(0.10, 0.20) / 2.0; // fraction of curve length
        sten_center = rng.uniform(0.25, 0.75);
        sten_reduction = rng.uniform(0.40, 0.70);
    }

    // Max-composited darkening so overlapping stamps never deepen the vessel.
    Tensor dark({cfg.height, cfg.width});
    const int steps = static_cast<int>(2.0 * std::max(h, w));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(steps);
        double width_scale = 1.0 + 0.15 * std::sin(wobble_phase + 2.0 * M_PI * wobble_cycles * t);
        if (stenosis) {
            const double s = (t - sten_center) / sten_half;
            if (std::abs(s) < 1.0) {
                width_scale *= 1.0 - sten_reduction * 0.5 * (1.0 + std::cos(M_PI * s));
            }
        }
        const double sigma = std::max(0.35, prof.thickness * width_scale * 0.5);
        const Point pt = curve.at(t);
        const int radius = static_cast<int>(std::ceil(3.0 * sigma));
        const int y0 = std::max(0, static_cast<int>(std::floor(pt.y)) - radius);
        const int y1 = std::min(static_cast<int>(cfg.height) - 1,
                                static_cast<int>(std::ceil(pt.y)) + radius);
        const int x0 = std::max(0, static_cast<int>(std::floor(pt.x)) - radius);
        const int x1 = std::min(static_cast<int>(cfg.width) - 1,
                                static_cast<int>(std::ceil(pt.x)) + radius);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dy = static_cast<double>(y) - pt.y;
                const double dx = static_cast<double>(x) - pt.x;
                const double v =
                    prof.darkness * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                double& cell = dark.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                cell = std::max(cell, v);
            }
        }
    }

    Tensor img({cfg.height, cfg.width});
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = prof.background - dark[i] + rng.normal(0.0, cfg.noise_level);
        v = std::clamp(v, 0.0, 1.0);
        // 8-bit grid: in-memory data matches a PGM write/read roundtrip.
        img[i] = std::round(v * 255.0) / 255.0;
    }
    return img;
}

} // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Dataset ds;
    ds.height = cfg.height;
    ds.width = cfg.width;
    ds.samples.reserve(cfg.count);

    // Round-robin sample-to-patient assignment; per-patient positives follow
    // the global fraction with carry so the dataset balance is within one
    // sample of stenosis_fraction * count.
    std::vector<std::size_t> per_patient(cfg.patients, 0);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        ++per_patient[i % cfg.patients];
    }
    double carry = 0.0;
    std::size_t sample_idx = 0;
    for (std::size_t p = 0; p < cfg.patients; ++p) {
        const PatientProfile prof = patient_profile(seed, p);
        const double want = static_cast<double>(per_patient[p]) * cfg.stenosis_fraction + carry;
        std::size_t positives = static_cast<std::size_t>(std::llround(want));
        positives = std::min(positives, per_patient[p]);
        carry = want - static_cast<double>(positives);

        std::vector<int> labels(per_patient[p], 0);
        for (std::size_t i = 0; i < positives; ++i) {
            labels[i] = 1;
        }
        Rng order_rng(derive_seed(seed, {0x6f72646572ULL, p}));
        order_rng.shuffle(labels);

        char pid[16];
        std::snprintf(pid, sizeof(pid), "p%03zu", p);
        for (std::size_t k = 0; k < per_patient[p]; ++k, ++sample_idx) {
            Rng sample_rng(derive_seed(seed, {0x73616d706c65ULL, sample_idx}));
            Sample s;
            s.patient_id = pid;
            char sid[16];
            std::snprintf(sid, sizeof(sid), "s%05zu", sample_idx);
            s.sample_id = sid;
            s.label = labels[k];
            s.image = render_sample(cfg, prof, labels[k] == 1, sample_rng);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

std::vector<std::string> SplitManifest::split_names() const {
    std::vector<std::string> out;
    out.reserve(ratios.size());
    for (const auto& r : ratios) {
        out.push_back(r.name);
    }
    return out;
}

std::string SplitManifest::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& r : ratios) {
        jr.push_back({{"name", r.name}, {"fraction", r.fraction}});
    }
    j["ratios"] = jr;
    j["sample_ids"] = sample_ids;
    j["patient_ids"] = patient_ids;
    return j.dump(2);
}

SplitManifest SplitManifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: invalid JSON: ") + e.what());
    }
    SplitManifest m;
    try {
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& r : j.at("ratios")) {
            m.ratios.push_back({r.at("name").get<std::string>(), r.at("fraction").get<double>()});
        }
        m.sample_ids = j.at("sample_ids").get<std::map<std::string, std::vector<std::string>>>();
        m.patient_ids = j.at("patient_ids").get<std::map<std::string, std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: missing or mistyped field: ") + e.what());
    }
    return m;
}

SplitManifest split_by_patient(const Dataset& dataset, const std::vector<SplitRatio>& ratios,
                               std::uint64_t seed) {
    if (ratios.empty()) {
        throw DataError("split: no ratios given");
    }
    double total = 0.0;
    for (const auto& r : ratios) {
        if (r.fraction <= 0.0) {
            throw DataError("split: ratio '" + r.name + "' must be positive");
        }
        total += r.fraction;
    }

    std::vector<std::string> patients = dataset.patient_ids();
    if (patients.size() < ratios.size()) {
        throw DataError("split: " + std::to_string(patients.size()) +
                        " patients cannot fill " + std::to_string(ratios.size()) + " splits");
    }
    if (patients.size() < 4) {
        throw DataError("split: at least 4 distinct patients required, got " +
                        std::to_string(patients.size()));
    }

    Rng rng(derive_seed(seed, "patient-split"));
    rng.shuffle(patients);

    // Largest-remainder allocation of patients to splits, each split >= 1.
    const std::size_t n = patients.size();
    std::vector<std::size_t> counts(ratios.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double exact = ratios[i].fraction / total * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        remainders.push_back({exact - std::floor(exact), i});
        assigned += counts[i];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
        ++counts[remainders[k % remainders.size()].second];
    }
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (counts[i] == 0) {
            throw DataError("split: too few patients, split '" + ratios[i].name +
                            "' would be empty");
        }
    }

    SplitManifest manifest;
    manifest.seed = seed;
    manifest.ratios = ratios;
    std::map<std::string, std::string> patient_to_split;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        auto& plist = manifest.patient_ids[ratios[i].name];
        for (std::size_t k = 0; k < counts[i]; ++k, ++cursor) {
            plist.push_back(patients[cursor]);
            patient_to_split[patients[cursor]] = ratios[i].name;
        }
        manifest.sample_ids[ratios[i].name] = {};
    }
    for (const Sample& s : dataset.samples) {
        manifest.sample_ids[patient_to_split.at(s.patient_id)].push_back(s.sample_id);
    }
    return manifest;
}

std::vector<Sample> select_split(const Dataset& dataset, const SplitManifest& manifest,
                                 const std::string& split, bool strip_labels) {
    auto it = manifest.sample_ids.find(split);
    if (it == manifest.sample_ids.end()) {
        throw DataError("select_split: manifest has no split named '" + split + "'");
    }
    std::map<std::string, const Sample*> index;
    for (const Sample& s : dataset.samples) {
        index[s.sample_id] = &s;
    }
    std::vector<Sample> out;
    out.reserve(it->second.size());
    for (const std::string& id : it->second) {
        auto found = index.find(id);
        if (found == index.end()) {
            throw DataError("select_split: manifest references unknown sample id " + id);
        }
        Sample s = *found->second;
        if (strip_labels) {
            s.label.reset();
        }
        out.push_back(std::move(s));
    }
    return out;
}

Dataset load_image_dir(const std::string& path) {
    if (!fs::is_directory(path)) {
        throw DataError(path + ": not a directory");
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw DataError(path + ": no .pgm files found");
    }

    Dataset ds;
    for (const std::string& file : files) {
        const std::string stem = fs::path(file).stem().string();
        // <patient>_<sample>_<label>; patient ids may contain underscores.
        const std::size_t last = stem.rfind('_');
        const std::size_t prev = last == std::string::npos ? std::string::npos
                                                           : stem.rfind('_', last - 1);
        if (last == std::string::npos || prev == std::string::npos || prev == 0) {
            throw DataError(file + ": filename must be <patient>_<sample>_<label|u>.pgm");
        }
        const std::string label_token = stem.substr(last + 1);
        Sample s;
        s.patient_id = stem.substr(0, prev);
        s.sample_id = stem.substr(prev + 1, last - prev - 1);
        if (label_token == "u") {
            s.label.reset();
        } else if (label_token == "0" || label_token == "1") {
            s.label = label_token == "1" ? 1 : 0;
        } else {
            throw DataError(file + ": unknown label token '" + label_token + "'");
        }
        s.image = read_pgm(file);
        if (ds.samples.empty()) {
            ds.height = s.image.dim(0);
            ds.width = s.image.dim(1);
        } else if (s.image.dim(0) != ds.height || s.image.dim(1) != ds.width) {
            throw DataError(file + ": image size " + s.image.shape_str() +
                            " differs from dataset " + shape_to_string({ds.height, ds.width}));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_dataset(const std::string& dir, const Dataset& dataset, const SplitManifest& manifest,
                   const std::string& config_hash) {
    fs::create_directories(dir);
    std::set<std::string> unlabeled;
    auto it = manifest.sample_ids.find("train_unlabeled");
    if (it != manifest.sample_ids.end()) {
        unlabeled.insert(it->second.begin(), it->second.end());
    }
    for (const Sample& s : dataset.samples) {
        std::string token = "u";
        if (!unlabeled.count(s.sample_id) && s.label.has_value()) {
            token = *s.label == 1 ? "1" : "0";
        }
        write_pgm(dir + "/" + s.patient_id + "_" + s.sample_id + "_" + token + ".pgm", s.image,
                  255, "cfg " + config_hash);
    }
    nlohmann::json j = nlohmann::json::parse(manifest.to_json());
    j["config_hash"] = config_hash;
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out) {
        throw DataError(dir + "/manifest.json: cannot open for writing");
    }
    out << j.dump(2) << "\n";
}

} // namespace hyqal::data
