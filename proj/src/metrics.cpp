#include "creagen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace creagen {

namespace {

constexpr double kFloor = 1e-12;

void check_rows(const ProbMatrix& p, const char* op) {
    if (p.empty()) throw std::invalid_argument(std::string(op) + ": no rows");
    for (const auto& r : p) {
        if (r.size() != p[0].size() || r.size() < 2) {
            throw std::invalid_argument(std::string(op) + ": rows must share one length >= 2");
        }
    }
}

std::vector<double> mean_row(const ProbMatrix& p) {
    std::vector<double> m(p[0].size(), 0.0);
    for (const auto& r : p)
        for (std::size_t k = 0; k < r.size(); ++k) m[k] += r[k];
    for (auto& v : m) v /= static_cast<double>(p.size());
    return m;
}

// KL(p || q) with 0 ln 0 = 0 and q floored where p > 0; counts floored entries.
double kl_floored(const std::vector<double>& p, const std::vector<double>& q, std::size_t* clamped) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] <= 0.0) continue;
        double qk = q[k];
        if (qk < kFloor) {
            qk = kFloor;
            if (clamped) ++*clamped;
        }
        s += p[k] * std::log(p[k] / qk);
    }
    return s;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double inception_like_score(const ProbMatrix& probs) {
    check_rows(probs, "inception_like_score");
    if (probs.size() < 2) throw std::invalid_argument("inception_like_score: need at least 2 images");
    const auto m = mean_row(probs);
    double s = 0.0;
    for (const auto& r : probs) s += kl_floored(r, m, nullptr);
    return std::exp(s / static_cast<double>(probs.size()));
}

AmScore am_score(const ProbMatrix& probs, const std::vector<double>& train_marginal) {
    check_rows(probs, "am_score");
    if (train_marginal.size() != probs[0].size()) {
        throw std::invalid_argument("am_score: training marginal has " + std::to_string(train_marginal.size()) +
                                    " classes, softmax rows have " + std::to_string(probs[0].size()));
    }
    AmScore a;
    double first = 0.0;
    for (const auto& r : probs) first += kl_floored(train_marginal, r, &a.clamped);
    first /= static_cast<double>(probs.size());
    a.value = first - kl_floored(train_marginal, mean_row(probs), &a.clamped);
    return a;
}

double confusion_score(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

std::size_t argmax(const std::vector<double>& probs) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[best]) best = k;
    return best;
}

std::vector<std::size_t> category_histogram(const ProbMatrix& probs) {
    std::vector<std::size_t> h(probs.empty() ? 0 : probs[0].size(), 0);
    for (const auto& r : probs) ++h.at(argmax(r));
    return h;
}

std::vector<double> nn_distance(const std::vector<std::vector<double>>& queries,
                                const std::vector<std::vector<double>>& train, std::size_t k) {
    if (k == 0) throw std::invalid_argument("nn_distance: k must be positive");
    if (k > train.size()) {
        throw std::invalid_argument("nn_distance: k = " + std::to_string(k) + " exceeds the " +
                                    std::to_string(train.size()) + " training features");
    }
    std::vector<double> out(queries.size());
    std::vector<double> d(train.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto& a = queries[q];
        for (std::size_t t = 0; t < train.size(); ++t) {
            const auto& b = train[t];
            if (b.size() != a.size()) throw std::invalid_argument("nn_distance: feature length mismatch");
            double s = 0.0;
            for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
            d[t] = std::sqrt(s);
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += d[j];
        out[q] = s / static_cast<double>(k);
    }
    return out;
}

Photometrics photometrics_from_luma(const std::vector<double>& y) {
    if (y.empty()) throw std::invalid_argument("photometrics: empty image");
    Photometrics p;
    const double n = static_cast<double>(y.size());
    double s = 0.0;
    for (double v : y) {
        s += v;
        if (v < kDarknessThreshold) ++p.darkness;
    }
    const double mu = s / n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : y) {
        const double d = v - mu;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    p.avg_intensity = mu;
    // Rounding can leave a tiny variance on a constant image; treat that as zero.
    p.skewness = m2 <= 1e-20 ? 0.0 : m3 / std::pow(m2, 1.5);
    return p;
}

Photometrics photometrics(const Image8& image) {
    if (image.channels != 3) throw std::invalid_argument("photometrics: expected an RGB image");
    std::vector<double> y(image.width * image.height);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto* px = &image.pixels[i * 3];
        y[i] = 0.299 * (px[0] / 255.0) + 0.587 * (px[1] / 255.0) + 0.114 * (px[2] / 255.0);
    }
    return photometrics_from_luma(y);
}

SetMetrics summarize(const ProbMatrix& shape_probs, const ProbMatrix& texture_probs,
                     const std::vector<ImageMetrics>& rows, const ClassifierBundle& bundle) {
    SetMetrics s;
    s.inception_shape = inception_like_score(shape_probs);
    s.inception_texture = inception_like_score(texture_probs);
    auto ams = am_score(shape_probs, bundle.train_marginal_shape);
    auto amt = am_score(texture_probs, bundle.train_marginal_texture);
    s.am_shape = ams.value;
    s.am_texture = amt.value;
    s.am_clamped = ams.clamped + amt.clamped;
    s.shape_histogram = category_histogram(shape_probs);
    s.texture_histogram = category_histogram(texture_probs);
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        s.mean_nn_distance += r.nn_distance / n;
        s.mean_shape_confusion += r.shape_confusion / n;
        s.mean_texture_confusion += r.texture_confusion / n;
        s.mean_darkness += static_cast<double>(r.darkness) / n;
        s.mean_avg_intensity += r.avg_intensity / n;
        s.mean_skewness += r.skewness / n;
    }
    return s;
}

MetricReport compute_report(ClassifierBundle& bundle, const std::vector<Image8>& images,
                            const std::vector<std::vector<double>>& train_features, std::size_t k) {
    if (images.size() < 2) throw std::invalid_argument("compute_report: need at least 2 images");
    auto out = classify_images(bundle, images);
    auto nn = nn_distance(out.features, train_features, k);
    MetricReport r;
    r.classifier_warning = bundle.warning;
    for (std::size_t i = 0; i < images.size(); ++i) {
        ImageMetrics m;
        m.id = i;
        m.shape_confusion = confusion_score(out.shape_probs[i]);
        m.texture_confusion = confusion_score(out.texture_probs[i]);
        m.nn_distance = nn[i];
        auto ph = photometrics(images[i]);
        m.darkness = ph.darkness;
        m.avg_intensity = ph.avg_intensity;
        m.skewness = ph.skewness;
        m.shape_class = argmax(out.shape_probs[i]);
        m.texture_class = argmax(out.texture_probs[i]);
        r.images.push_back(m);
    }
    r.set = summarize(out.shape_probs, out.texture_probs, r.images, bundle);
    return r;
}

static const char* kReportHeader =
    "id,shape_confusion,texture_confusion,nn_distance,darkness,avg_intensity,skewness,shape_class,texture_class";

std::string report_csv(const MetricReport& report) {
    std::string out = std::string(kReportHeader) + "\n";
    for (const auto& m : report.images) {
        out += std::to_string(m.id) + ',' + fmt(m.shape_confusion) + ',' + fmt(m.texture_confusion) + ',' +
               fmt(m.nn_distance) + ',' + std::to_string(m.darkness) + ',' + fmt(m.avg_intensity) + ',' +
               fmt(m.skewness) + ',' + std::to_string(m.shape_class) + ',' + std::to_string(m.texture_class) + '\n';
    }
    return out;
}

nlohmann::ordered_json report_json(const MetricReport& report) {
    const auto& s = report.set;
    nlohmann::ordered_json j;
    j["n_images"] = report.images.size();
    j["inception_shape"] = s.inception_shape;
    j["inception_texture"] = s.inception_texture;
    j["am_shape"] = s.am_shape;
    j["am_texture"] = s.am_texture;
    j["mean_nn_distance"] = s.mean_nn_distance;
    j["mean_shape_confusion"] = s.mean_shape_confusion;
    j["mean_texture_confusion"] = s.mean_texture_confusion;
    j["mean_darkness"] = s.mean_darkness;
    j["mean_avg_intensity"] = s.mean_avg_intensity;
    j["mean_skewness"] = s.mean_skewness;
    j["shape_histogram"] = s.shape_histogram;
    j["texture_histogram"] = s.texture_histogram;
    j["am_clamped_entries"] = s.am_clamped;
    j["classifier_warning"] = report.classifier_warning;
    return j;
}

std::vector<ImageMetrics> read_report_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kReportHeader) {
        throw std::runtime_error(path.string() + ": row 1: expected header '" + std::string(kReportHeader) + "'");
    }
    std::vector<ImageMetrics> rows;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> c;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) c.push_back(cell);
        if (c.size() != 9) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": expected 9 columns, got " +
                                     std::to_string(c.size()));
        }
        try {
            ImageMetrics m;
            m.id = std::stoull(c[0]);
            m.shape_confusion = std::stod(c[1]);
            m.texture_confusion = std::stod(c[2]);
            m.nn_distance = std::stod(c[3]);
            m.darkness = std::stoull(c[4]);
            m.avg_intensity = std::stod(c[5]);
            m.skewness = std::stod(c[6]);
            m.shape_class = std::stoull(c[7]);
            m.texture_class = std::stoull(c[8]);
            rows.push_back(m);
        } catch (const std::logic_error&) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": malformed number");
        }
    }
    return rows;
}

}  // namespace creagen
