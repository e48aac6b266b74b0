#include "creagen/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "creagen/seed.hpp"

namespace creagen {

namespace {

const char* kRatingHeader = "image_id,rater_id,q1,q2,q3,q4,q5,q6";

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

long parse_int(const std::string& s, std::size_t row, const char* col) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw std::invalid_argument("ratings row " + std::to_string(row) + ": column " + col + " is not an integer ('" +
                                    s + "')");
    }
    return v;
}

}  // namespace

std::vector<RatingRecord> parse_ratings(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("ratings: empty input, header required");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRatingHeader) {
        throw std::invalid_argument("ratings row 1: header must be exactly '" + std::string(kRatingHeader) + "'");
    }
    std::vector<RatingRecord> out;
    std::set<std::pair<std::size_t, std::string>> seen;
    std::size_t row = 1;
    static const char* names[] = {"q1", "q2", "q3", "q4", "q5", "q6"};
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto c = split(line);
        if (c.size() != 8) {
            throw std::invalid_argument("ratings row " + std::to_string(row) + ": expected 8 columns, got " +
                                        std::to_string(c.size()));
        }
        RatingRecord r;
        long id = parse_int(c[0], row, "image_id");
        if (id < 0) throw std::invalid_argument("ratings row " + std::to_string(row) + ": negative image_id");
        r.image_id = static_cast<std::size_t>(id);
        r.rater_id = c[1];
        if (r.rater_id.empty()) throw std::invalid_argument("ratings row " + std::to_string(row) + ": empty rater_id");
        for (std::size_t q = 0; q < kNumQuestions; ++q) {
            long v = parse_int(c[2 + q], row, names[q]);
            const long lo = q < 5 ? 1 : 0, hi = q < 5 ? 5 : 1;
            if (v < lo || v > hi) {
                throw std::invalid_argument("ratings row " + std::to_string(row) + ": " + names[q] + " = " +
                                            std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                                            std::to_string(hi) + "]");
            }
            r.q[q] = static_cast<int>(v);
        }
        if (!seen.insert({r.image_id, r.rater_id}).second) {
            throw std::invalid_argument("ratings row " + std::to_string(row) + ": duplicate pair (image " +
                                        std::to_string(r.image_id) + ", rater " + r.rater_id + ")");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<AggregatedRating> aggregate_ratings(const std::vector<RatingRecord>& records) {
    std::map<std::size_t, AggregatedRating> by_id;
    for (const auto& r : records) {
        auto& a = by_id[r.image_id];
        a.image_id = r.image_id;
        ++a.raters;
        for (std::size_t q = 0; q < kNumQuestions; ++q) a.mean[q] += r.q[q];
    }
    std::vector<AggregatedRating> out;
    for (auto& [id, a] : by_id) {
        for (auto& m : a.mean) m /= static_cast<double>(a.raters);
        a.flagged = a.raters != kExpectedRaters;
        out.push_back(a);
    }
    return out;
}

std::vector<AggregatedRating> ingest_ratings(const std::filesystem::path& csv) {
    std::ifstream f(csv);
    if (!f) throw std::invalid_argument("cannot open ratings file " + csv.string());
    return aggregate_ratings(parse_ratings(f));
}

std::string ratings_csv(const std::vector<RatingRecord>& records) {
    std::string out = std::string(kRatingHeader) + "\n";
    for (const auto& r : records) {
        out += std::to_string(r.image_id) + ',' + r.rater_id;
        for (int v : r.q) out += ',' + std::to_string(v);
        out += '\n';
    }
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("pearson: lengths differ (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> Table::column(std::size_t c) const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.at(c));
    return v;
}

Table metric_table(const std::vector<ImageMetrics>& metrics) {
    Table t;
    t.columns = {"shape_confusion", "texture_confusion", "nn_distance", "darkness", "avg_intensity", "skewness"};
    for (const auto& m : metrics) {
        t.ids.push_back(m.id);
        t.rows.push_back({m.shape_confusion, m.texture_confusion, m.nn_distance, static_cast<double>(m.darkness),
                          m.avg_intensity, m.skewness});
    }
    return t;
}

Table rating_table(const std::vector<AggregatedRating>& ratings) {
    Table t;
    t.columns = {"q1_overall", "q2_shape_novelty", "q3_texture_novelty", "q4_shape_complexity",
                 "q5_texture_complexity", "q6_designer_fraction"};
    for (const auto& r : ratings) {
        t.ids.push_back(r.image_id);
        t.rows.emplace_back(r.mean.begin(), r.mean.end());
    }
    return t;
}

CorrelationMatrix correlation_matrix(const Table& a, const Table& b) {
    std::map<std::size_t, std::size_t> ia, ib;
    for (std::size_t i = 0; i < a.ids.size(); ++i) ia[a.ids[i]] = i;
    for (std::size_t i = 0; i < b.ids.size(); ++i) ib[b.ids[i]] = i;
    CorrelationMatrix m;
    m.rows = a.columns;
    m.cols = b.columns;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (auto [id, i] : ia) {
        auto it = ib.find(id);
        if (it == ib.end()) {
            ++m.dropped;
        } else {
            pairs.emplace_back(i, it->second);
        }
    }
    for (auto [id, j] : ib) m.dropped += ia.count(id) ? 0 : 1;
    m.aligned = pairs.size();
    if (m.aligned < 3) {
        throw std::invalid_argument("correlation_matrix: only " + std::to_string(m.aligned) +
                                    " aligned images, need at least 3");
    }
    m.r.assign(a.columns.size(), std::vector<double>(b.columns.size()));
    for (std::size_t p = 0; p < a.columns.size(); ++p) {
        std::vector<double> x;
        for (auto [i, j] : pairs) x.push_back(a.rows[i].at(p));
        for (std::size_t q = 0; q < b.columns.size(); ++q) {
            std::vector<double> y;
            for (auto [i, j] : pairs) y.push_back(b.rows[j].at(q));
            try {
                m.r[p][q] = pearson(x, y);
            } catch (const std::invalid_argument&) {
                m.r[p][q] = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return m;
}

std::string correlation_csv(const CorrelationMatrix& m) {
    std::string out = "metric";
    for (const auto& c : m.cols) out += ',' + c;
    out += '\n';
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        out += m.rows[i];
        for (double v : m.r[i]) out += ',' + (std::isnan(v) ? std::string("nan") : fmt(v));
        out += '\n';
    }
    return out;
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: samples differ in length");
    if (a.size() < 2) throw std::invalid_argument("paired_ttest: need at least 2 pairs");
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd == 0.0) throw std::invalid_argument("paired_ttest: differences have zero spread (degenerate test)");
    TTestResult r;
    r.df = a.size() - 1;
    r.t = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(static_cast<double>(r.df));
    r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
    return r;
}

PcaResult pca(const std::vector<std::vector<double>>& matrix, std::size_t components, bool standardize) {
    if (matrix.size() < 2) throw std::invalid_argument("pca: need at least 2 rows");
    const std::size_t n = matrix.size(), d = matrix[0].size();
    if (d == 0) throw std::invalid_argument("pca: no columns");
    if (components == 0 || components > d) {
        throw std::invalid_argument("pca: components must lie in [1, " + std::to_string(d) + "]");
    }
    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        if (matrix[i].size() != d) throw std::invalid_argument("pca: ragged matrix");
        for (std::size_t j = 0; j < d; ++j) x(i, j) = matrix[i][j];
    }
    x.rowwise() -= x.colwise().mean();
    if (standardize) {
        for (std::size_t j = 0; j < d; ++j) {
            const double s = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n - 1));
            if (s > 0.0) x.col(j) /= s;
        }
    }
    Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw std::runtime_error("pca: eigen-decomposition failed");
    PcaResult r;
    r.total_variance = cov.trace();
    const double scale = std::max(1.0, std::fabs(r.total_variance));
    for (std::size_t c = 0; c < components; ++c) {
        const Eigen::Index idx = static_cast<Eigen::Index>(d - 1 - c);
        double lambda = std::max(0.0, es.eigenvalues()(idx));
        Eigen::VectorXd v = es.eigenvectors().col(idx);
        Eigen::Index big = 0;
        v.cwiseAbs().maxCoeff(&big);
        if (v(big) < 0) v = -v;
        if (lambda <= 1e-12 * scale) {
            lambda = 0.0;
            ++r.degenerate;
        }
        r.explained_variance.push_back(lambda);
        r.explained_ratio.push_back(r.total_variance > 0.0 ? lambda / r.total_variance : 0.0);
        r.loadings.emplace_back(v.data(), v.data() + d);
    }
    r.projections.assign(n, std::vector<double>(components));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < components; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += x(i, j) * r.loadings[c][j];
            r.projections[i][c] = s;
        }
    return r;
}

std::string pca_csv(const PcaResult& r, const std::vector<std::string>& columns, const std::vector<std::size_t>& ids) {
    std::string out = "kind,name";
    for (std::size_t c = 0; c < r.loadings.size(); ++c) out += ",pc" + std::to_string(c + 1);
    out += '\n';
    out += "explained_variance,all";
    for (double v : r.explained_variance) out += ',' + fmt(v);
    out += "\nexplained_ratio,all";
    for (double v : r.explained_ratio) out += ',' + fmt(v);
    out += '\n';
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out += "loading," + columns[j];
        for (const auto& l : r.loadings) out += ',' + fmt(l[j]);
        out += '\n';
    }
    for (std::size_t i = 0; i < r.projections.size(); ++i) {
        out += "projection," + std::to_string(i < ids.size() ? ids[i] : i);
        for (double v : r.projections[i]) out += ',' + fmt(v);
        out += '\n';
    }
    return out;
}

std::vector<WundtPoint> wundt_data(std::vector<WundtPoint> points) {
    std::sort(points.begin(), points.end(), [](const WundtPoint& a, const WundtPoint& b) {
        if (a.novelty != b.novelty) return a.novelty < b.novelty;
        return a.model < b.model;
    });
    return points;
}

std::string wundt_csv(const std::vector<WundtPoint>& points) {
    std::string out = "model,novelty,mean_rating\n";
    for (const auto& p : points) out += p.model + ',' + fmt(p.novelty) + ',' + fmt(p.rating) + '\n';
    return out;
}

std::vector<RatingRecord> synthesize_ratings(const std::vector<ImageMetrics>& images, std::size_t raters,
                                             std::uint64_t seed) {
    if (images.empty()) return {};
    // Standardize the metrics the questions lean on.
    auto zscores = [&](auto get) {
        double m = 0.0, s = 0.0;
        for (const auto& im : images) m += get(im);
        m /= static_cast<double>(images.size());
        for (const auto& im : images) s += (get(im) - m) * (get(im) - m);
        s = std::sqrt(s / static_cast<double>(images.size()));
        std::vector<double> z;
        for (const auto& im : images) z.push_back(s > 0.0 ? (get(im) - m) / s : 0.0);
        return z;
    };
    auto zn = zscores([](const ImageMetrics& m) { return m.nn_distance; });
    auto zs = zscores([](const ImageMetrics& m) { return m.shape_confusion; });
    auto zt = zscores([](const ImageMetrics& m) { return m.texture_confusion; });
    auto zi = zscores([](const ImageMetrics& m) { return m.avg_intensity; });

    std::vector<RatingRecord> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::mt19937_64 rng(derive_seed(seed, {images[i].id}));
        std::normal_distribution<double> noise(0.0, 0.8);
        const double base[5] = {3.0 - 0.5 * zn[i] * zn[i] + 0.4 * zn[i], 3.0 + 0.6 * zs[i] + 0.3 * zn[i],
                                3.0 + 0.6 * zt[i] + 0.3 * zn[i], 3.0 + 0.4 * zs[i] - 0.2 * zi[i],
                                3.0 + 0.4 * zt[i] - 0.2 * zi[i]};
        for (std::size_t r = 0; r < raters; ++r) {
            RatingRecord rec;
            rec.image_id = images[i].id;
            rec.rater_id = "r" + std::to_string(r + 1);
            for (std::size_t q = 0; q < 5; ++q) {
                rec.q[q] = static_cast<int>(std::clamp(std::lround(base[q] + noise(rng)), 1L, 5L));
            }
            std::bernoulli_distribution designer(std::clamp(0.5 + 0.1 * (base[0] - 3.0), 0.05, 0.95));
            rec.q[5] = designer(rng) ? 1 : 0;
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace creagen
