#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "creagen/metrics.hpp"

namespace creagen {

inline constexpr std::size_t kNumQuestions = 6;
inline constexpr std::size_t kExpectedRaters = 5;

/// q1..q5 on 1..5 (overall, shape novelty, texture novelty, shape complexity,
/// texture complexity); q6 is 1 when the rater answered "designer".
struct RatingRecord {
    std::size_t image_id = 0;
    std::string rater_id;
    std::array<int, kNumQuestions> q{};
};

struct AggregatedRating {
    std::size_t image_id = 0;
    /// Means of q1..q5; the q6 entry is the fraction answering "designer".
    std::array<double, kNumQuestions> mean{};
    std::size_t raters = 0;
    bool flagged = false;  // rater count differs from 5
};

/// Header must be exactly image_id,rater_id,q1,q2,q3,q4,q5,q6. Errors name the row.
std::vector<RatingRecord> parse_ratings(std::istream& in);
std::vector<AggregatedRating> aggregate_ratings(const std::vector<RatingRecord>& records);
std::vector<AggregatedRating> ingest_ratings(const std::filesystem::path& csv);
std::string ratings_csv(const std::vector<RatingRecord>& records);

/// Sample Pearson correlation; rejects unequal lengths, n < 2 and zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Columns of values keyed by image id.
struct Table {
    std::vector<std::size_t> ids;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // rows[i][c] belongs to ids[i]

    std::vector<double> column(std::size_t c) const;
};

Table metric_table(const std::vector<ImageMetrics>& metrics);
Table rating_table(const std::vector<AggregatedRating>& ratings);

struct CorrelationMatrix {
    std::vector<std::string> rows, cols;
    std::vector<std::vector<double>> r;
    std::size_t aligned = 0;
    std::size_t dropped = 0;  // ids present on only one side
};

/// Pearson matrix between the columns of `a` and `b` over the ids both contain.
/// Needs at least 3 aligned ids.
CorrelationMatrix correlation_matrix(const Table& a, const Table& b);
std::string correlation_csv(const CorrelationMatrix& m);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};
/// Two-sided paired Student t-test on d = a - b.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

struct PcaResult {
    std::vector<std::vector<double>> loadings;     // [component][column]
    std::vector<std::vector<double>> projections;  // [row][component]
    std::vector<double> explained_variance;
    std::vector<double> explained_ratio;
    double total_variance = 0.0;
    /// Components beyond the data rank (zero variance).
    std::size_t degenerate = 0;
};

/// Eigen-decomposition of the covariance of the column-centred matrix. Each
/// component's largest-magnitude loading is made positive.
PcaResult pca(const std::vector<std::vector<double>>& matrix, std::size_t components = 2, bool standardize = false);
std::string pca_csv(const PcaResult& r, const std::vector<std::string>& columns, const std::vector<std::size_t>& ids);

struct WundtPoint {
    std::string model;
    double novelty = 0.0;  // mean NN distance of the model's samples
    double rating = 0.0;   // mean overall rating
};
/// Sorted by novelty ascending, ties by model name.
std::vector<WundtPoint> wundt_data(std::vector<WundtPoint> points);
std::string wundt_csv(const std::vector<WundtPoint>& points);

/// Deterministic stand-in ratings for pipeline runs without human raters.
/// Scores lean on the supplied metrics so the correlations are not degenerate.
std::vector<RatingRecord> synthesize_ratings(const std::vector<ImageMetrics>& images, std::size_t raters,
                                             std::uint64_t seed);

}  // namespace creagen
