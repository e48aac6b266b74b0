#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "creagen/image_io.hpp"
#include "creagen/layers.hpp"
#include "creagen/synth.hpp"
#include "json.hpp"

namespace creagen {

/// Row-major probability matrix: one softmax row per image.
using ProbMatrix = std::vector<std::vector<double>>;

struct ClassifierSpec {
    std::size_t canvas = 64;
    std::size_t width = 32;
    std::size_t feature_dim = 128;
    std::size_t epochs = 8;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const;
    static ClassifierSpec from_json(const nlohmann::json& j);
};

/// Small CNN with a shared trunk, a feature layer and shape/texture heads.
class ShapeTextureClassifier {
   public:
    explicit ShapeTextureClassifier(const ClassifierSpec& spec);

    struct Output {
        Tensor features;  // [N, F]
        Tensor shape_logits;
        Tensor texture_logits;
    };
    Output forward(const Tensor& images, const ForwardContext& ctx);
    ParameterList parameters();

    Sequential trunk;  // image -> features
    std::unique_ptr<Linear> shape_head, texture_head;
};

struct ClassifierBundle {
    ClassifierSpec spec;
    std::unique_ptr<ShapeTextureClassifier> net;
    std::vector<double> train_marginal_shape;    // mean softmax over the training split
    std::vector<double> train_marginal_texture;
    double val_accuracy_shape = 0.0;
    double val_accuracy_texture = 0.0;
    /// Set when either held-out accuracy falls below 90%.
    std::string warning;

    void save(const std::filesystem::path& path) const;
    static ClassifierBundle load(const std::filesystem::path& path);
};

ClassifierBundle train_classifier(const LabeledDataset& data, const ClassifierSpec& spec);

struct ClassifierOutputs {
    ProbMatrix shape_probs;
    ProbMatrix texture_probs;
    std::vector<std::vector<double>> features;
};

/// Eval-mode inference on [N, 3, S, S] images in [-1, 1], processed in chunks.
ClassifierOutputs classify(ClassifierBundle& bundle, const Tensor& images, std::size_t chunk = 128);
ClassifierOutputs classify_images(ClassifierBundle& bundle, const std::vector<Image8>& images);
ClassifierOutputs classify_items(ClassifierBundle& bundle, const std::vector<const LabeledItem*>& items);
Tensor images_to_tensor(const std::vector<Image8>& images, std::size_t begin, std::size_t end);

// Set-level scores over softmax rows.

/// exp(mean_x KL(c(x) || mean_x c(x))). Needs at least 2 rows.
double inception_like_score(const ProbMatrix& probs);

struct AmScore {
    double value = 0.0;
    /// Entries of c(x) or of the set mean clamped to 1e-12 where the training marginal is positive.
    std::size_t clamped = 0;
};
/// mean_x KL(c_train || c(x)) - KL(c_train || mean_x c(x)).
AmScore am_score(const ProbMatrix& probs, const std::vector<double>& train_marginal);

/// Shannon entropy (natural log) of one softmax row.
double confusion_score(const std::vector<double>& probs);
/// Argmax per row, ties to the lowest index.
std::vector<std::size_t> category_histogram(const ProbMatrix& probs);
std::size_t argmax(const std::vector<double>& probs);

/// Mean Euclidean distance from each query to its k nearest rows of `train`, exact.
std::vector<double> nn_distance(const std::vector<std::vector<double>>& queries,
                                const std::vector<std::vector<double>>& train, std::size_t k = 10);

struct Photometrics {
    std::size_t darkness = 0;
    double avg_intensity = 0.0;
    double skewness = 0.0;
};
inline constexpr double kDarknessThreshold = 0.35;
/// BT.601 luma of an RGB image on the [0, 1] scale. Constant images have skewness 0.
Photometrics photometrics(const Image8& image);
Photometrics photometrics_from_luma(const std::vector<double>& y);

struct ImageMetrics {
    std::size_t id = 0;
    double shape_confusion = 0.0;
    double texture_confusion = 0.0;
    double nn_distance = 0.0;
    std::size_t darkness = 0;
    double avg_intensity = 0.0;
    double skewness = 0.0;
    std::size_t shape_class = 0;
    std::size_t texture_class = 0;
};

struct SetMetrics {
    double inception_shape = 0.0;
    double inception_texture = 0.0;
    double am_shape = 0.0;
    double am_texture = 0.0;
    double mean_nn_distance = 0.0;
    double mean_shape_confusion = 0.0;
    double mean_texture_confusion = 0.0;
    double mean_darkness = 0.0;
    double mean_avg_intensity = 0.0;
    double mean_skewness = 0.0;
    std::vector<std::size_t> shape_histogram;
    std::vector<std::size_t> texture_histogram;
    std::size_t am_clamped = 0;
};

struct MetricReport {
    std::vector<ImageMetrics> images;
    SetMetrics set;
    std::string classifier_warning;
};

/// Per-image metrics for `images` (ids 0..N-1) and the set summary.
MetricReport compute_report(ClassifierBundle& bundle, const std::vector<Image8>& images,
                            const std::vector<std::vector<double>>& train_features, std::size_t k = 10);
/// Set summary recomputed from a subset of the classifier outputs.
SetMetrics summarize(const ProbMatrix& shape_probs, const ProbMatrix& texture_probs,
                     const std::vector<ImageMetrics>& rows, const ClassifierBundle& bundle);

/// Column order: id,shape_confusion,texture_confusion,nn_distance,darkness,
/// avg_intensity,skewness,shape_class,texture_class.
std::string report_csv(const MetricReport& report);
nlohmann::ordered_json report_json(const MetricReport& report);
/// Reads the per-image table back; errors carry the row number.
std::vector<ImageMetrics> read_report_csv(const std::filesystem::path& path);

}  // namespace creagen
