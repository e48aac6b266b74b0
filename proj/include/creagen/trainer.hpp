#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/divergence.hpp"
#include "creagen/image_io.hpp"
#include "creagen/nets.hpp"
#include "creagen/synth.hpp"
#include "json.hpp"

namespace creagen {

/// Raised for configuration problems; `field` names the offending key.
class ConfigError : public std::invalid_argument {
   public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

   private:
    std::string field_;
};

enum class CreativityMode { none, can, mce, sm, bhattacharyya };
enum class CreativityBranch { shape, texture, shape_texture };
/// saturating: lambda_Gr * sum log(1 - sigmoid(l)); non_saturating: -lambda_Gr * sum log sigmoid(l).
enum class GeneratorLossForm { saturating, non_saturating };

std::string to_string(CreativityMode m);
std::string to_string(CreativityBranch b);
std::string to_string(GeneratorLossForm f);

struct TrainConfig {
    NetworkSpec net;
    double lambda_Dr = 1.0;
    double lambda_Db = 1.0;
    double lambda_Gr = 1.0;
    double lambda_Ge = 0.0;
    double lambda_rec = 10.0;
    CreativityMode creativity = CreativityMode::none;
    double sm_alpha = 0.5;
    double sm_beta = 0.5;
    CreativityBranch creativity_branch = CreativityBranch::texture;
    GeneratorLossForm generator_loss = GeneratorLossForm::saturating;
    Reduction reduction = Reduction::sum;
    double lr = 0.002;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t iterations = 2000;
    std::size_t checkpoint_interval = 500;
    std::size_t keep_checkpoints = 4;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
    /// Creativity term evaluated on one branch's logits.
    Tensor creativity_loss(const Tensor& logits) const;

    nlohmann::ordered_json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Adam over a fixed parameter list; moments live alongside the parameters.
class Adam {
   public:
    Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps);
    /// Applies one update from the gradients currently stored on the parameters.
    /// Parameters without a gradient are left untouched.
    void step();
    std::size_t steps() const { return t_; }

   private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

/// Generator, discriminator and their optimizers.
struct GanModel {
    NetworkSpec spec;
    std::unique_ptr<Generator> generator;
    std::unique_ptr<Discriminator> discriminator;
    ParameterList gen_params;
    ParameterList disc_params;

    explicit GanModel(const NetworkSpec& spec);
    /// Parameters and buffers of both networks, as stored in checkpoints.
    std::vector<NamedTensor> state() const;
    void zero_grad();
};

/// A training batch on the network scale: images in [-1, 1], masks as one
/// channel with the garment at -1 and background at +1.
struct Batch {
    Tensor images;  // [N, 3, S, S]
    Tensor masks;   // [N, 1, S, S] or undefined
    std::vector<int> shape_labels;
    std::vector<int> texture_labels;
};

Batch make_batch(const LabeledDataset& data, const std::vector<std::size_t>& ids, bool with_masks);
Tensor item_to_tensor(const std::vector<const LabeledItem*>& items);
Tensor masks_to_tensor(const std::vector<const std::vector<std::uint8_t>*>& masks, std::size_t size);

/// Loss components of one step, with their weights already applied.
struct StepLosses {
    double total = 0.0;
    double adversarial = 0.0;
    double classification = 0.0;
    double creativity = 0.0;
    double reconstruction = 0.0;
    double grad_norm = 0.0;
};

StepLosses discriminator_step(GanModel& model, Adam& opt, const Batch& real, const Tensor& fake,
                              const TrainConfig& config);
/// `masks` must be defined for mask-conditioned generators. The reconstruction
/// term is added when `masks` is defined and lambda_rec > 0.
StepLosses generator_step(GanModel& model, Adam& opt, const Tensor& z, const Tensor& masks, const TrainConfig& config);

/// sum |G(m, z = 0) - m| with m replicated over the RGB channels.
Tensor reconstruction_loss(Generator& g, const Tensor& masks, std::size_t latent_dim, const ForwardContext& ctx);

struct TrainLogRow {
    std::size_t iteration = 0;
    StepLosses d;
    StepLosses g;
};

class TrainingDiverged : public std::runtime_error {
   public:
    TrainingDiverged(std::size_t iteration, std::string last_checkpoint);
    std::size_t iteration;
    std::string last_checkpoint;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::vector<std::filesystem::path> checkpoints;  // retained, oldest first
    std::vector<std::string> warnings;
};

/// Alternates one discriminator and one generator update per iteration.
/// When `out_dir` is non-empty, writes train_log.csv (deterministic),
/// train_timing.csv (wall clock) and checkpoints/ckpt_NNNNNN.bin, keeping the
/// most recent `keep_checkpoints`.
TrainResult train(const TrainConfig& config, const LabeledDataset& data, const std::filesystem::path& out_dir = {},
                  GanModel* model = nullptr);

std::string train_log_csv(const std::vector<TrainLogRow>& rows);

nlohmann::ordered_json checkpoint_header(const TrainConfig& config, std::size_t iteration);
/// Rebuilds the networks described in a checkpoint header and loads its weights.
std::unique_ptr<GanModel> load_model(const std::filesystem::path& checkpoint);

struct SampleOptions {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    /// Pool of 0/1 masks drawn uniformly for mask-conditioned generators.
    const std::vector<std::vector<std::uint8_t>>* masks = nullptr;
    bool zero_latent = false;
    /// Normalize with per-chunk batch statistics instead of running statistics.
    bool batch_stats = false;
    std::size_t chunk = 64;
};

struct SampleResult {
    std::vector<Image8> images;
    std::vector<std::size_t> mask_index;  // per image, when masks were used
};

/// Eval-mode generation. Outputs are clipped to [-1, 1] and mapped to 8 bits.
SampleResult sample(GanModel& model, const SampleOptions& options);
/// Generator output in [-1, 1] for explicit latents and masks. Eval mode by
/// default; `batch_stats` normalizes with the batch's own statistics, as in
/// training, without touching running statistics.
Tensor generate(GanModel& model, const Tensor& z, const Tensor& masks, bool batch_stats = false);
Image8 tensor_to_image(const Tensor& batch, std::size_t index);

}  // namespace creagen
