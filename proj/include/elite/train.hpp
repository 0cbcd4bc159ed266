#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elite/checkpoint.hpp"
#include "elite/cips.hpp"
#include "elite/errors.hpp"
#include "elite/stack_io.hpp"

namespace elite::train {

// --- loss -------------------------------------------------------------------------

struct SoftF1 {
    double loss = 1.0;
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
};

/// 1 - 2 tp / (2 tp + fp + fn) from soft counts over valid pixels. When
/// `grad` is non-empty it receives dL/dpred (zero at invalid pixels).
/// Throws InvalidArgument when no pixel is valid.
SoftF1 soft_f1_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                    std::span<const std::uint8_t> valid, std::span<double> grad = {});

// --- optimizer --------------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Learning rate for the t-th step (t >= 1): lr / (1 + decay t).
double decayed_learning_rate(double lr, double decay, std::uint64_t t) noexcept;

/// One Adam step over every tensor. Advances state.step, then updates the
/// moments and parameters in place. `names` labels tensors in diagnostics.
/// Throws NumericalError, leaving everything untouched, on a non-finite
/// gradient.
void adam_step(std::span<nn::Tensor* const> params, std::span<const nn::Tensor> grads, nn::OptimizerState& state,
               double lr, double decay, std::span<const std::string> names = {});

nn::OptimizerState fresh_optimizer(const nn::CipsModel& model);

// --- configuration ----------------------------------------------------------------

struct HyperParams {
    double learning_rate = 0.001;
    double decay = 1e-4;
    std::size_t max_epochs = 20;
    std::size_t patience = 5;
    double dropout = 0.2;
    std::size_t batch_size = 4;
    std::uint64_t seed = 0;
    std::size_t time_steps = 25;  ///< epochs kept per stack by temporal sampling
    double train_ratio = 0.7;
    std::string features = "cos_sin";
    std::size_t kernel = 3;
    std::size_t hidden = 16;

    void validate() const;
    nn::CipsConfig model_config() const;
};

/// Reads a hyperparameter JSON object; absent keys keep their defaults and
/// unknown keys are rejected.
HyperParams parse_hyperparams(const std::string& json_text);
std::string hyperparams_json(const HyperParams& hp);

// --- data -------------------------------------------------------------------------

struct LabeledPatches {
    io::PatchBatch patches;
    io::PatchLabels labels;

    std::size_t size() const noexcept { return patches.samples; }
    LabeledPatches select(std::span<const std::size_t> indices) const;
    /// Appends `other`, which must have the same epochs and features.
    void append(const LabeledPatches& other);
};

/// Temporal sampling to `time_steps`, feature encoding, and tiling of a
/// stack with its labels.
LabeledPatches prepare_patches(const io::InterferogramStack& stack, const io::EliteMask& labels,
                               std::size_t time_steps, io::FeatureMode mode);

/// Seeded Fisher-Yates shuffle of [0, n); the first ceil(ratio n) indices
/// (at most n - 1) train, the rest validate. Throws InvalidArgument if n < 2.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(std::size_t n, double ratio,
                                                                              std::uint64_t seed);

// --- training loop ----------------------------------------------------------------

/// Patience tracker on a loss to minimize; only strict improvements count.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience);

    /// Records one epoch's loss; returns true when training should stop.
    bool update(double loss);
    bool last_improved() const noexcept { return last_improved_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }  ///< 0-based
    double best_loss() const noexcept { return best_; }
    std::size_t epochs_seen() const noexcept { return seen_; }

private:
    std::size_t patience_;
    std::size_t seen_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_;
    bool last_improved_ = false;
};

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_f1 = 0.0;  ///< hard F1 at threshold 0.5, as a fraction
};

struct History {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  ///< 1-based; 0 when no epoch ran
    bool stopped_early = false;

    std::string to_csv() const;
};

/// Raised when the loss becomes non-finite; carries the best model so far.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, nn::Checkpoint last_good, History history)
        : NumericalError(what), last_good_(std::move(last_good)), history_(std::move(history)) {}
    const nn::Checkpoint& last_good() const noexcept { return last_good_; }
    const History& history() const noexcept { return history_; }

private:
    nn::Checkpoint last_good_;
    History history_;
};

struct FitResult {
    nn::Checkpoint checkpoint;  ///< best-validation weights with their optimizer state
    History history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch soft-F1 training with per-epoch validation, early stopping and
/// best-weight restoration. The model's dropout ratio is taken from hp.
FitResult fit(nn::CipsModel model, const LabeledPatches& train_set, const LabeledPatches& val_set,
              const HyperParams& hp, const EpochCallback& on_epoch = {});

/// Continues training from a stored model with fresh optimizer moments.
/// Throws ShapeError when the checkpoint's feature count differs from the data.
FitResult transfer(const nn::Checkpoint& from, const LabeledPatches& train_set, const LabeledPatches& val_set,
                   const HyperParams& hp, const EpochCallback& on_epoch = {});

// --- inference --------------------------------------------------------------------

/// Eval-mode probabilities for every patch, (samples, 100, 100).
std::vector<double> predict_patches(const nn::CipsModel& model, const io::PatchBatch& patches);

struct Prediction {
    io::EliteMask mask;
    std::vector<double> probability;  ///< (h, w), row-major
};

/// Samples the stack to the checkpoint's time steps, tiles, predicts and
/// stitches. A pixel is elite when its probability exceeds `threshold`.
Prediction predict_scene(const nn::Checkpoint& ckpt, const io::InterferogramStack& stack, double threshold);

/// Hard F1 (fraction) of thresholded probabilities against labels over valid pixels.
double hard_f1(std::span<const double> prob, std::span<const std::uint8_t> target,
               std::span<const std::uint8_t> valid, double threshold = 0.5);

}  // namespace elite::train
