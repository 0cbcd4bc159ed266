#include "elite/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "elite/parallel.hpp"
#include "elite/rng.hpp"

namespace elite::train {

namespace {
// Stream domains under hp.seed, kept apart from the synthetic-scene domains.
constexpr std::uint64_t kSplitStream = 3ULL << 40;
constexpr std::uint64_t kShuffleDomain = 4ULL << 40;
constexpr std::uint64_t kDropoutDomain = 5ULL << 40;
}  // namespace

// --- loss -------------------------------------------------------------------------

SoftF1 soft_f1_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                    std::span<const std::uint8_t> valid, std::span<double> grad) {
    if (pred.size() != target.size() || pred.size() != valid.size()) {
        throw ShapeError("soft F1: prediction, target and validity sizes differ");
    }
    if (!grad.empty() && grad.size() != pred.size()) throw ShapeError("soft F1: gradient buffer has the wrong size");
    SoftF1 r;
    std::size_t counted = 0;
    double sum_p = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!valid[i]) continue;
        ++counted;
        const double p = pred[i];
        const double y = target[i] ? 1.0 : 0.0;
        r.tp += p * y;
        r.fp += p * (1.0 - y);
        r.fn += (1.0 - p) * y;
        sum_p += p;
        sum_y += y;
    }
    if (counted == 0) throw InvalidArgument("soft F1 needs at least one valid pixel");
    const double denom = sum_p + sum_y;  // == 2 tp + fp + fn
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    if (denom == 0.0) {
        r.loss = 1.0;
        return r;
    }
    r.loss = 1.0 - 2.0 * r.tp / denom;
    if (!grad.empty()) {
        const double shared = 2.0 * r.tp / (denom * denom);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (valid[i]) grad[i] = shared - (target[i] ? 2.0 / denom : 0.0);
        }
    }
    return r;
}

double hard_f1(std::span<const double> prob, std::span<const std::uint8_t> target,
               std::span<const std::uint8_t> valid, double threshold) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        if (!valid[i]) continue;
        const bool p = prob[i] > threshold, t = target[i] != 0;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    const std::uint64_t den = 2 * tp + fp + fn;
    return den ? 2.0 * static_cast<double>(tp) / static_cast<double>(den) : 0.0;
}

// --- optimizer --------------------------------------------------------------------

double decayed_learning_rate(double lr, double decay, std::uint64_t t) noexcept {
    return lr / (1.0 + decay * static_cast<double>(t));
}

void adam_step(std::span<nn::Tensor* const> params, std::span<const nn::Tensor> grads, nn::OptimizerState& state,
               double lr, double decay, std::span<const std::string> names) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("Adam: parameter, gradient and moment counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        nn::require_shape(grads[i], params[i]->shape(), "Adam gradient");
        nn::require_shape(state.m[i], params[i]->shape(), "Adam first moment");
        nn::require_shape(state.v[i], params[i]->shape(), "Adam second moment");
        for (std::size_t j = 0; j < grads[i].size(); ++j) {
            if (!std::isfinite(grads[i][j])) {
                const std::string label = i < names.size() ? names[i] : "tensor " + std::to_string(i);
                throw NumericalError("non-finite gradient " + std::to_string(grads[i][j]) + " in " + label +
                                     " at flat index " + std::to_string(j) + " (step " +
                                     std::to_string(state.step + 1) + ")");
            }
        }
    }
    const std::uint64_t t = ++state.step;
    const double lr_t = decayed_learning_rate(lr, decay, t);
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->values();
        auto m = state.m[i].values();
        auto v = state.v[i].values();
        const auto g = grads[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
            v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            p[j] -= lr_t * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
        }
    }
}

nn::OptimizerState fresh_optimizer(const nn::CipsModel& model) {
    nn::OptimizerState s;
    s.m = nn::zero_gradients(model);
    s.v = nn::zero_gradients(model);
    return s;
}

// --- configuration ----------------------------------------------------------------

void HyperParams::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be > 0");
    if (!(decay >= 0.0) || !std::isfinite(decay)) throw InvalidArgument("decay must be >= 0");
    if (patience < 1) throw InvalidArgument("patience must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must be in [0, 1)");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (time_steps < 2) throw InvalidArgument("time_steps must be >= 2");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw InvalidArgument("train_ratio must be in (0, 1)");
    (void)io::feature_mode_from_string(features);
    model_config().validate();
}

nn::CipsConfig HyperParams::model_config() const {
    nn::CipsConfig c;
    c.features = io::feature_count(io::feature_mode_from_string(features));
    c.kernel = kernel;
    c.hidden = hidden;
    c.dropout = dropout;
    return c;
}

HyperParams parse_hyperparams(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("hyperparameters: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("hyperparameters must be a JSON object");
    HyperParams hp;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "learning_rate") hp.learning_rate = value.get<double>();
            else if (key == "decay") hp.decay = value.get<double>();
            else if (key == "max_epochs") hp.max_epochs = value.get<std::size_t>();
            else if (key == "patience") hp.patience = value.get<std::size_t>();
            else if (key == "dropout") hp.dropout = value.get<double>();
            else if (key == "batch_size") hp.batch_size = value.get<std::size_t>();
            else if (key == "seed") hp.seed = value.get<std::uint64_t>();
            else if (key == "time_steps") hp.time_steps = value.get<std::size_t>();
            else if (key == "train_ratio") hp.train_ratio = value.get<double>();
            else if (key == "features") hp.features = value.get<std::string>();
            else if (key == "kernel") hp.kernel = value.get<std::size_t>();
            else if (key == "hidden") hp.hidden = value.get<std::size_t>();
            else throw InvalidArgument("unknown hyperparameter '" + key + "'");
        }
    } catch (const nlohmann::json::type_error& e) {
        throw InvalidArgument(std::string("hyperparameters: ") + e.what());
    }
    hp.validate();
    return hp;
}

std::string hyperparams_json(const HyperParams& hp) {
    nlohmann::ordered_json j;
    j["learning_rate"] = hp.learning_rate;
    j["decay"] = hp.decay;
    j["max_epochs"] = hp.max_epochs;
    j["patience"] = hp.patience;
    j["dropout"] = hp.dropout;
    j["batch_size"] = hp.batch_size;
    j["seed"] = hp.seed;
    j["time_steps"] = hp.time_steps;
    j["train_ratio"] = hp.train_ratio;
    j["features"] = hp.features;
    j["kernel"] = hp.kernel;
    j["hidden"] = hp.hidden;
    return j.dump(2) + "\n";
}

// --- data -------------------------------------------------------------------------

LabeledPatches LabeledPatches::select(std::span<const std::size_t> indices) const {
    return {patches.select(indices), labels.select(indices)};
}

void LabeledPatches::append(const LabeledPatches& other) {
    if (patches.samples == 0) {
        *this = other;
        return;
    }
    if (other.patches.epochs != patches.epochs || other.patches.features != patches.features) {
        throw ShapeError("cannot combine patches with different time steps or features");
    }
    patches.samples += other.patches.samples;
    patches.data.insert(patches.data.end(), other.patches.data.begin(), other.patches.data.end());
    patches.valid.insert(patches.valid.end(), other.patches.valid.begin(), other.patches.valid.end());
    patches.origin.insert(patches.origin.end(), other.patches.origin.begin(), other.patches.origin.end());
    labels.samples += other.labels.samples;
    labels.elite.insert(labels.elite.end(), other.labels.elite.begin(), other.labels.elite.end());
    labels.valid.insert(labels.valid.end(), other.labels.valid.begin(), other.labels.valid.end());
}

LabeledPatches prepare_patches(const io::InterferogramStack& stack, const io::EliteMask& labels,
                               std::size_t time_steps, io::FeatureMode mode) {
    if (labels.height != stack.height || labels.width != stack.width) {
        throw ShapeError("label mask size differs from the stack");
    }
    if (stack.epochs < time_steps) {
        throw ShapeError("stack has " + std::to_string(stack.epochs) + " epochs, fewer than the " +
                         std::to_string(time_steps) + " time steps requested");
    }
    const io::InterferogramStack sampled = io::temporal_sample(stack, time_steps);
    return {io::extract_patches(sampled, mode), io::extract_label_patches(labels)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(std::size_t n, double ratio,
                                                                              std::uint64_t seed) {
    if (n < 2) throw InvalidArgument("a train/validation split needs at least 2 samples");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must be in (0, 1)");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    CounterRng rng(seed, kSplitStream);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.next_below(i + 1)]);
    auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return {std::move(train), std::move(val)};
}

// --- training loop ----------------------------------------------------------------

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw InvalidArgument("patience must be >= 1");
}

bool EarlyStopping::update(double loss) {
    last_improved_ = loss < best_;
    if (last_improved_) {
        best_ = loss;
        best_epoch_ = seen_;
        since_best_ = 0;
    } else {
        ++since_best_;
    }
    ++seen_;
    return since_best_ >= patience_;
}

std::string History::to_csv() const {
    std::string out = "epoch,train_loss,val_loss,val_f1\n";
    char line[128];
    for (const auto& e : epochs) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.val_f1);
        out += line;
    }
    return out;
}

namespace {

nn::BatchView view_of(const io::PatchBatch& b) {
    return {b.data.data(), b.samples, b.epochs, io::PatchBatch::side, io::PatchBatch::side, b.features};
}

struct Validation {
    double loss;
    double f1;
};

Validation validate_model(const nn::CipsModel& model, const LabeledPatches& val) {
    const auto prob = predict_patches(model, val.patches);
    const auto soft = soft_f1_loss(prob, val.labels.elite, val.labels.valid);
    return {soft.loss, hard_f1(prob, val.labels.elite, val.labels.valid)};
}

}  // namespace

FitResult fit(nn::CipsModel model, const LabeledPatches& train_set, const LabeledPatches& val_set,
              const HyperParams& hp, const EpochCallback& on_epoch) {
    hp.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw InvalidArgument("training and validation sets must be non-empty");
    if (train_set.patches.epochs != val_set.patches.epochs || train_set.patches.features != val_set.patches.features) {
        throw ShapeError("training and validation patches differ in time steps or features");
    }
    if (train_set.patches.features != model.config.features) {
        throw ShapeError("data has " + std::to_string(train_set.patches.features) + " features, model expects " +
                         std::to_string(model.config.features));
    }
    model.config.dropout = hp.dropout;
    model.validate();

    nn::OptimizerState opt = fresh_optimizer(model);
    const auto names = model.trainable_names();
    auto snapshot = [&](const nn::CipsModel& m, const nn::OptimizerState& o) {
        nn::Checkpoint c;
        c.model = m;
        c.feature_mode = hp.features;
        c.time_steps = train_set.patches.epochs;
        c.optimizer = o;
        return c;
    };

    FitResult result{snapshot(model, opt), {}};
    EarlyStopping stopper(hp.patience);
    const std::size_t n = train_set.size();
    std::uint64_t global_step = 0;
    nn::CipsTape tape;

    for (std::size_t epoch = 0; epoch < hp.max_epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        CounterRng shuffle(hp.seed, kShuffleDomain + epoch);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.next_below(i + 1)]);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += hp.batch_size) {
            const std::size_t end = std::min(n, start + hp.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const LabeledPatches mb = train_set.select(idx);

            const std::uint64_t dropout_seed = CounterRng::stream_key(hp.seed, kDropoutDomain + global_step);
            const nn::Tensor prob = nn::cips_forward(view_of(mb.patches), model, nn::Mode::train, dropout_seed, &tape);
            std::vector<double> d_prob(prob.size());
            const SoftF1 loss = soft_f1_loss(prob.values(), mb.labels.elite, mb.labels.valid, d_prob);
            if (!std::isfinite(loss.loss)) {
                throw TrainingDiverged("non-finite training loss at epoch " + std::to_string(epoch + 1),
                                       result.checkpoint, result.history);
            }
            auto grads = nn::zero_gradients(model);
            nn::cips_backward(tape, model, d_prob, grads);
            nn::update_running_stats(model, tape);
            try {
                adam_step(model.trainable(), grads, opt, hp.learning_rate, hp.decay, names);
            } catch (const NumericalError& e) {
                throw TrainingDiverged(e.what(), result.checkpoint, result.history);
            }
            loss_sum += loss.loss;
            ++batches;
            ++global_step;
        }

        const Validation v = validate_model(model, val_set);
        if (!std::isfinite(v.loss)) {
            throw TrainingDiverged("non-finite validation loss at epoch " + std::to_string(epoch + 1), result.checkpoint,
                                   result.history);
        }
        const EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(batches), v.loss, v.f1};
        result.history.epochs.push_back(rec);
        const bool stop = stopper.update(v.loss);
        if (stopper.last_improved()) {
            result.checkpoint = snapshot(model, opt);
            result.history.best_epoch = epoch + 1;
        }
        if (on_epoch) on_epoch(rec);
        if (stop) {
            result.history.stopped_early = true;
            break;
        }
    }
    return result;
}

FitResult transfer(const nn::Checkpoint& from, const LabeledPatches& train_set, const LabeledPatches& val_set,
                   const HyperParams& hp, const EpochCallback& on_epoch) {
    if (from.model.config.features != train_set.patches.features) {
        throw ShapeError("checkpoint expects " + std::to_string(from.model.config.features) +
                         " features per time step, data has " + std::to_string(train_set.patches.features));
    }
    if (from.feature_mode != hp.features) {
        throw ShapeError("checkpoint was trained on '" + from.feature_mode + "' features, configuration asks for '" +
                         hp.features + "'");
    }
    return fit(from.model, train_set, val_set, hp, on_epoch);
}

// --- inference --------------------------------------------------------------------

std::vector<double> predict_patches(const nn::CipsModel& model, const io::PatchBatch& patches) {
    std::vector<double> prob(patches.samples * io::PatchBatch::pixels);
    const std::size_t chunk = std::max<std::size_t>(4, thread_count());
    for (std::size_t start = 0; start < patches.samples; start += chunk) {
        const std::size_t count = std::min(chunk, patches.samples - start);
        nn::BatchView view = view_of(patches);
        view.data += start * patches.sample_stride();
        view.samples = count;
        const nn::Tensor p = nn::cips_forward(view, model, nn::Mode::eval, 0);
        std::copy(p.values().begin(), p.values().end(), prob.begin() + static_cast<std::ptrdiff_t>(start * io::PatchBatch::pixels));
    }
    return prob;
}

Prediction predict_scene(const nn::Checkpoint& ckpt, const io::InterferogramStack& stack, double threshold) {
    stack.validate();
    const io::FeatureMode mode = io::feature_mode_from_string(ckpt.feature_mode);
    if (ckpt.time_steps < 2 || stack.epochs < ckpt.time_steps) {
        throw ShapeError("stack has " + std::to_string(stack.epochs) + " epochs; the checkpoint needs " +
                         std::to_string(ckpt.time_steps));
    }
    const io::PatchBatch patches = io::extract_patches(io::temporal_sample(stack, ckpt.time_steps), mode);
    const auto prob = predict_patches(ckpt.model, patches);

    io::PatchBatch maps;
    maps.samples = patches.samples;
    maps.epochs = 1;
    maps.features = 1;
    maps.data = prob;
    maps.origin = patches.origin;
    maps.valid = patches.valid;
    const io::FeaturePlanes stitched = io::reassemble_patches(maps, stack.height, stack.width);

    Prediction out{io::EliteMask(stack.height, stack.width), stitched.data};
    for (std::size_t i = 0; i < out.probability.size(); ++i) out.mask.elite[i] = out.probability[i] > threshold;
    return out;
}

}  // namespace elite::train
