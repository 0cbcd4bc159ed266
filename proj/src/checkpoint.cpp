#include "elite/checkpoint.hpp"

#include "binary_io.hpp"

namespace elite::nn {

using nlohmann::ordered_json;

namespace {

constexpr const char* kFormatName = "elite-pixel-checkpoint";
const char* const kRunningNames[6] = {"batchnorm1.running_mean", "batchnorm1.running_var",
                                      "batchnorm2.running_mean", "batchnorm2.running_var",
                                      "batchnorm3.running_mean", "batchnorm3.running_var"};

ordered_json tensor_entry(const std::string& name, const Tensor& t) {
    ordered_json e;
    e["name"] = name;
    e["shape"] = t.shape();
    return e;
}

template <typename T>
T header_value(const ordered_json& header, const char* section, const char* key) {
    try {
        return header.at(section).at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrc::malformed_header,
                          std::string("checkpoint field ") + section + "." + key + ": " + e.what());
    }
}

void check_tensor_list(const ordered_json& list, const std::vector<std::string>& names,
                       const std::vector<const Tensor*>& tensors, const char* what) {
    if (!list.is_array() || list.size() != tensors.size()) {
        throw ShapeError(std::string("checkpoint ") + what + " list does not match the model layout");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& e = list[i];
        if (!e.is_object() || e.value("name", std::string()) != names[i]) {
            throw ShapeError(std::string("checkpoint ") + what + " entry " + std::to_string(i) + " is not " + names[i]);
        }
        const auto shape = e.at("shape").get<Shape>();
        if (shape != tensors[i]->shape()) {
            throw ShapeError("checkpoint tensor " + names[i] + " has shape " + shape_string(shape) +
                             ", configuration implies " + shape_string(tensors[i]->shape()));
        }
    }
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
    const CipsModel& m = ckpt.model;
    m.validate();
    const auto names = m.trainable_names();
    const auto params = m.trainable();
    const auto running = m.running();

    ordered_json header;
    header["format"] = kFormatName;
    header["version"] = kCheckpointVersion;
    header["endian"] = "little";
    header["dtype"] = "f64";
    header["config"] = {{"features", m.config.features},
                        {"kernel", m.config.kernel},
                        {"hidden", m.config.hidden},
                        {"dropout", m.config.dropout},
                        {"feature_mode", ckpt.feature_mode},
                        {"time_steps", ckpt.time_steps}};
    header["layers"] = {"convlstm1", "layernorm", "relu", "convlstm2", "batchnorm1", "relu", "conv1", "batchnorm2",
                        "relu",      "conv2",     "batchnorm3", "relu", "dropout",   "dense", "sigmoid"};
    ordered_json tensors = ordered_json::array();
    for (std::size_t i = 0; i < params.size(); ++i) tensors.push_back(tensor_entry(names[i], *params[i]));
    header["trainable"] = std::move(tensors);
    ordered_json stats = ordered_json::array();
    for (std::size_t i = 0; i < running.size(); ++i) stats.push_back(tensor_entry(kRunningNames[i], *running[i]));
    header["running"] = std::move(stats);
    header["running_initialized"] = {m.bn1.initialized, m.bn2.initialized, m.bn3.initialized};
    if (ckpt.optimizer) {
        header["optimizer"] = {{"name", "adam"}, {"step", ckpt.optimizer->step}};
    } else {
        header["optimizer"] = nullptr;
    }

    std::string bytes = header.dump();
    bytes.push_back('\n');
    for (const auto* t : params) detail::append_le<double>(bytes, t->values());
    for (const auto* t : running) detail::append_le<double>(bytes, t->values());
    if (ckpt.optimizer) {
        const auto& opt = *ckpt.optimizer;
        if (opt.m.size() != params.size() || opt.v.size() != params.size()) {
            throw ShapeError("optimizer state does not match the model");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            require_shape(opt.m[i], params[i]->shape(), "optimizer first moment");
            require_shape(opt.v[i], params[i]->shape(), "optimizer second moment");
        }
        for (const auto& t : opt.m) detail::append_le<double>(bytes, t.values());
        for (const auto& t : opt.v) detail::append_le<double>(bytes, t.values());
    }
    return bytes;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    const auto split = detail::split_header(bytes);
    const auto& header = split.header;
    if (header.value("format", std::string()) != kFormatName) {
        throw FormatError(FormatErrc::malformed_header, "not a checkpoint file");
    }
    detail::require_version(header, kCheckpointVersion);
    if (header.value("endian", std::string()) != "little" || header.value("dtype", std::string()) != "f64") {
        throw FormatError(FormatErrc::malformed_header, "checkpoint payload must be little-endian f64");
    }

    Checkpoint ckpt;
    CipsConfig cfg;
    cfg.features = header_value<std::size_t>(header, "config", "features");
    cfg.kernel = header_value<std::size_t>(header, "config", "kernel");
    cfg.hidden = header_value<std::size_t>(header, "config", "hidden");
    cfg.dropout = header_value<double>(header, "config", "dropout");
    ckpt.feature_mode = header_value<std::string>(header, "config", "feature_mode");
    ckpt.time_steps = header_value<std::size_t>(header, "config", "time_steps");
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrc::malformed_header, std::string("checkpoint config: ") + e.what());
    }
    ckpt.model = CipsModel(cfg);
    CipsModel& m = ckpt.model;
    const auto params = m.trainable();
    const auto running = m.running();

    try {
        check_tensor_list(header.at("trainable"), m.trainable_names(), {params.begin(), params.end()}, "trainable");
        check_tensor_list(header.at("running"), {std::begin(kRunningNames), std::end(kRunningNames)},
                          {running.begin(), running.end()}, "running");
        const auto flags = header.at("running_initialized").get<std::vector<bool>>();
        if (flags.size() != 3) throw FormatError(FormatErrc::malformed_header, "running_initialized needs 3 flags");
        m.bn1.initialized = flags[0];
        m.bn2.initialized = flags[1];
        m.bn3.initialized = flags[2];
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrc::malformed_header, std::string("checkpoint tensor list: ") + e.what());
    }

    std::size_t count = 0;
    for (const auto* t : params) count += t->size();
    std::size_t state_count = count;
    for (const auto* t : running) state_count += t->size();
    const auto& opt_entry = header.contains("optimizer") ? header.at("optimizer") : ordered_json();
    const bool has_opt = !opt_entry.is_null();
    const std::size_t expected = (state_count + (has_opt ? 2 * count : 0)) * sizeof(double);
    const std::size_t available = bytes.size() - split.payload_offset;
    if (available < expected) {
        throw FormatError(FormatErrc::truncated_payload, "checkpoint payload has " + std::to_string(available) +
                                                             " bytes, header implies " + std::to_string(expected));
    }
    if (available > expected) {
        throw FormatError(FormatErrc::trailing_data, std::to_string(available - expected) + " bytes after payload");
    }

    std::size_t offset = split.payload_offset;
    auto read_into = [&](Tensor& t) {
        detail::read_le<double>(bytes, offset, t.values());
        offset += t.size() * sizeof(double);
    };
    for (auto* t : params) read_into(*t);
    for (auto* t : running) read_into(*t);
    if (has_opt) {
        OptimizerState opt;
        try {
            opt.step = opt_entry.at("step").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(FormatErrc::malformed_header, std::string("optimizer step: ") + e.what());
        }
        for (const auto* t : params) opt.m.emplace_back(t->shape());
        for (const auto* t : params) opt.v.emplace_back(t->shape());
        for (auto& t : opt.m) read_into(t);
        for (auto& t : opt.v) read_into(t);
        ckpt.optimizer = std::move(opt);
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file_bytes(path));
}

}  // namespace elite::nn
