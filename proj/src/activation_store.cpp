#include "saeprobe/activation_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "saeprobe/binary_io.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe {

namespace binary {

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Storage, "cannot open " + path.string());
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorKind::Storage, "read failed for " + path.string());
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const char> data) {
    const auto parent = path.parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
        throw Error(ErrorKind::Storage, "parent directory does not exist: " + parent.string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Storage, "cannot open for writing " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorKind::Storage, "write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span<const char>(text.data(), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
    auto data = read_file(path);
    return {data.begin(), data.end()};
}

}  // namespace binary

void require_finite(std::span<const float> values, const std::string& what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorKind::Validation, what + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

ActivationDataset::ActivationDataset(Matrix data, std::vector<std::uint8_t> labels, DatasetMeta meta)
    : data_(std::move(data)), labels_(std::move(labels)), meta_(std::move(meta)) {
    if (labels_.size() != data_.rows()) {
        throw Error(ErrorKind::Validation, "label count " + std::to_string(labels_.size()) +
                                               " does not match row count " + std::to_string(data_.rows()));
    }
    if (data_.cols() == 0) throw Error(ErrorKind::Validation, "d_model must be positive");
    for (auto label : labels_) {
        if (label > 1) throw Error(ErrorKind::Validation, "labels must be 0 or 1");
    }
}

ActivationDataset ActivationDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<std::uint8_t> labels;
    labels.reserve(indices.size());
    for (auto i : indices) labels.push_back(labels_.at(i));
    return ActivationDataset(data_.select_rows(indices), std::move(labels), meta_);
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

namespace {

nlohmann::ordered_json meta_to_json(const DatasetMeta& meta) {
    nlohmann::ordered_json j;
    j["dataset_name"] = meta.dataset_name;
    j["model_id"] = meta.model_id;
    j["layer"] = meta.layer;
    j["hook_point"] = meta.hook_point;
    j["token_position"] = meta.token_position;
    return j;
}

DatasetMeta meta_from_json(const nlohmann::json& j, const std::string& where) {
    try {
        DatasetMeta meta;
        meta.dataset_name = j.at("dataset_name").get<std::string>();
        meta.model_id = j.at("model_id").get<std::string>();
        meta.layer = j.at("layer").get<std::int64_t>();
        meta.hook_point = j.at("hook_point").get<std::string>();
        meta.token_position = j.at("token_position").get<std::string>();
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, where + ": invalid meta record (" + e.what() + ")");
    }
}

}  // namespace

void write_dataset(const ActivationDataset& ds, const std::filesystem::path& path) {
    require_finite(ds.data().values(), "dataset " + ds.meta().dataset_name);

    binary::Writer w;
    w.bytes(kActivationMagic);
    w.u8(kActivationVersion);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(static_cast<std::uint32_t>(ds.d_model()));
    w.f32s(ds.data().values());
    for (auto label : ds.labels()) w.u8(label);
    binary::write_file(path, w.buffer());
    binary::write_text_file(sidecar_path(path), meta_to_json(ds.meta()).dump(2) + "\n");
}

ActivationDataset load_dataset(const std::filesystem::path& path) {
    const auto bytes = binary::read_file(path);
    binary::Reader r(bytes, path.string());

    if (bytes.size() < 4 || !std::equal(kActivationMagic, kActivationMagic + 4, bytes.begin())) {
        throw Error(ErrorKind::Format, path.string() + ": missing SAPR magic");
    }
    r.bytes(4);
    const auto version = r.u8();
    if (version != kActivationVersion) {
        throw Error(ErrorKind::UnsupportedVersion,
                    path.string() + ": activation file version " + std::to_string(version));
    }
    const std::size_t n = r.u32();
    const std::size_t d = r.u32();
    if (d == 0) throw Error(ErrorKind::Corruption, path.string() + ": d_model is zero");
    const std::size_t expected = n * d * 4 + n;
    if (r.remaining() != expected) {
        throw Error(ErrorKind::Corruption, path.string() + ": payload is " + std::to_string(r.remaining()) +
                                               " bytes, header implies " + std::to_string(expected));
    }
    auto values = r.f32s(n * d);
    require_finite(values, path.string());
    std::vector<std::uint8_t> labels(n);
    for (auto& label : labels) {
        label = r.u8();
        if (label > 1) throw Error(ErrorKind::Corruption, path.string() + ": label byte is not 0/1");
    }

    const auto meta_path = sidecar_path(path);
    nlohmann::json meta_json;
    try {
        meta_json = nlohmann::json::parse(binary::read_text_file(meta_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, meta_path.string() + ": " + e.what());
    }
    return ActivationDataset(Matrix(n, d, std::move(values)), std::move(labels),
                             meta_from_json(meta_json, meta_path.string()));
}

SplitIndices split_indices(std::span<const std::uint8_t> labels, const SplitSpec& spec) {
    const std::size_t n = labels.size();
    if (spec.train_count > n) {
        throw Error(ErrorKind::Capacity, "train_count " + std::to_string(spec.train_count) + " exceeds " +
                                             std::to_string(n) + " examples");
    }

    std::vector<bool> in_train(n, false);
    if (spec.balanced) {
        if (spec.train_count % 2 != 0) {
            throw Error(ErrorKind::Configuration, "balanced split needs an even train_count");
        }
        const std::size_t per_class = spec.train_count / 2;
        for (std::uint8_t cls = 0; cls <= 1; ++cls) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] == cls) members.push_back(i);
            }
            if (members.size() < per_class) {
                throw Error(ErrorKind::Capacity, "label " + std::to_string(cls) + " has " +
                                                     std::to_string(members.size()) + " examples, need " +
                                                     std::to_string(per_class));
            }
            Rng rng(derive_seed(spec.seed, "split-class", cls));
            rng.shuffle(std::span<std::size_t>(members));
            for (std::size_t k = 0; k < per_class; ++k) in_train[members[k]] = true;
        }
    } else {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(derive_seed(spec.seed, "split-all"));
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t k = 0; k < spec.train_count; ++k) in_train[order[k]] = true;
    }

    SplitIndices out;
    out.train.reserve(spec.train_count);
    out.test.reserve(n - spec.train_count);
    for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.test).push_back(i);
    return out;
}

TrainTestSplit balance_and_split(const ActivationDataset& ds, const SplitSpec& spec) {
    const auto idx = split_indices(ds.labels(), spec);
    return {ds.subset(idx.train), ds.subset(idx.test)};
}

}  // namespace saeprobe
