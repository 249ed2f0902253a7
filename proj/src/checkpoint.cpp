#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "weno/config_json.hpp"
#include "weno/training.hpp"
#include "weno/util.hpp"

namespace weno {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'W', 'E', 'N', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const CheckpointRecord& record, const std::string& path) {
    json header;
    header["epoch"] = record.epoch;
    header["pipeline"] = record.pipeline;
    header["rng-state"] = record.rng_state;
    header["train-config"] = train_config_to_json(record.train_config);
    header["model-config"] = model_config_to_json(record.model_config);
    json params = json::array();
    for (const auto& [name, tensor] : record.params)
        params.push_back({{"name", name}, {"shape", tensor.shape}});
    header["params"] = std::move(params);
    const std::string header_text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(header_text.size() + 64);
    append_bytes(out, kMagic, sizeof(kMagic));
    append_pod(out, kVersion);
    append_pod(out, static_cast<std::uint64_t>(header_text.size()));
    append_bytes(out, header_text.data(), header_text.size());
    for (const auto& [name, tensor] : record.params)
        append_bytes(out, tensor.data.data(), tensor.data.size() * sizeof(float));
    const std::uint32_t crc = crc32(out.data(), out.size());
    append_pod(out, crc);
    write_file_atomic(path, out.data(), out.size());
}

CheckpointRecord load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t) + 4)
        throw std::runtime_error("checkpoint truncated: " + path);
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);

    std::size_t off = sizeof(kMagic);
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + off, sizeof(version));
    off += sizeof(version);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 ": " + path);

    // integrity first: nothing is interpreted before the checksum passes
    std::uint32_t stored_crc = 0;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, sizeof(stored_crc));
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
        throw std::runtime_error("checkpoint checksum mismatch: " + path);

    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + off, sizeof(header_len));
    off += sizeof(header_len);
    if (off + header_len + 4 > bytes.size())
        throw std::runtime_error("checkpoint header overruns the file: " + path);

    json header;
    try {
        header = json::parse(bytes.begin() + static_cast<long>(off),
                             bytes.begin() + static_cast<long>(off + header_len));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("checkpoint header is not valid JSON: " + path + " (" + e.what() +
                                 ")");
    }
    off += header_len;

    CheckpointRecord record;
    record.version = static_cast<int>(version);
    try {
        record.epoch = header.at("epoch").get<long>();
        record.pipeline = header.at("pipeline").get<std::string>();
        record.rng_state = header.at("rng-state").get<std::string>();
        record.train_config = train_config_from_json(header.at("train-config"), true);
        record.model_config = model_config_from_json(header.at("model-config"), true);
        for (const json& p : header.at("params")) {
            const std::string name = p.at("name").get<std::string>();
            const std::vector<long> shape = p.at("shape").get<std::vector<long>>();
            TensorF tensor(shape);
            const std::size_t len = tensor.data.size() * sizeof(float);
            if (off + len + 4 > bytes.size())
                throw std::runtime_error("checkpoint payload truncated: " + path);
            std::memcpy(tensor.data.data(), bytes.data() + off, len);
            off += len;
            record.params.emplace_back(name, std::move(tensor));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint header is malformed: " + path + " (" + e.what() +
                                 ")");
    }
    if (off + 4 != bytes.size())
        throw std::runtime_error("checkpoint has trailing bytes: " + path);
    record.train_config.validate();
    record.model_config.validate();
    if (record.epoch < 0) throw std::runtime_error("checkpoint epoch is negative: " + path);
    return record;
}

ParameterStore<float> store_from_checkpoint(const CheckpointRecord& record) {
    ParameterStore<float> store;
    for (const auto& [name, tensor] : record.params) store.add(name, tensor);
    return store;
}

}  // namespace weno
