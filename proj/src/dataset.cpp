#include "weno/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "weno/util.hpp"

namespace weno {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "MILDS-1";
const std::array<const char*, 3> kSplitNames = {"train", "valid", "test"};

}  // namespace

void GenSpec::validate() const {
    if (train_bags < 1 || valid_bags < 1 || test_bags < 1)
        throw std::invalid_argument("generation spec: every split needs at least one bag");
    if (instances_per_bag < 1)
        throw std::invalid_argument("generation spec: instances per bag must be >= 1");
    if (dim < 1) throw std::invalid_argument("generation spec: feature dimension must be >= 1");
    if (!(positive_ratio > 0.0 && positive_ratio <= 1.0))
        throw std::invalid_argument("generation spec: positive-instance ratio must be in (0, 1]");
    if (!(positive_bag_fraction > 0.0 && positive_bag_fraction < 1.0))
        throw std::invalid_argument("generation spec: positive-bag fraction must be in (0, 1)");
    if (!(separation > 0.0)) throw std::invalid_argument("generation spec: separation must be > 0");
    if (!(near_fraction >= 0.0 && near_fraction <= 1.0))
        throw std::invalid_argument("generation spec: near fraction must be in [0, 1]");
    if (!(near_scale >= 0.0 && near_scale <= 1.0))
        throw std::invalid_argument("generation spec: near scale must be in [0, 1]");
}

const std::vector<Bag>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split: " + name);
}

int bag_label(const std::vector<int>& instance_labels) {
    if (instance_labels.empty())
        throw std::invalid_argument("bag label undefined for an empty instance list");
    for (int y : instance_labels) {
        if (y != 0 && y != 1)
            throw std::invalid_argument("instance labels must be 0 or 1, got " +
                                        std::to_string(y));
        if (y == 1) return 1;
    }
    return 0;
}

namespace {

// One split's bags. Positive bags carry max(1, lround(ratio * n)) positive
// instances at shuffled positions; labels are assigned to a shuffled bag
// order so splits are not sorted by class.
std::vector<Bag> generate_split(const GenSpec& spec, long bag_count, std::mt19937_64& rng,
                                long& next_bag_id, long& next_instance_id, bool& rounded_up) {
    const long n = spec.instances_per_bag;
    long pos_count = std::lround(spec.positive_ratio * static_cast<double>(n));
    if (pos_count == 0) {
        pos_count = 1;
        rounded_up = true;
    }
    const long pos_bags = std::lround(spec.positive_bag_fraction * static_cast<double>(bag_count));

    std::vector<int> bag_labels(static_cast<std::size_t>(bag_count), 0);
    std::fill(bag_labels.begin(), bag_labels.begin() + pos_bags, 1);
    std::shuffle(bag_labels.begin(), bag_labels.end(), rng);

    // Positive mean direction: unit vector along (1,...,1) scaled to the
    // requested separation.
    const double mean_far = spec.separation / std::sqrt(static_cast<double>(spec.dim));
    const double mean_near = mean_far * spec.near_scale;

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Bag> bags;
    bags.reserve(static_cast<std::size_t>(bag_count));
    for (long b = 0; b < bag_count; ++b) {
        Bag bag;
        bag.bag_id = next_bag_id++;
        bag.label = bag_labels[static_cast<std::size_t>(b)];

        std::vector<int> inst_labels(static_cast<std::size_t>(n), 0);
        if (bag.label == 1) {
            std::fill(inst_labels.begin(), inst_labels.begin() + pos_count, 1);
            std::shuffle(inst_labels.begin(), inst_labels.end(), rng);
        }

        bag.instances.reserve(static_cast<std::size_t>(n));
        for (long j = 0; j < n; ++j) {
            Instance inst;
            inst.instance_id = next_instance_id++;
            inst.true_label = inst_labels[static_cast<std::size_t>(j)];
            double mean = 0.0;
            if (inst.true_label == 1)
                mean = unit(rng) < spec.near_fraction ? mean_near : mean_far;
            inst.features.resize(static_cast<std::size_t>(spec.dim));
            for (auto& f : inst.features) f = static_cast<float>(mean + gauss(rng));
            bag.instances.push_back(std::move(inst));
        }

        std::vector<int> check;
        check.reserve(bag.instances.size());
        for (const auto& inst : bag.instances) check.push_back(inst.true_label);
        if (bag_label(check) != bag.label)
            throw std::logic_error("generated bag violates the bag label rule");
        bags.push_back(std::move(bag));
    }
    return bags;
}

}  // namespace

Dataset generate_synthetic(const GenSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.dim = spec.dim;
    ds.spec = spec;

    std::mt19937_64 rng(spec.seed);
    long next_bag_id = 0;
    long next_instance_id = 0;
    bool rounded_up = false;
    ds.train = generate_split(spec, spec.train_bags, rng, next_bag_id, next_instance_id,
                              rounded_up);
    ds.valid = generate_split(spec, spec.valid_bags, rng, next_bag_id, next_instance_id,
                              rounded_up);
    ds.test = generate_split(spec, spec.test_bags, rng, next_bag_id, next_instance_id, rounded_up);
    if (rounded_up)
        ds.warnings.push_back("positive-instance count per positive bag rounded up to 1");
    return ds;
}

namespace {

// Largest-remainder apportionment of `total` over `fractions`; ties go to
// the earlier split. Optional per-split capacities cap the result.
std::array<long, 3> apportion(long total, const std::array<double, 3>& fractions,
                              const std::array<long, 3>* capacity) {
    std::array<long, 3> out{};
    std::array<double, 3> remainder{};
    long assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double quota = fractions[static_cast<std::size_t>(i)] * static_cast<double>(total);
        out[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(quota));
        remainder[static_cast<std::size_t>(i)] =
            quota - std::floor(quota);
        assigned += out[static_cast<std::size_t>(i)];
    }
    long left = total - assigned;
    // Grant leftovers by remainder (descending), split order on ties.
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return remainder[static_cast<std::size_t>(a)] > remainder[static_cast<std::size_t>(b)];
    });
    for (int round = 0; left > 0; ++round) {
        if (round > 3 * (static_cast<int>(total) + 1))
            throw std::logic_error("apportionment cannot satisfy the split capacities");
        const int i = order[static_cast<std::size_t>(round % 3)];
        if (capacity &&
            out[static_cast<std::size_t>(i)] >= (*capacity)[static_cast<std::size_t>(i)])
            continue;
        ++out[static_cast<std::size_t>(i)];
        --left;
    }
    if (capacity) {
        for (int i = 0; i < 3; ++i) {
            auto& v = out[static_cast<std::size_t>(i)];
            v = std::min(v, (*capacity)[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

}  // namespace

SplitResult split_dataset(const std::vector<Bag>& bags, const std::array<double, 3>& fractions,
                          unsigned long long seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw std::invalid_argument("split fractions must be non-negative");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1, got " + std::to_string(sum));
    if (bags.empty()) throw std::invalid_argument("cannot split an empty bag list");

    std::vector<long> pos_idx, neg_idx;
    for (long i = 0; i < static_cast<long>(bags.size()); ++i)
        (bags[static_cast<std::size_t>(i)].label == 1 ? pos_idx : neg_idx).push_back(i);

    const long total = static_cast<long>(bags.size());
    const std::array<long, 3> sizes = apportion(total, fractions, nullptr);
    // Positives fit within the split sizes; negatives take the rest.
    std::array<long, 3> pos_sizes =
        apportion(static_cast<long>(pos_idx.size()), fractions, &sizes);
    std::array<long, 3> neg_sizes{};
    for (int i = 0; i < 3; ++i)
        neg_sizes[static_cast<std::size_t>(i)] =
            sizes[static_cast<std::size_t>(i)] - pos_sizes[static_cast<std::size_t>(i)];

    for (int i = 0; i < 3; ++i) {
        if (fractions[static_cast<std::size_t>(i)] > 0.0 && sizes[static_cast<std::size_t>(i)] == 0)
            throw std::runtime_error(std::string("split '") +
                                     kSplitNames[static_cast<std::size_t>(i)] +
                                     "' received no bags; not enough data for its fraction");
    }

    std::mt19937_64 rng(seed);
    std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
    std::shuffle(neg_idx.begin(), neg_idx.end(), rng);

    SplitResult result;
    std::array<std::vector<Bag>*, 3> outs = {&result.train, &result.valid, &result.test};
    std::size_t p = 0, q = 0;
    for (int i = 0; i < 3; ++i) {
        auto& out = *outs[static_cast<std::size_t>(i)];
        for (long c = 0; c < pos_sizes[static_cast<std::size_t>(i)]; ++c)
            out.push_back(bags[static_cast<std::size_t>(pos_idx[p++])]);
        for (long c = 0; c < neg_sizes[static_cast<std::size_t>(i)]; ++c)
            out.push_back(bags[static_cast<std::size_t>(neg_idx[q++])]);
        std::shuffle(out.begin(), out.end(), rng);
    }
    return result;
}

// --- serialization ---------------------------------------------------------

namespace {

std::vector<std::uint8_t> encode_split(const std::vector<Bag>& bags, long dim, json& records,
                                       const std::string& file_name) {
    std::vector<std::uint8_t> blob;
    for (const Bag& bag : bags) {
        if (bag.instances.empty())
            throw std::invalid_argument("cannot save bag " + std::to_string(bag.bag_id) +
                                        ": a bag needs at least one instance");
        json rec;
        rec["bag-id"] = bag.bag_id;
        rec["bag-label"] = bag.label;
        rec["n"] = static_cast<long>(bag.instances.size());
        rec["file"] = file_name;
        rec["offset"] = static_cast<long>(blob.size());
        records.push_back(rec);
        for (const Instance& inst : bag.instances) {
            if (static_cast<long>(inst.features.size()) != dim)
                throw std::invalid_argument(
                    "instance " + std::to_string(inst.instance_id) + " has dimension " +
                    std::to_string(inst.features.size()) + ", dataset declares " +
                    std::to_string(dim));
            append_bytes(blob, inst.features.data(), inst.features.size() * sizeof(float));
        }
        for (const Instance& inst : bag.instances) {
            if (inst.true_label != 0 && inst.true_label != 1)
                throw std::invalid_argument("instance label must be 0 or 1");
            blob.push_back(static_cast<std::uint8_t>(inst.true_label));
        }
    }
    return blob;
}

json spec_to_json(const GenSpec& s) {
    json j;
    j["train-bags"] = s.train_bags;
    j["valid-bags"] = s.valid_bags;
    j["test-bags"] = s.test_bags;
    j["instances-per-bag"] = s.instances_per_bag;
    j["dim"] = s.dim;
    j["positive-bag-fraction"] = s.positive_bag_fraction;
    j["positive-ratio"] = s.positive_ratio;
    j["separation"] = s.separation;
    j["near-fraction"] = s.near_fraction;
    j["near-scale"] = s.near_scale;
    j["seed"] = s.seed;
    return j;
}

GenSpec spec_from_json(const json& j) {
    GenSpec s;
    s.train_bags = j.at("train-bags").get<long>();
    s.valid_bags = j.at("valid-bags").get<long>();
    s.test_bags = j.at("test-bags").get<long>();
    s.instances_per_bag = j.at("instances-per-bag").get<long>();
    s.dim = j.at("dim").get<long>();
    s.positive_bag_fraction = j.at("positive-bag-fraction").get<double>();
    s.positive_ratio = j.at("positive-ratio").get<double>();
    s.separation = j.at("separation").get<double>();
    s.near_fraction = j.at("near-fraction").get<double>();
    s.near_scale = j.at("near-scale").get<double>();
    s.seed = j.at("seed").get<unsigned long long>();
    return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);

    json manifest;
    manifest["format"] = kFormatName;
    manifest["format-version"] = kFormatVersion;
    manifest["dimension"] = ds.dim;
    manifest["spec"] = spec_to_json(ds.spec);
    if (!ds.warnings.empty()) manifest["warnings"] = ds.warnings;

    const std::array<const std::vector<Bag>*, 3> splits = {&ds.train, &ds.valid, &ds.test};
    json split_obj = json::object();
    for (int i = 0; i < 3; ++i) {
        const std::string name = kSplitNames[static_cast<std::size_t>(i)];
        const std::string file_name = name + ".bin";
        json records = json::array();
        const auto blob = encode_split(*splits[static_cast<std::size_t>(i)], ds.dim, records,
                                       file_name);
        json s;
        s["count"] = static_cast<long>(splits[static_cast<std::size_t>(i)]->size());
        s["file"] = file_name;
        s["crc32"] = crc32(blob.data(), blob.size());
        s["bags"] = std::move(records);
        split_obj[name] = std::move(s);
        write_file_atomic((fs::path(directory) / file_name).string(), blob.data(), blob.size());
    }
    manifest["splits"] = std::move(split_obj);

    const std::string text = manifest.dump(2) + "\n";
    write_file_atomic((fs::path(directory) / "manifest.json").string(), text.data(), text.size());
}

Dataset load_dataset(const std::string& directory) {
    namespace fs = std::filesystem;
    const std::string manifest_path = (fs::path(directory) / "manifest.json").string();
    const auto manifest_bytes = read_file(manifest_path);

    json manifest;
    try {
        manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
    } catch (const json::parse_error& e) {
        throw std::runtime_error("cannot parse " + manifest_path + ": " + e.what());
    }

    if (manifest.value("format", "") != kFormatName)
        throw std::runtime_error("unsupported dataset format in " + manifest_path);
    const int version = manifest.value("format-version", -1);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported dataset format version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kFormatVersion) + ")");

    Dataset ds;
    ds.dim = manifest.at("dimension").get<long>();
    ds.spec = spec_from_json(manifest.at("spec"));
    if (manifest.contains("warnings"))
        ds.warnings = manifest.at("warnings").get<std::vector<std::string>>();

    long next_instance_id = 0;
    std::array<std::vector<Bag>*, 3> outs = {&ds.train, &ds.valid, &ds.test};
    for (int i = 0; i < 3; ++i) {
        const std::string name = kSplitNames[static_cast<std::size_t>(i)];
        const json& s = manifest.at("splits").at(name);
        const std::string file_name = s.at("file").get<std::string>();
        const std::string file_path = (fs::path(directory) / file_name).string();
        if (!fs::exists(file_path))
            throw std::runtime_error("dataset split file missing: " + file_path);
        const auto blob = read_file(file_path);
        if (crc32(blob.data(), blob.size()) != s.at("crc32").get<std::uint32_t>())
            throw std::runtime_error("checksum mismatch in " + file_path);

        const auto& records = s.at("bags");
        if (static_cast<long>(records.size()) != s.at("count").get<long>())
            throw std::runtime_error("bag count mismatch in manifest for split " + name);

        auto& out = *outs[static_cast<std::size_t>(i)];
        for (const json& rec : records) {
            Bag bag;
            bag.bag_id = rec.at("bag-id").get<long>();
            bag.label = rec.at("bag-label").get<int>();
            const long n = rec.at("n").get<long>();
            const std::size_t offset = rec.at("offset").get<std::size_t>();
            if (n < 1) throw std::runtime_error("bag " + std::to_string(bag.bag_id) +
                                                " declares no instances");
            const std::size_t features_len =
                static_cast<std::size_t>(n) * static_cast<std::size_t>(ds.dim) * sizeof(float);
            const std::size_t block_len = features_len + static_cast<std::size_t>(n);
            if (offset + block_len > blob.size())
                throw std::runtime_error(file_path + " is truncated: bag " +
                                         std::to_string(bag.bag_id) + " extends past the end");
            std::vector<int> labels;
            labels.reserve(static_cast<std::size_t>(n));
            bag.instances.reserve(static_cast<std::size_t>(n));
            for (long j = 0; j < n; ++j) {
                Instance inst;
                inst.instance_id = next_instance_id++;
                inst.features.resize(static_cast<std::size_t>(ds.dim));
                std::memcpy(inst.features.data(),
                            blob.data() + offset +
                                static_cast<std::size_t>(j) * static_cast<std::size_t>(ds.dim) *
                                    sizeof(float),
                            static_cast<std::size_t>(ds.dim) * sizeof(float));
                const std::uint8_t y = blob[offset + features_len + static_cast<std::size_t>(j)];
                if (y > 1)
                    throw std::runtime_error("corrupt instance label in " + file_path);
                inst.true_label = static_cast<int>(y);
                labels.push_back(inst.true_label);
                bag.instances.push_back(std::move(inst));
            }
            if (bag_label(labels) != bag.label)
                throw std::runtime_error("bag " + std::to_string(bag.bag_id) +
                                         " violates the bag label rule in " + file_path);
            out.push_back(std::move(bag));
        }
    }
    return ds;
}

std::vector<InstanceDraw> sample_instance_batch(const std::vector<Bag>& split, long batch_size,
                                                std::mt19937_64& rng, bool without_replacement) {
    if (split.empty()) throw std::invalid_argument("cannot sample from an empty split");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

    // Flat index -> (bag, instance) via cumulative counts.
    std::vector<long> cumulative(split.size() + 1, 0);
    for (std::size_t b = 0; b < split.size(); ++b)
        cumulative[b + 1] = cumulative[b] + static_cast<long>(split[b].instances.size());
    const long total = cumulative.back();

    const auto locate = [&](long flat) {
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), flat);
        const long bag = static_cast<long>(it - cumulative.begin()) - 1;
        return InstanceDraw{bag, flat - cumulative[static_cast<std::size_t>(bag)]};
    };

    std::vector<InstanceDraw> out;
    out.reserve(static_cast<std::size_t>(batch_size));
    if (without_replacement) {
        if (batch_size > total)
            throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                        " exceeds instance count " + std::to_string(total) +
                                        " when sampling without replacement");
        std::vector<long> flat(static_cast<std::size_t>(total));
        for (long i = 0; i < total; ++i) flat[static_cast<std::size_t>(i)] = i;
        // Partial Fisher-Yates: the first batch_size entries are the sample.
        for (long i = 0; i < batch_size; ++i) {
            std::uniform_int_distribution<long> pick(i, total - 1);
            std::swap(flat[static_cast<std::size_t>(i)],
                      flat[static_cast<std::size_t>(pick(rng))]);
            out.push_back(locate(flat[static_cast<std::size_t>(i)]));
        }
    } else {
        std::uniform_int_distribution<long> pick(0, total - 1);
        for (long i = 0; i < batch_size; ++i) out.push_back(locate(pick(rng)));
    }
    return out;
}

}  // namespace weno
