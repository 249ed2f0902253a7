#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

namespace weno {

struct Instance {
    std::vector<float> features;
    int true_label = 0;  // ground truth, used for evaluation only
    long instance_id = 0;
};

struct Bag {
    long bag_id = 0;
    std::vector<Instance> instances;
    int label = 0;  // positive iff any instance is positive
};

// Parameters of the synthetic generator. Negative instances are drawn from a
// standard Gaussian; positive instances from a two-component mixture along a
// fixed direction — a far component at `separation` and a near (hard)
// component at near_scale * separation — so positives vary in how easy they
// are to identify.
struct GenSpec {
    long train_bags = 200;
    long valid_bags = 50;
    long test_bags = 100;
    long instances_per_bag = 50;
    long dim = 32;
    double positive_bag_fraction = 0.5;
    double positive_ratio = 0.2;  // positive instances within a positive bag
    double separation = 2.0;
    double near_fraction = 0.3;  // share of positives drawn from the near component
    double near_scale = 0.4;     // near component sits at near_scale * separation
    unsigned long long seed = 1;

    void validate() const;  // throws std::invalid_argument on bad fields
};

struct Dataset {
    long dim = 0;
    GenSpec spec;  // generation echo, persisted in the manifest
    std::vector<Bag> train, valid, test;
    std::vector<std::string> warnings;  // e.g. positive count rounded up to 1

    const std::vector<Bag>& split(const std::string& name) const;
};

// Bag label rule: positive iff at least one instance label is 1.
int bag_label(const std::vector<int>& instance_labels);

// Deterministic generation: same spec (including seed) -> identical dataset.
Dataset generate_synthetic(const GenSpec& spec);

// Stratified three-way split. Split sizes follow largest-remainder
// apportionment of the totals (ties by split order train, valid, test);
// positive bags are apportioned the same way within those sizes, so each
// split's positive fraction is within one bag of the global fraction. A split
// with a positive fraction must receive at least one bag.
struct SplitResult {
    std::vector<Bag> train, valid, test;
};
SplitResult split_dataset(const std::vector<Bag>& bags, const std::array<double, 3>& fractions,
                          unsigned long long seed);

// Dataset directory ("MILDS-1"): manifest.json plus one binary file per
// split holding, per bag, n x d little-endian float32 features in row-major
// order followed by n instance-label bytes. Split files carry a CRC-32 in
// the manifest. Instance ids are positional: consecutive in file order
// across train, valid, test (the generator assigns them the same way).
void save_dataset(const Dataset& ds, const std::string& directory);
Dataset load_dataset(const std::string& directory);

// One uniformly sampled instance reference; indices are into the split.
struct InstanceDraw {
    long bag_index = 0;
    long instance_index = 0;
};

// Uniform sampling over all instances of a split. With `without_replacement`
// the draws are distinct (batch_size must not exceed the instance count);
// batch_size equal to the count returns a permutation of all instances.
std::vector<InstanceDraw> sample_instance_batch(const std::vector<Bag>& split, long batch_size,
                                                std::mt19937_64& rng,
                                                bool without_replacement = false);

}  // namespace weno
