#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "weno/eval.hpp"
#include "weno/labels.hpp"
#include "weno/training.hpp"
#include "weno/util.hpp"

using namespace weno;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Dataset small_dataset(unsigned long long seed = 5) {
    GenSpec spec;
    spec.train_bags = 16;
    spec.valid_bags = 8;
    spec.test_bags = 4;
    spec.instances_per_bag = 8;
    spec.dim = 6;
    spec.positive_bag_fraction = 0.5;
    spec.positive_ratio = 0.25;
    spec.separation = 3.0;
    spec.seed = seed;
    return generate_synthetic(spec);
}

TrainConfig fast_config(long epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.hpm.warmup_epochs = 2;
    c.checkpoint_every = 0;
    return c;
}

std::vector<float> snapshot(const ParameterStore<float>& store, const std::string& prefix) {
    std::vector<float> out;
    for (const auto& e : store.entries())
        if (e.name.rfind(prefix, 0) == 0)
            out.insert(out.end(), e.value.data.begin(), e.value.data.end());
    return out;
}

bool same_metrics(const EpochMetrics& a, const EpochMetrics& b) {
    return a.epoch == b.epoch && a.teacher_loss == b.teacher_loss &&
           a.student_loss == b.student_loss && a.teacher_bag_auc == b.teacher_bag_auc &&
           a.teacher_attention_instance_auc == b.teacher_attention_instance_auc &&
           a.student_instance_auc == b.student_instance_auc &&
           a.student_bag_auc == b.student_bag_auc && a.hpm_drop_count == b.hpm_drop_count;
}

std::vector<std::uint8_t> file_bytes(const std::string& path) { return read_file(path); }

}  // namespace

TEST_CASE("train config enforces the ablation flag lattice and value ranges") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());

    c.flags = {false, false, true};  // hpm without distillation
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("hpm requires distillation"),
                         std::invalid_argument);
    c.flags = {false, true, false};  // shared encoder without distillation
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("shared encoder requires"),
                         std::invalid_argument);
    c.flags = {true, false, false};
    CHECK_NOTHROW(c.validate());

    c = TrainConfig{};
    c.epochs = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.learning_rate = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("a zero learning rate reports loss but leaves parameters bitwise unchanged") {
    const Dataset data = small_dataset();
    TrainConfig config = fast_config(1);
    config.learning_rate = 0.0;
    Trainer trainer(data, config);

    const auto before = snapshot(trainer.store(), "");
    std::mt19937_64 rng(3);
    const auto result =
        teacher_epoch(data.train, trainer.store(), trainer.model(), config, 0, rng);
    CHECK(result.mean_loss > 0.0);
    CHECK(snapshot(trainer.store(), "") == before);

    const auto table = refresh_pseudo_labels(data.train, trainer.store(), trainer.model(), config, 0);
    const double sloss =
        student_epoch(data.train, trainer.store(), trainer.model(), config, table, rng);
    CHECK(sloss > 0.0);
    CHECK(snapshot(trainer.store(), "") == before);
}

TEST_CASE("teacher loss on a single bag decreases in at least 45 of 49 transitions") {
    Dataset data = small_dataset(11);
    data.train.resize(1);  // one positive or negative bag is enough to fit

    TrainConfig config = fast_config(1);
    config.flags.hpm = false;
    Trainer trainer(data, config);
    std::mt19937_64 rng(7);

    std::vector<double> losses;
    for (int step = 0; step < 50; ++step)
        losses.push_back(
            teacher_epoch(data.train, trainer.store(), trainer.model(), config, 0, rng).mean_loss);
    int decreases = 0;
    for (std::size_t i = 1; i < losses.size(); ++i)
        if (losses[i] < losses[i - 1]) ++decreases;
    CHECK(decreases >= 45);
}

TEST_CASE("drop statistics are zero when mining is inactive and counted when active") {
    const Dataset data = small_dataset();
    TrainConfig config = fast_config(1);
    Trainer trainer(data, config);

    std::mt19937_64 rng(5);
    // epoch 0 < warmup 2: inactive regardless of scores
    const auto pre = teacher_epoch(data.train, trainer.store(), trainer.model(), config, 0, rng);
    CHECK(pre.dropped_instances == 0);

    // past warm-up, a provider that marks half of each positive bag as hard positives
    config.hpm.threshold = 0.5;
    long expected = 0;
    for (const Bag& bag : data.train)
        if (bag.label == 1) expected += static_cast<long>(bag.instances.size()) / 2;
    const StudentScoresFn provider = [](const Bag& bag) {
        std::vector<float> scores(bag.instances.size(), 0.1f);
        for (std::size_t i = 0; i < scores.size() / 2; ++i) scores[i] = 0.9f;
        return scores;
    };
    const auto post =
        teacher_epoch(data.train, trainer.store(), trainer.model(), config, 2, rng, provider);
    CHECK(post.dropped_instances == expected);

    // hpm flag off: active epoch still drops nothing
    config.flags.hpm = false;
    const auto off =
        teacher_epoch(data.train, trainer.store(), trainer.model(), config, 2, rng, provider);
    CHECK(off.dropped_instances == 0);
}

TEST_CASE("pseudo-label refresh matches the mining state and skips dropped instances") {
    const Dataset data = small_dataset();
    TrainConfig config = fast_config(1);
    config.hpm.threshold = 0.5;
    Trainer trainer(data, config);

    // inactive: every instance is labeled; negative bags pinned to zero
    const auto full = refresh_pseudo_labels(data.train, trainer.store(), trainer.model(), config, 0);
    long total = 0;
    for (const Bag& bag : data.train) total += static_cast<long>(bag.instances.size());
    CHECK(full.available == total);
    for (std::size_t b = 0; b < data.train.size(); ++b) {
        if (data.train[b].label != 0) continue;
        for (float v : full.labels[b]) CHECK(v == 0.0f);
    }

    // active: dropped instances carry no label; survivors are normalized
    const StudentScoresFn provider = [](const Bag& bag) {
        std::vector<float> scores(bag.instances.size(), 0.1f);
        scores[0] = 0.9f;  // instance 0 of each positive bag is mined away
        return scores;
    };
    const auto mined =
        refresh_pseudo_labels(data.train, trainer.store(), trainer.model(), config, 2, provider);
    for (std::size_t b = 0; b < data.train.size(); ++b) {
        const Bag& bag = data.train[b];
        if (bag.label == 1) {
            CHECK(mined.labels[b][0] == -1.0f);
            float lo = 2.0f, hi = -1.0f;
            for (std::size_t i = 1; i < mined.labels[b].size(); ++i) {
                CHECK(mined.labels[b][i] >= 0.0f);
                lo = std::min(lo, mined.labels[b][i]);
                hi = std::max(hi, mined.labels[b][i]);
            }
            CHECK(lo == 0.0f);  // min-max normalization over survivors
            CHECK(hi == 1.0f);
        } else {
            for (float v : mined.labels[b]) CHECK(v == 0.0f);
        }
    }
    CHECK(mined.available < full.available);
}

TEST_CASE("student epoch draws only labeled instances") {
    // bag 0: all labels withheld; bag 1: single instance labeled 0. Every
    // batch must therefore consist of bag 1's instance alone.
    Dataset data = small_dataset(9);
    data.train.resize(2);
    data.train[1].instances.resize(1);
    data.train[1].label = bag_label({data.train[1].instances[0].true_label});

    TrainConfig config = fast_config(1);
    config.learning_rate = 0.0;
    config.batches_per_epoch = 3;
    Trainer trainer(data, config);

    PseudoLabelTable table;
    table.labels.resize(2);
    table.labels[0].assign(data.train[0].instances.size(), -1.0f);
    table.labels[1] = {0.0f};
    table.available = 1;

    std::mt19937_64 rng(21);
    const double loss =
        student_epoch(data.train, trainer.store(), trainer.model(), config, table, rng);
    const float p = student_instance_scores(trainer.store(), trainer.model(), data.train[1])[0];
    CHECK(loss == doctest::Approx(binary_cross_entropy(0.0, static_cast<double>(p))).epsilon(1e-5));
}

TEST_CASE("zero student batches leave the store untouched") {
    const Dataset data = small_dataset();
    TrainConfig config = fast_config(1);
    config.batches_per_epoch = 0;
    Trainer trainer(data, config);
    const auto before = snapshot(trainer.store(), "");
    const auto table = true_label_table(data.train);
    std::mt19937_64 rng(4);
    CHECK(student_epoch(data.train, trainer.store(), trainer.model(), config, table, rng) == 0.0);
    CHECK(snapshot(trainer.store(), "") == before);
}

TEST_CASE("a fixed seed reproduces the student loss sequence exactly") {
    const Dataset data = small_dataset();
    const TrainConfig config = fast_config(1);
    const auto run_losses = [&] {
        Trainer trainer(data, config);
        const auto table = true_label_table(data.train);
        std::mt19937_64 rng(13);
        std::vector<double> losses;
        for (int i = 0; i < 4; ++i)
            losses.push_back(
                student_epoch(data.train, trainer.store(), trainer.model(), config, table, rng));
        return losses;
    };
    CHECK(run_losses() == run_losses());
}

TEST_CASE("without a shared encoder, teacher training never touches the student encoder") {
    const Dataset data = small_dataset();
    TrainConfig config = fast_config(1);
    config.flags = {true, false, false};  // distillation without sharing
    Trainer trainer(data, config);
    REQUIRE(trainer.store().has("encoder_s.0.w"));

    const auto student_before = snapshot(trainer.store(), "encoder_s.");
    const auto teacher_before = snapshot(trainer.store(), "encoder_t.");
    std::mt19937_64 rng(17);
    teacher_epoch(data.train, trainer.store(), trainer.model(), config, 0, rng);
    CHECK(snapshot(trainer.store(), "encoder_s.") == student_before);
    CHECK(snapshot(trainer.store(), "encoder_t.") != teacher_before);
}

TEST_CASE("identical seeds and configs give byte-identical metrics tables") {
    const Dataset data = small_dataset();
    const TrainConfig config = fast_config(3);
    const RunResult a = run_weno(data, config);
    const RunResult b = run_weno(data, config);
    REQUIRE(a.metrics.size() == 3);
    CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));

    TempDir dir("weno_train_det");
    save_checkpoint(a.checkpoint, dir.file("a.ckpt"));
    save_checkpoint(b.checkpoint, dir.file("b.ckpt"));
    CHECK(file_bytes(dir.file("a.ckpt")) == file_bytes(dir.file("b.ckpt")));

    for (const EpochMetrics& m : a.metrics) {
        CHECK(m.teacher_bag_auc >= 0.0);
        CHECK(m.teacher_bag_auc <= 1.0);
        CHECK(m.hpm_drop_count == (m.epoch < config.hpm.warmup_epochs ? 0 : m.hpm_drop_count));
    }
}

TEST_CASE("epochs 0 returns empty metrics and the initialization checkpoint") {
    const Dataset data = small_dataset();
    TrainConfig config = fast_config(0);
    const RunResult r = run_weno(data, config);
    CHECK(r.metrics.empty());
    CHECK(r.checkpoint.epoch == 0);

    Trainer fresh(data, config);
    const CheckpointRecord init = fresh.checkpoint();
    REQUIRE(init.params.size() == r.checkpoint.params.size());
    for (std::size_t i = 0; i < init.params.size(); ++i) {
        CHECK(init.params[i].first == r.checkpoint.params[i].first);
        CHECK(init.params[i].second.data == r.checkpoint.params[i].second.data);
    }
}

TEST_CASE("checkpoints round-trip bitwise and resume identically to an uninterrupted run") {
    const Dataset data = small_dataset(23);
    TempDir dir("weno_ckpt_roundtrip");

    // uninterrupted reference: 4 epochs
    TrainConfig full_config = fast_config(4);
    const RunResult full = run_weno(data, full_config);

    // interrupted: 2 epochs, save, load, resume to 4
    TrainConfig half_config = fast_config(2);
    const RunResult half = run_weno(data, half_config);
    save_checkpoint(half.checkpoint, dir.file("half.ckpt"));
    CheckpointRecord loaded = load_checkpoint(dir.file("half.ckpt"));

    CHECK(loaded.epoch == 2);
    CHECK(loaded.rng_state == half.checkpoint.rng_state);
    REQUIRE(loaded.params.size() == half.checkpoint.params.size());
    for (std::size_t i = 0; i < loaded.params.size(); ++i) {
        CHECK(loaded.params[i].first == half.checkpoint.params[i].first);
        CHECK(loaded.params[i].second.shape == half.checkpoint.params[i].second.shape);
        CHECK(loaded.params[i].second.data == half.checkpoint.params[i].second.data);
    }

    loaded.train_config.epochs = 4;
    const RunResult resumed = resume_weno(data, loaded);
    REQUIRE(resumed.metrics.size() == 2);
    CHECK(same_metrics(resumed.metrics[0], full.metrics[2]));
    CHECK(same_metrics(resumed.metrics[1], full.metrics[3]));

    save_checkpoint(resumed.checkpoint, dir.file("resumed.ckpt"));
    CheckpointRecord full_ckpt = full.checkpoint;
    save_checkpoint(full_ckpt, dir.file("full.ckpt"));
    // identical parameters and rng; epoch and config echo also agree
    CHECK(resumed.checkpoint.rng_state == full.checkpoint.rng_state);
    CHECK(file_bytes(dir.file("resumed.ckpt")) == file_bytes(dir.file("full.ckpt")));
}

TEST_CASE("corrupted checkpoints fail to load with no partial state") {
    const Dataset data = small_dataset();
    TempDir dir("weno_ckpt_corrupt");
    Trainer trainer(data, fast_config(1));
    save_checkpoint(trainer.checkpoint(), dir.file("good.ckpt"));

    auto bytes = file_bytes(dir.file("good.ckpt"));

    SUBCASE("flipped payload byte fails the checksum") {
        bytes[bytes.size() / 2] ^= 0x40;
        write_file_atomic(dir.file("bad.ckpt"), bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.ckpt")),
                             doctest::Contains("checksum"), std::runtime_error);
    }
    SUBCASE("truncated file is rejected") {
        bytes.resize(bytes.size() / 2);
        write_file_atomic(dir.file("bad.ckpt"), bytes.data(), bytes.size());
        CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt")), std::runtime_error);
    }
    SUBCASE("wrong magic is rejected") {
        bytes[0] = 'X';
        write_file_atomic(dir.file("bad.ckpt"), bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.ckpt")), doctest::Contains("magic"),
                             std::runtime_error);
    }
    SUBCASE("unsupported version is rejected") {
        bytes[8] = 9;
        write_file_atomic(dir.file("bad.ckpt"), bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.ckpt")), doctest::Contains("version"),
                             std::runtime_error);
    }
    SUBCASE("missing file names the path") {
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("absent.ckpt")),
                             doctest::Contains("absent.ckpt"), std::runtime_error);
    }
}

TEST_CASE("resume rejects a dataset with a different dimension, naming both") {
    const Dataset data = small_dataset();
    Trainer trainer(data, fast_config(1));
    const CheckpointRecord record = trainer.checkpoint();

    GenSpec other_spec;
    other_spec.train_bags = 4;
    other_spec.valid_bags = 2;
    other_spec.test_bags = 2;
    other_spec.instances_per_bag = 4;
    other_spec.dim = 9;
    other_spec.seed = 1;
    const Dataset other = generate_synthetic(other_spec);

    CHECK_THROWS_WITH_AS(Trainer(other, record), doctest::Contains("6"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(Trainer(other, record), doctest::Contains("9"), std::invalid_argument);
}

TEST_CASE("ablation produces the four component configurations with matching flags") {
    const Dataset data = small_dataset();
    TrainConfig base = fast_config(1);
    const auto runs = run_ablation(data, base);
    REQUIRE(runs.size() == 4);
    CHECK(runs[0].name == "none");
    CHECK_FALSE(runs[0].flags.distillation);
    CHECK(runs[1].name == "+D");
    CHECK(runs[1].flags.distillation);
    CHECK_FALSE(runs[1].flags.shared_encoder);
    CHECK(runs[2].name == "+D+S");
    CHECK(runs[2].flags.shared_encoder);
    CHECK_FALSE(runs[2].flags.hpm);
    CHECK(runs[3].name == "+D+S+H");
    CHECK(runs[3].flags.hpm);

    // the baseline row trains no student: its student loss stays zero
    CHECK(runs[0].result.metrics[0].student_loss == 0.0);
    CHECK(runs[1].result.metrics[0].student_loss > 0.0);

    // "none" equals run_weno with distillation off
    TrainConfig none = base;
    none.flags = {false, false, false};
    const RunResult direct = run_weno(data, none);
    CHECK(metrics_csv(direct.metrics) == metrics_csv(runs[0].result.metrics));
}

TEST_CASE("fully supervised training separates a separable dataset within 30 epochs") {
    GenSpec spec;
    spec.train_bags = 30;
    spec.valid_bags = 10;
    spec.test_bags = 4;
    spec.instances_per_bag = 10;
    spec.dim = 8;
    spec.positive_bag_fraction = 0.5;
    spec.positive_ratio = 0.3;
    spec.separation = 6.0;
    spec.near_fraction = 0.0;
    spec.seed = 3;
    const Dataset data = generate_synthetic(spec);

    TrainConfig config = fast_config(30);
    config.learning_rate = 0.05;
    const RunResult r = run_fully_supervised(data, config);
    REQUIRE(r.metrics.size() == 30);
    CHECK(r.metrics.back().student_instance_auc > 0.99);
    CHECK(r.metrics.back().student_bag_auc == 1.0);
    CHECK(r.checkpoint.pipeline == "supervised");
    // teacher branch is untrained in this pipeline
    CHECK(r.metrics.back().teacher_loss == 0.0);
}

TEST_CASE("metrics serialize to a stable CSV with a header and 9-significant-digit values") {
    EpochMetrics m;
    m.epoch = 7;
    m.teacher_loss = 0.123456789123;
    m.student_loss = 1.0 / 3.0;
    m.teacher_bag_auc = 0.875;
    m.teacher_attention_instance_auc = 0.5;
    m.student_instance_auc = 1.0;
    m.student_bag_auc = 0.0;
    m.hpm_drop_count = 42;
    const std::string csv = metrics_csv({m});
    CHECK(csv ==
          "epoch,teacher-loss,student-loss,teacher-bag-auc,teacher-attention-instance-auc,"
          "student-instance-auc,student-bag-auc,hpm-drop-count\n"
          "7,0.123456789,0.333333333,0.875,0.5,1,0,42\n");
}
