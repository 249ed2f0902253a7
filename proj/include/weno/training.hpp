#pragma once

// Alternating teacher/student training: per epoch the teacher makes one
// pass over the training bags (one bag per SGD step), pseudo labels are
// refreshed from the updated teacher, the student runs its mini-batches
// against those frozen labels, and the valid split is evaluated. Ablation
// flags reduce the loop to the plain attention-MIL baseline. Checkpoints
// capture parameters, rng state, and the configuration echo so a resumed
// run continues bitwise-identically.

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "weno/dataset.hpp"
#include "weno/hpm.hpp"
#include "weno/model.hpp"
#include "weno/params.hpp"

namespace weno {

// Component toggles. The lattice mirrors the method's structure: instance
// mining and encoder sharing only exist on top of distillation.
struct AblationFlags {
    bool distillation = true;
    bool shared_encoder = true;
    bool hpm = true;
};

struct TrainConfig {
    enum class Precision { f32 };

    double learning_rate = 0.001;
    long epochs = 200;
    HpmConfig hpm;                // warm-up gate and threshold for mining
    long batch_size = 64;         // student instances per mini-batch
    long batches_per_epoch = -1;  // -1: ceil(total train instances / batch size)
    unsigned long long seed = 1;
    AblationFlags flags;
    Precision precision = Precision::f32;
    long checkpoint_every = 0;    // also checkpoint every k epochs when > 0

    // Throws std::invalid_argument on out-of-range values or a flag
    // combination outside the lattice (hpm or shared encoder without
    // distillation).
    void validate() const;
};

// One row of the per-epoch metrics table (evaluated on the valid split).
struct EpochMetrics {
    long epoch = 0;
    double teacher_loss = 0.0;
    double student_loss = 0.0;
    double teacher_bag_auc = 0.0;
    double teacher_attention_instance_auc = 0.0;
    double student_instance_auc = 0.0;
    double student_bag_auc = 0.0;
    long hpm_drop_count = 0;
};

// Serializes metrics as CSV: header row, '.' decimals, 9 significant digits.
std::string metrics_csv(const std::vector<EpochMetrics>& rows);
void write_metrics_csv(const std::vector<EpochMetrics>& rows, const std::string& path);

// Full trainer state at an epoch boundary.
struct CheckpointRecord {
    int version = 1;
    long epoch = 0;              // completed epochs
    std::string pipeline = "weno";  // "weno" | "supervised"
    std::string rng_state;       // mt19937_64 stream serialization
    TrainConfig train_config;
    ModelConfig model_config;
    std::vector<std::pair<std::string, TensorF>> params;  // store order
};

// Versioned container: 8-byte magic, version, JSON header (names, shapes,
// epoch, config echo, rng state), little-endian float32 payload in header
// order, trailing CRC-32 over everything before it. Writes are atomic;
// a corrupt file fails to load without any partial state escaping.
void save_checkpoint(const CheckpointRecord& record, const std::string& path);
CheckpointRecord load_checkpoint(const std::string& path);

// Rebuilds a parameter store from a checkpoint, preserving entry order.
ParameterStore<float> store_from_checkpoint(const CheckpointRecord& record);

// Supplies per-bag student scores (for mining) without fixing the source;
// the trainer wires this to the live student branch.
using StudentScoresFn = std::function<std::vector<float>(const Bag&)>;

struct TeacherEpochResult {
    double mean_loss = 0.0;
    long dropped_instances = 0;  // 0 whenever mining is inactive
};

// One teacher pass: bags in a seeded shuffled order, one bag per SGD step.
// When mining is active (hpm flag set and epoch past warm-up), positive
// bags are filtered against fresh student scores before the forward pass.
TeacherEpochResult teacher_epoch(const std::vector<Bag>& bags, ParameterStore<float>& store,
                                 const ModelConfig& model, const TrainConfig& config, long epoch,
                                 std::mt19937_64& rng, const StudentScoresFn& student_scores = {});

// Per-instance soft targets for one epoch; -1 marks instances that carry
// no label this epoch (dropped by mining).
struct PseudoLabelTable {
    std::vector<std::vector<float>> labels;  // [bag][instance]
    long available = 0;
    long source_epoch = -1;
};

// Recomputes pseudo labels from the current teacher: negative bags get
// exact zeros; positive bags get min-max normalized attention over their
// surviving instances (all instances when mining is inactive).
PseudoLabelTable refresh_pseudo_labels(const std::vector<Bag>& bags, ParameterStore<float>& store,
                                       const ModelConfig& model, const TrainConfig& config,
                                       long epoch, const StudentScoresFn& student_scores = {});

// One student pass: the configured number of uniformly sampled instance
// mini-batches against the frozen label table. Instances without a label
// are skipped and resampled. Returns the mean batch loss (0 for zero
// batches, store untouched).
double student_epoch(const std::vector<Bag>& bags, ParameterStore<float>& store,
                     const ModelConfig& model, const TrainConfig& config,
                     const PseudoLabelTable& labels, std::mt19937_64& rng);

// Builds a label table from ground-truth instance labels (the fully
// supervised upper bound).
PseudoLabelTable true_label_table(const std::vector<Bag>& bags);

// Drives the alternating loop epoch by epoch.
class Trainer {
  public:
    enum class Pipeline { weno, supervised };

    Trainer(const Dataset& data, TrainConfig config, Pipeline pipeline = Pipeline::weno);
    // Resumes from a checkpoint; the dataset must match the recorded
    // input dimension.
    Trainer(const Dataset& data, const CheckpointRecord& record);

    // Runs one full epoch (teacher pass, label refresh, student pass,
    // valid-split evaluation) and returns its metrics row.
    EpochMetrics step_epoch();

    CheckpointRecord checkpoint() const;
    long completed_epochs() const { return epoch_; }
    Pipeline pipeline() const { return pipeline_; }
    const TrainConfig& config() const { return config_; }
    const ModelConfig& model() const { return model_; }
    ParameterStore<float>& store() { return store_; }

  private:
    EpochMetrics evaluate_epoch(long epoch, double teacher_loss, double student_loss, long drops);

    const Dataset* data_;
    TrainConfig config_;
    Pipeline pipeline_ = Pipeline::weno;
    ModelConfig model_;
    ParameterStore<float> store_;
    std::mt19937_64 rng_;
    long epoch_ = 0;
};

struct RunHooks {
    std::function<void(const EpochMetrics&)> on_epoch;
    std::function<void(const CheckpointRecord&)> on_checkpoint;  // periodic + final
};

struct RunResult {
    std::vector<EpochMetrics> metrics;
    CheckpointRecord checkpoint;  // final state
};

// Full alternating run from a fresh initialization.
RunResult run_weno(const Dataset& data, const TrainConfig& config, const RunHooks& hooks = {});
// Continues a checkpointed run up to config.epochs; metrics cover only
// the resumed tail.
RunResult resume_weno(const Dataset& data, const CheckpointRecord& record,
                      const RunHooks& hooks = {});
// Instance-head training on true labels; bags are scored by max-pooling.
RunResult run_fully_supervised(const Dataset& data, const TrainConfig& config,
                               const RunHooks& hooks = {});

// The four component configurations, trained with identical seeds.
struct AblationRun {
    std::string name;  // "none", "+D", "+D+S", "+D+S+H"
    AblationFlags flags;
    RunResult result;
};
std::vector<AblationRun> run_ablation(const Dataset& data, const TrainConfig& base,
                                      const RunHooks& hooks = {});

}  // namespace weno
