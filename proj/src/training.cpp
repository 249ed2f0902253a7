#include "weno/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "weno/eval.hpp"
#include "weno/labels.hpp"
#include "weno/tape.hpp"
#include "weno/util.hpp"

namespace weno {

namespace {

// Features of a subset of a bag's instances, in the given row order.
TensorF features_subset(const Bag& bag, const std::vector<long>& rows) {
    const long d = static_cast<long>(bag.instances.empty() ? 0 : bag.instances[0].features.size());
    TensorF out({static_cast<long>(rows.size()), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& f = bag.instances[static_cast<std::size_t>(rows[r])].features;
        std::copy(f.begin(), f.end(), out.data.begin() + static_cast<long>(r) * d);
    }
    return out;
}

// Teacher attention weights over an already-assembled feature block.
std::vector<float> attention_over(ParameterStore<float>& store, const ModelConfig& model,
                                  TensorF feats) {
    Tape<float> tape(false);
    Var z = encode(tape, store, model.encoder, model.encoder_handle().teacher_prefix,
                   tape.input(std::move(feats)));
    return tape.value(attention_scores(tape, store, model.attention, z)).data;
}

bool mining_active(const TrainConfig& config, long epoch) {
    return config.flags.hpm && hpm_active(epoch, config.hpm);
}

long resolved_batches(const TrainConfig& config, const std::vector<Bag>& bags) {
    if (config.batches_per_epoch >= 0) return config.batches_per_epoch;
    long total = 0;
    for (const Bag& bag : bags) total += static_cast<long>(bag.instances.size());
    return (total + config.batch_size - 1) / config.batch_size;
}

std::string pipeline_name(Trainer::Pipeline p) {
    return p == Trainer::Pipeline::supervised ? "supervised" : "weno";
}

}  // namespace

void TrainConfig::validate() const {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw std::invalid_argument("train config: learning rate must be finite and >= 0");
    if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
    if (batches_per_epoch < -1)
        throw std::invalid_argument("train config: batches per epoch must be >= 0 (or -1 for auto)");
    if (checkpoint_every < 0)
        throw std::invalid_argument("train config: checkpoint interval must be >= 0");
    hpm.validate();
    if (flags.hpm && !flags.distillation)
        throw std::invalid_argument("train config: hpm requires distillation");
    if (flags.shared_encoder && !flags.distillation)
        throw std::invalid_argument("train config: shared encoder requires distillation");
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
    std::string out =
        "epoch,teacher-loss,student-loss,teacher-bag-auc,teacher-attention-instance-auc,"
        "student-instance-auc,student-bag-auc,hpm-drop-count\n";
    for (const EpochMetrics& m : rows) {
        out += std::to_string(m.epoch);
        out += ',';
        out += format_g9(m.teacher_loss);
        out += ',';
        out += format_g9(m.student_loss);
        out += ',';
        out += format_g9(m.teacher_bag_auc);
        out += ',';
        out += format_g9(m.teacher_attention_instance_auc);
        out += ',';
        out += format_g9(m.student_instance_auc);
        out += ',';
        out += format_g9(m.student_bag_auc);
        out += ',';
        out += std::to_string(m.hpm_drop_count);
        out += '\n';
    }
    return out;
}

void write_metrics_csv(const std::vector<EpochMetrics>& rows, const std::string& path) {
    const std::string text = metrics_csv(rows);
    write_file_atomic(path, text.data(), text.size());
}

TeacherEpochResult teacher_epoch(const std::vector<Bag>& bags, ParameterStore<float>& store,
                                 const ModelConfig& model, const TrainConfig& config, long epoch,
                                 std::mt19937_64& rng, const StudentScoresFn& student_scores) {
    config.validate();
    if (bags.empty()) throw std::invalid_argument("teacher epoch: empty split");
    if (epoch < 0) throw std::invalid_argument("teacher epoch: negative epoch");

    std::vector<std::size_t> order(bags.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    const bool mining = mining_active(config, epoch);
    TeacherEpochResult result;
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
        const Bag& bag = bags[idx];
        TensorF feats;
        if (mining && bag.label == 1) {
            const std::vector<float> scores =
                student_scores ? student_scores(bag) : student_instance_scores(store, model, bag);
            const FilteredBagView view = filter_bag(bag, scores, config.hpm);
            result.dropped_instances += static_cast<long>(view.dropped.size());
            feats = features_subset(bag, view.surviving);
        } else {
            feats = bag_features<float>(bag);
        }
        Tape<float> tape;
        auto fwd = teacher_forward(tape, store, model, tape.input(std::move(feats)),
                                   static_cast<float>(bag.label));
        loss_sum += static_cast<double>(tape.value(fwd.loss).data[0]);
        tape.backward(fwd.loss);
        store.sgd_step(static_cast<float>(config.learning_rate));
    }
    result.mean_loss = loss_sum / static_cast<double>(bags.size());
    return result;
}

PseudoLabelTable refresh_pseudo_labels(const std::vector<Bag>& bags, ParameterStore<float>& store,
                                       const ModelConfig& model, const TrainConfig& config,
                                       long epoch, const StudentScoresFn& student_scores) {
    config.validate();
    const bool mining = mining_active(config, epoch);
    PseudoLabelTable table;
    table.source_epoch = epoch;
    table.labels.resize(bags.size());
    for (std::size_t b = 0; b < bags.size(); ++b) {
        const Bag& bag = bags[b];
        auto& row = table.labels[b];
        row.assign(bag.instances.size(), -1.0f);
        PseudoLabelSet set;
        if (bag.label == 0) {
            set = make_pseudo_labels(bag, nullptr, epoch);
        } else if (mining) {
            const std::vector<float> scores =
                student_scores ? student_scores(bag) : student_instance_scores(store, model, bag);
            const FilteredBagView view = filter_bag(bag, scores, config.hpm);
            const std::vector<float> attn =
                attention_over(store, model, features_subset(bag, view.surviving));
            set = make_pseudo_labels(bag, &attn, epoch, &view.surviving);
        } else {
            const std::vector<float> attn = attention_over(store, model, bag_features<float>(bag));
            set = make_pseudo_labels(bag, &attn, epoch);
        }
        for (std::size_t k = 0; k < set.instance_indices.size(); ++k)
            row[static_cast<std::size_t>(set.instance_indices[k])] = set.labels[k];
        table.available += static_cast<long>(set.instance_indices.size());
    }
    return table;
}

PseudoLabelTable true_label_table(const std::vector<Bag>& bags) {
    PseudoLabelTable table;
    table.labels.resize(bags.size());
    for (std::size_t b = 0; b < bags.size(); ++b) {
        const Bag& bag = bags[b];
        auto& row = table.labels[b];
        row.resize(bag.instances.size());
        for (std::size_t i = 0; i < bag.instances.size(); ++i)
            row[i] = static_cast<float>(bag.instances[i].true_label);
        table.available += static_cast<long>(bag.instances.size());
    }
    return table;
}

double student_epoch(const std::vector<Bag>& bags, ParameterStore<float>& store,
                     const ModelConfig& model, const TrainConfig& config,
                     const PseudoLabelTable& labels, std::mt19937_64& rng) {
    config.validate();
    if (labels.labels.size() != bags.size())
        throw std::invalid_argument("student epoch: label table does not match the split");
    const long batches = resolved_batches(config, bags);
    if (batches == 0) return 0.0;
    if (labels.available == 0)
        throw std::invalid_argument("student epoch: no labeled instances available");

    const long d = model.encoder.input_dim;
    double loss_sum = 0.0;
    for (long batch = 0; batch < batches; ++batch) {
        std::vector<InstanceDraw> draws;
        draws.reserve(static_cast<std::size_t>(config.batch_size));
        long skipped = 0;
        while (static_cast<long>(draws.size()) < config.batch_size) {
            const InstanceDraw draw = sample_instance_batch(bags, 1, rng)[0];
            const float label = labels.labels[static_cast<std::size_t>(draw.bag_index)]
                                             [static_cast<std::size_t>(draw.instance_index)];
            if (label < 0.0f) {
                // dropped by mining this epoch: skip and resample
                if (++skipped > 10000 * config.batch_size)
                    throw std::logic_error("student epoch: resampling failed to find labels");
                continue;
            }
            draws.push_back(draw);
        }

        TensorF x({config.batch_size, d});
        TensorF y({config.batch_size});
        for (std::size_t k = 0; k < draws.size(); ++k) {
            const auto& bag = bags[static_cast<std::size_t>(draws[k].bag_index)];
            const auto& inst = bag.instances[static_cast<std::size_t>(draws[k].instance_index)];
            if (static_cast<long>(inst.features.size()) != d)
                throw std::invalid_argument("student epoch: instance dimension mismatch");
            std::copy(inst.features.begin(), inst.features.end(),
                      x.data.begin() + static_cast<long>(k) * d);
            y.data[k] = labels.labels[static_cast<std::size_t>(draws[k].bag_index)]
                                     [static_cast<std::size_t>(draws[k].instance_index)];
        }

        Tape<float> tape;
        auto fwd = student_forward(tape, store, model, tape.input(std::move(x)), std::move(y));
        loss_sum += static_cast<double>(tape.value(fwd.loss).data[0]);
        tape.backward(fwd.loss);
        store.sgd_step(static_cast<float>(config.learning_rate));
    }
    return loss_sum / static_cast<double>(batches);
}

Trainer::Trainer(const Dataset& data, TrainConfig config, Pipeline pipeline)
    : data_(&data), config_(std::move(config)), pipeline_(pipeline) {
    config_.validate();
    if (data.train.empty())
        throw std::invalid_argument("training requires a non-empty train split");
    model_.encoder.input_dim = data.dim;
    model_.shared_encoder = config_.flags.shared_encoder;
    model_.validate();
    rng_.seed(config_.seed);
    init_params(model_, store_, rng_);
}

Trainer::Trainer(const Dataset& data, const CheckpointRecord& record)
    : data_(&data), config_(record.train_config), model_(record.model_config) {
    if (record.version != 1)
        throw std::runtime_error("unsupported checkpoint version " +
                                 std::to_string(record.version));
    config_.validate();
    model_.validate();
    if (model_.encoder.input_dim != data.dim)
        throw std::invalid_argument(
            "checkpoint input dimension " + std::to_string(model_.encoder.input_dim) +
            " does not match dataset dimension " + std::to_string(data.dim));
    if (record.pipeline == "weno") {
        pipeline_ = Pipeline::weno;
    } else if (record.pipeline == "supervised") {
        pipeline_ = Pipeline::supervised;
    } else {
        throw std::runtime_error("unknown pipeline in checkpoint: " + record.pipeline);
    }
    store_ = store_from_checkpoint(record);
    std::istringstream iss(record.rng_state);
    iss >> rng_;
    if (!iss) throw std::runtime_error("checkpoint rng state is malformed");
    epoch_ = record.epoch;
}

EpochMetrics Trainer::evaluate_epoch(long epoch, double teacher_loss, double student_loss,
                                     long drops) {
    EpochMetrics m;
    m.epoch = epoch;
    m.teacher_loss = teacher_loss;
    m.student_loss = student_loss;
    m.hpm_drop_count = drops;
    const std::vector<Bag>& split = data_->valid;
    m.teacher_bag_auc = evaluate_bag_level(split, store_, model_, BagScoreMode::teacher);
    m.teacher_attention_instance_auc =
        evaluate_instance_level(split, store_, model_, InstanceScoreMode::teacher_attention);
    m.student_instance_auc =
        evaluate_instance_level(split, store_, model_, InstanceScoreMode::student);
    m.student_bag_auc = evaluate_bag_level(split, store_, model_, BagScoreMode::student_maxpool);
    return m;
}

EpochMetrics Trainer::step_epoch() {
    const long e = epoch_;
    double teacher_loss = 0.0;
    double student_loss = 0.0;
    long drops = 0;
    if (pipeline_ == Pipeline::supervised) {
        const PseudoLabelTable table = true_label_table(data_->train);
        student_loss = student_epoch(data_->train, store_, model_, config_, table, rng_);
    } else {
        const TeacherEpochResult t =
            teacher_epoch(data_->train, store_, model_, config_, e, rng_);
        teacher_loss = t.mean_loss;
        drops = t.dropped_instances;
        if (config_.flags.distillation) {
            const PseudoLabelTable table =
                refresh_pseudo_labels(data_->train, store_, model_, config_, e);
            student_loss = student_epoch(data_->train, store_, model_, config_, table, rng_);
        }
    }
    EpochMetrics m = evaluate_epoch(e, teacher_loss, student_loss, drops);
    ++epoch_;
    return m;
}

CheckpointRecord Trainer::checkpoint() const {
    CheckpointRecord record;
    record.epoch = epoch_;
    record.pipeline = pipeline_name(pipeline_);
    std::ostringstream oss;
    oss << rng_;
    record.rng_state = oss.str();
    record.train_config = config_;
    record.model_config = model_;
    record.params.reserve(store_.size());
    for (const auto& entry : store_.entries()) record.params.emplace_back(entry.name, entry.value);
    return record;
}

namespace {

RunResult drive(Trainer& trainer, const RunHooks& hooks) {
    RunResult result;
    const TrainConfig& cfg = trainer.config();
    while (trainer.completed_epochs() < cfg.epochs) {
        EpochMetrics m = trainer.step_epoch();
        if (hooks.on_epoch) hooks.on_epoch(m);
        result.metrics.push_back(m);
        const long done = trainer.completed_epochs();
        if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && done < cfg.epochs &&
            done % cfg.checkpoint_every == 0)
            hooks.on_checkpoint(trainer.checkpoint());
    }
    result.checkpoint = trainer.checkpoint();
    if (hooks.on_checkpoint) hooks.on_checkpoint(result.checkpoint);
    return result;
}

}  // namespace

RunResult run_weno(const Dataset& data, const TrainConfig& config, const RunHooks& hooks) {
    Trainer trainer(data, config, Trainer::Pipeline::weno);
    return drive(trainer, hooks);
}

RunResult resume_weno(const Dataset& data, const CheckpointRecord& record, const RunHooks& hooks) {
    Trainer trainer(data, record);
    return drive(trainer, hooks);
}

RunResult run_fully_supervised(const Dataset& data, const TrainConfig& config,
                               const RunHooks& hooks) {
    Trainer trainer(data, config, Trainer::Pipeline::supervised);
    return drive(trainer, hooks);
}

std::vector<AblationRun> run_ablation(const Dataset& data, const TrainConfig& base,
                                      const RunHooks& hooks) {
    base.validate();
    std::vector<AblationRun> runs;
    const std::vector<std::pair<std::string, AblationFlags>> grid = {
        {"none", {false, false, false}},
        {"+D", {true, false, false}},
        {"+D+S", {true, true, false}},
        {"+D+S+H", {true, true, true}},
    };
    for (const auto& [name, flags] : grid) {
        TrainConfig config = base;
        config.flags = flags;
        AblationRun run;
        run.name = name;
        run.flags = flags;
        run.result = run_weno(data, config, hooks);
        runs.push_back(std::move(run));
    }
    return runs;
}

}  // namespace weno
