#include "weno/eval.hpp"

#include <algorithm>
#include <string>

#include "weno/labels.hpp"
#include "weno/tape.hpp"
#include "weno/util.hpp"

namespace weno {

std::vector<float> student_instance_scores(ParameterStore<float>& store, const ModelConfig& config,
                                           const Bag& bag) {
    Tape<float> tape(false);
    Var x = tape.input(bag_features<float>(bag));
    Var z = encode(tape, store, config.encoder, config.encoder_handle().student_prefix, x);
    Var p = instance_predict(tape, store, z);
    return tape.value(p).data;
}

std::vector<float> teacher_attention_weights(ParameterStore<float>& store,
                                             const ModelConfig& config, const Bag& bag) {
    Tape<float> tape(false);
    Var x = tape.input(bag_features<float>(bag));
    Var z = encode(tape, store, config.encoder, config.encoder_handle().teacher_prefix, x);
    Var a = attention_scores(tape, store, config.attention, z);
    return tape.value(a).data;
}

std::vector<float> teacher_attention_instance_scores(ParameterStore<float>& store,
                                                     const ModelConfig& config, const Bag& bag) {
    return minmax_normalize<float>(teacher_attention_weights(store, config, bag));
}

float teacher_bag_probability(ParameterStore<float>& store, const ModelConfig& config,
                              const Bag& bag) {
    Tape<float> tape(false);
    Var x = tape.input(bag_features<float>(bag));
    Var z = encode(tape, store, config.encoder, config.encoder_handle().teacher_prefix, x);
    Var a = attention_scores(tape, store, config.attention, z);
    Var p = bag_predict(tape, store, aggregate(tape, z, a));
    return tape.value(p).data[0];
}

float student_bag_score(ParameterStore<float>& store, const ModelConfig& config, const Bag& bag) {
    const auto scores = student_instance_scores(store, config, bag);
    return *std::max_element(scores.begin(), scores.end());
}

double evaluate_instance_level(const std::vector<Bag>& split, ParameterStore<float>& store,
                               const ModelConfig& config, InstanceScoreMode mode) {
    std::vector<float> scores;
    std::vector<int> labels;
    for (const Bag& bag : split) {
        const std::vector<float> bag_scores =
            mode == InstanceScoreMode::student
                ? student_instance_scores(store, config, bag)
                : teacher_attention_instance_scores(store, config, bag);
        scores.insert(scores.end(), bag_scores.begin(), bag_scores.end());
        for (const Instance& inst : bag.instances) labels.push_back(inst.true_label);
    }
    return auc(scores, labels);
}

double evaluate_bag_level(const std::vector<Bag>& split, ParameterStore<float>& store,
                          const ModelConfig& config, BagScoreMode mode) {
    std::vector<float> scores;
    std::vector<int> labels;
    scores.reserve(split.size());
    labels.reserve(split.size());
    for (const Bag& bag : split) {
        scores.push_back(mode == BagScoreMode::teacher ? teacher_bag_probability(store, config, bag)
                                                       : student_bag_score(store, config, bag));
        labels.push_back(bag.label);
    }
    return auc(scores, labels);
}

std::vector<ScoreRow> score_grid(const std::vector<Bag>& bags, ParameterStore<float>& store,
                                 const ModelConfig& config) {
    std::vector<ScoreRow> rows;
    for (const Bag& bag : bags) {
        const auto student = student_instance_scores(store, config, bag);
        const auto teacher = teacher_attention_instance_scores(store, config, bag);
        for (std::size_t i = 0; i < bag.instances.size(); ++i) {
            ScoreRow row;
            row.instance_id = bag.instances[i].instance_id;
            row.true_label = bag.instances[i].true_label;
            row.student_score = student[i];
            row.teacher_attention_score = teacher[i];
            rows.push_back(row);
        }
    }
    std::sort(rows.begin(), rows.end(),
              [](const ScoreRow& a, const ScoreRow& b) { return a.instance_id < b.instance_id; });
    return rows;
}

void export_scores(const std::vector<Bag>& bags, ParameterStore<float>& store,
                   const ModelConfig& config, const std::string& path) {
    const auto rows = score_grid(bags, store, config);
    std::string out = "instance-id,true-label,student-score,teacher-attention-score\n";
    for (const ScoreRow& row : rows) {
        out += std::to_string(row.instance_id);
        out += ',';
        out += std::to_string(row.true_label);
        out += ',';
        out += format_g9(row.student_score);
        out += ',';
        out += format_g9(row.teacher_attention_score);
        out += '\n';
    }
    write_file_atomic(path, out.data(), out.size());
}

}  // namespace weno
