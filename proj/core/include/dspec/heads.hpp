#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dspec/pipeline.hpp"
#include "dspec/tensor.hpp"

namespace dspec {

enum class BaselineBucket { Negative, Zero, Positive };

const char* bucket_name(BaselineBucket b);

/// Negative = [0, 0.5), Zero = 0.5 exactly, Positive = (0.5, 1].
/// `zero_epsilon` widens the Zero bucket to [0.5-eps, 0.5+eps] for noisy
/// sources; the default keeps the exact-equality definition.
BaselineBucket bucket_baseline(double baseline, double zero_epsilon = 0.0);

struct Head {
    std::string name;
    std::vector<Mode> modes;
    std::vector<int> classes;  // network-class indices, ascending
};

/// Partition of the final dense layer's units into per-mode heads.
struct HeadLayout {
    std::vector<Head> heads;
    std::vector<std::string> class_names;  // network class index -> name

    int num_classes() const { return static_cast<int>(class_names.size()); }
    const Head& head_for_mode(Mode mode) const;
    int class_index(const std::string& name) const;
    /// Disjoint class sets covering every index; every mode served once.
    void validate() const;
};

/// One row of the class-mapping scheme. Empty optionals are wildcards;
/// specific fields take precedence over wildcards when several rows match.
struct MappingRule {
    std::string network_class;
    std::optional<Mode> mode;
    std::optional<BaselineBucket> bucket;
    std::string output_class;
    bool hazard = false;  // mapping is clinically off-label (e.g. PV under CW)
};

struct MappingTable {
    std::vector<MappingRule> rules;
    std::vector<std::string> universe;  // declared output classes
};

struct MapResult {
    std::string output_class;
    bool hazard = false;
};

/// Resolves the unique matching row. A missing row past validation is an
/// internal error.
MapResult map_output(const std::string& network_class, Mode mode, BaselineBucket bucket,
                     const MappingTable& table);

/// Exhaustively checks the table against the layout: exactly one best match
/// for every (class, served mode, bucket); every universe class reachable;
/// the per-head NO classes merge to a single output class.
std::vector<std::string> validate_table(const MappingTable& table, const HeadLayout& layout);

/// Cross-entropy restricted to the head serving `mode`. The gradient spans
/// the full logit vector and is exactly zero at every other head's indices.
struct MaskedLoss {
    double loss;
    std::vector<float> grad;  // logit length
};
MaskedLoss masked_loss(const float* logits, int logit_len, int true_class, Mode mode,
                       const HeadLayout& layout);

/// Argmax restricted to an index subset; ties break to the lowest index.
int argmax_subset(const float* logits, const std::vector<int>& subset);

struct Prediction {
    int network_class;
    std::string head;
};
Prediction predict_class(const float* logits, Mode mode, const HeadLayout& layout);

// ---------------------------------------------------------------------------
// output-variant configuration (experiment column "Output")
// ---------------------------------------------------------------------------

enum class OutputVariant { SeparateNets, SingleHead, Multihead, SingleTrainMultiheadTest };

OutputVariant variant_from_name(const std::string& name);
const char* variant_name(OutputVariant v);

/// One network to train under a variant. `layout` drives the masked loss
/// and class names; `eval_layout` restricts the argmax at evaluation and may
/// share a class across heads (the E4 variant's common NO), so it is not
/// required to satisfy HeadLayout::validate.
struct NetPlan {
    std::string name;
    HeadLayout layout;
    HeadLayout eval_layout;
    MappingTable table;
    std::vector<Mode> modes;  // dataset filter; all three for joint nets

    std::vector<int> train_subset(Mode mode) const;
    Prediction eval_predict(const float* logits, Mode mode) const;
};

/// separate_nets: one plan per head (own NO class each).
/// single_head: one 9-class plan, unrestricted argmax.
/// multihead: one 10-class plan, masked loss + restricted argmax.
/// single_train_multihead_test: 9-class training, head-restricted eval with
/// NO shared by both heads.
std::vector<NetPlan> configure_output(OutputVariant variant, const HeadLayout& layout,
                                      const MappingTable& table);

// ---------------------------------------------------------------------------
// config file I/O (JSON)
// ---------------------------------------------------------------------------

struct HeadsConfig {
    HeadLayout layout;
    MappingTable table;
};

HeadsConfig load_heads_config(const std::string& path);
std::string heads_config_to_json(const HeadsConfig& cfg);
HeadsConfig heads_config_from_json(const std::string& json_text);

/// Plan round trip for the model artifact.
std::string net_plan_to_json_text(const NetPlan& plan);
NetPlan net_plan_from_json_text(const std::string& text);

/// Training target: the unique network class of the head serving `mode`
/// that maps to `label` under (mode, bucket). DataError when no class or
/// several classes produce the label.
int network_class_for_label(const std::string& label, Mode mode, BaselineBucket bucket,
                            const NetPlan& plan);

} // namespace dspec
