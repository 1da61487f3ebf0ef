#include "dspec/heads.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "dspec/errors.hpp"
#include "dspec/loss.hpp"

namespace dspec {

const char* bucket_name(BaselineBucket b) {
    switch (b) {
        case BaselineBucket::Negative: return "negative";
        case BaselineBucket::Zero: return "zero";
        case BaselineBucket::Positive: return "positive";
    }
    return "?";
}

BaselineBucket bucket_baseline(double baseline, double zero_epsilon) {
    if (!(baseline >= 0.0 && baseline <= 1.0))
        throw DataError("baseline " + std::to_string(baseline) + " outside [0,1]");
    if (baseline >= 0.5 - zero_epsilon && baseline <= 0.5 + zero_epsilon) return BaselineBucket::Zero;
    return baseline < 0.5 ? BaselineBucket::Negative : BaselineBucket::Positive;
}

const Head& HeadLayout::head_for_mode(Mode mode) const {
    for (const Head& h : heads)
        for (Mode m : h.modes)
            if (m == mode) return h;
    throw ConfigError(std::string("no head serves mode ") + mode_name(mode));
}

int HeadLayout::class_index(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == name) return static_cast<int>(i);
    throw DataError("unknown network class '" + name + "'");
}

void HeadLayout::validate() const {
    if (heads.empty()) throw ConfigError("head layout has no heads");
    std::set<int> seen;
    for (const Head& h : heads) {
        if (h.classes.empty()) throw ConfigError("head '" + h.name + "' has no classes");
        for (int c : h.classes) {
            if (c < 0 || c >= num_classes())
                throw ConfigError("head '" + h.name + "' references class index " + std::to_string(c) +
                                  " outside [0," + std::to_string(num_classes()) + ")");
            if (!seen.insert(c).second)
                throw ConfigError("class index " + std::to_string(c) + " appears in more than one head");
        }
    }
    if (static_cast<int>(seen.size()) != num_classes())
        throw ConfigError("heads cover " + std::to_string(seen.size()) + " of " +
                          std::to_string(num_classes()) + " network classes");
    for (Mode m : {Mode::CW, Mode::PW, Mode::TVD}) {
        int count = 0;
        for (const Head& h : heads)
            count += static_cast<int>(std::count(h.modes.begin(), h.modes.end(), m));
        if (count != 1)
            throw ConfigError(std::string("mode ") + mode_name(m) + " is served by " +
                              std::to_string(count) + " heads (expected exactly 1)");
    }
}

namespace {

int rule_specificity(const MappingRule& r) {
    return (r.mode.has_value() ? 1 : 0) + (r.bucket.has_value() ? 1 : 0);
}

bool rule_matches(const MappingRule& r, const std::string& network_class, Mode mode, BaselineBucket bucket) {
    if (r.network_class != network_class) return false;
    if (r.mode.has_value() && *r.mode != mode) return false;
    if (r.bucket.has_value() && *r.bucket != bucket) return false;
    return true;
}

/// The unique most-specific matching rule, or nullptr with `why` set.
const MappingRule* best_rule(const MappingTable& table, const std::string& network_class,
                             Mode mode, BaselineBucket bucket, std::string* why) {
    const MappingRule* best = nullptr;
    int best_spec = -1;
    bool tie = false;
    for (const MappingRule& r : table.rules) {
        if (!rule_matches(r, network_class, mode, bucket)) continue;
        const int spec = rule_specificity(r);
        if (spec > best_spec) {
            best = &r;
            best_spec = spec;
            tie = false;
        } else if (spec == best_spec) {
            tie = true;
        }
    }
    if (!best) {
        if (why) *why = "no rule matches (" + network_class + ", " + mode_name(mode) + ", " + bucket_name(bucket) + ")";
        return nullptr;
    }
    if (tie) {
        if (why)
            *why = "ambiguous rules at equal specificity for (" + network_class + ", " + mode_name(mode) +
                   ", " + bucket_name(bucket) + ")";
        return nullptr;
    }
    return best;
}

} // namespace

MapResult map_output(const std::string& network_class, Mode mode, BaselineBucket bucket,
                     const MappingTable& table) {
    std::string why;
    const MappingRule* rule = best_rule(table, network_class, mode, bucket, &why);
    if (!rule)
        throw Error("internal", "mapping table passed validation but " + why);
    return {rule->output_class, rule->hazard};
}

std::vector<std::string> validate_table(const MappingTable& table, const HeadLayout& layout) {
    std::vector<std::string> violations;
    layout.validate();

    std::set<std::string> universe(table.universe.begin(), table.universe.end());
    for (const MappingRule& r : table.rules) {
        if (!universe.count(r.output_class))
            violations.push_back("rule output class '" + r.output_class + "' is not in the declared universe");
    }

    // duplicate rows with identical patterns
    for (std::size_t i = 0; i < table.rules.size(); ++i)
        for (std::size_t j = i + 1; j < table.rules.size(); ++j) {
            const MappingRule& a = table.rules[i];
            const MappingRule& b = table.rules[j];
            if (a.network_class == b.network_class && a.mode == b.mode && a.bucket == b.bucket)
                violations.push_back("duplicate rules for (" + a.network_class + ", " +
                                     (a.mode ? mode_name(*a.mode) : "ANY") + ", " +
                                     (a.bucket ? bucket_name(*a.bucket) : "ANY") + ")");
        }

    // totality and unambiguity over every reachable combination
    std::set<std::string> produced;
    std::map<std::string, std::set<std::string>> no_targets;  // head -> outputs of its NO-ish classes
    for (const Head& head : layout.heads) {
        for (int c : head.classes) {
            const std::string& cls = layout.class_names[static_cast<std::size_t>(c)];
            for (Mode m : head.modes) {
                for (BaselineBucket bucket :
                     {BaselineBucket::Negative, BaselineBucket::Zero, BaselineBucket::Positive}) {
                    std::string why;
                    const MappingRule* rule = best_rule(table, cls, m, bucket, &why);
                    if (!rule) {
                        violations.push_back(why);
                        continue;
                    }
                    produced.insert(rule->output_class);
                }
            }
        }
    }

    for (const std::string& cls : table.universe)
        if (!produced.count(cls))
            violations.push_back("output class '" + cls + "' in the universe is never produced");

    // NO merge: every network class named NO* must map to the same single output
    std::set<std::string> no_outputs;
    for (const MappingRule& r : table.rules)
        if (r.network_class.rfind("NO", 0) == 0) no_outputs.insert(r.output_class);
    if (no_outputs.size() > 1) {
        std::string msg = "NO classes map to multiple outputs:";
        for (const std::string& s : no_outputs) msg += " " + s;
        violations.push_back(msg);
    }

    return violations;
}

MaskedLoss masked_loss(const float* logits, int logit_len, int true_class, Mode mode,
                       const HeadLayout& layout) {
    const Head& head = layout.head_for_mode(mode);
    if (std::find(head.classes.begin(), head.classes.end(), true_class) == head.classes.end())
        throw DataError("true class " + layout.class_names[static_cast<std::size_t>(true_class)] +
                        " does not belong to head '" + head.name + "' serving mode " + mode_name(mode));
    MaskedLoss out;
    out.grad.assign(static_cast<std::size_t>(logit_len), 0.0f);
    out.loss = cross_entropy_subset(logits, logit_len, head.classes, true_class, out.grad.data());
    return out;
}

int argmax_subset(const float* logits, const std::vector<int>& subset) {
    if (subset.empty()) throw ConfigError("argmax over an empty index subset");
    int best = subset[0];
    for (int idx : subset)
        if (logits[idx] > logits[best]) best = idx;  // strict: ties keep lowest index
    return best;
}

Prediction predict_class(const float* logits, Mode mode, const HeadLayout& layout) {
    const Head& head = layout.head_for_mode(mode);
    return {argmax_subset(logits, head.classes), head.name};
}

// ---------------------------------------------------------------------------
// output variants
// ---------------------------------------------------------------------------

OutputVariant variant_from_name(const std::string& name) {
    if (name == "separate_nets") return OutputVariant::SeparateNets;
    if (name == "single_head") return OutputVariant::SingleHead;
    if (name == "multihead") return OutputVariant::Multihead;
    if (name == "single_train_multihead_test") return OutputVariant::SingleTrainMultiheadTest;
    throw ConfigError("unknown output variant '" + name + "'");
}

const char* variant_name(OutputVariant v) {
    switch (v) {
        case OutputVariant::SeparateNets: return "separate_nets";
        case OutputVariant::SingleHead: return "single_head";
        case OutputVariant::Multihead: return "multihead";
        case OutputVariant::SingleTrainMultiheadTest: return "single_train_multihead_test";
    }
    return "?";
}

std::vector<int> NetPlan::train_subset(Mode mode) const {
    return layout.head_for_mode(mode).classes;
}

Prediction NetPlan::eval_predict(const float* logits, Mode mode) const {
    return predict_class(logits, mode, eval_layout);
}

namespace {

bool is_no_class(const std::string& name) { return name.rfind("NO", 0) == 0; }

/// Single-head layout over the merged class list: the per-head NO classes
/// collapse to one shared "NO"; every mode lands on the one head.
HeadLayout merged_layout(const HeadLayout& base) {
    HeadLayout out;
    Head all;
    all.name = "ALL";
    all.modes = {Mode::CW, Mode::PW, Mode::TVD};
    bool have_no = false;
    for (const Head& h : base.heads) {
        for (int c : h.classes) {
            const std::string& name = base.class_names[static_cast<std::size_t>(c)];
            if (is_no_class(name)) {
                have_no = true;
                continue;
            }
            all.classes.push_back(static_cast<int>(out.class_names.size()));
            out.class_names.push_back(name);
        }
    }
    if (have_no) {
        all.classes.push_back(static_cast<int>(out.class_names.size()));
        out.class_names.push_back("NO");
    }
    out.heads.push_back(std::move(all));
    return out;
}

/// Table for the merged layout: NO rules collapse, and every class gains a
/// lowest-precedence full-wildcard fallback so combinations outside its
/// original head stay total (single-head argmax can reach any class under
/// any mode).
MappingTable merged_table(const MappingTable& base, const HeadLayout& base_layout) {
    MappingTable out;
    out.universe = base.universe;
    bool no_done = false;
    for (const MappingRule& r : base.rules) {
        MappingRule copy = r;
        if (is_no_class(r.network_class)) {
            if (no_done) continue;
            copy.network_class = "NO";
            copy.mode.reset();
            copy.bucket.reset();
            no_done = true;
        }
        out.rules.push_back(std::move(copy));
    }
    // fallbacks: first-listed rule of each class supplies the default output
    std::set<std::string> classes_with_wildcard;
    for (const MappingRule& r : out.rules)
        if (!r.mode.has_value() && !r.bucket.has_value()) classes_with_wildcard.insert(r.network_class);
    std::vector<MappingRule> fallbacks;
    for (const std::string& name : base_layout.class_names) {
        if (is_no_class(name) || classes_with_wildcard.count(name)) continue;
        for (const MappingRule& r : out.rules) {
            if (r.network_class == name) {
                MappingRule fb;
                fb.network_class = name;
                fb.output_class = r.output_class;
                fb.hazard = r.hazard;
                fallbacks.push_back(std::move(fb));
                break;
            }
        }
        classes_with_wildcard.insert(name);
    }
    out.rules.insert(out.rules.end(), fallbacks.begin(), fallbacks.end());
    return out;
}

/// Restriction of layout+table to one head, class indices renumbered.
NetPlan head_plan(const HeadLayout& base, const MappingTable& table, const Head& head) {
    NetPlan plan;
    plan.name = head.name;
    plan.modes = head.modes;
    Head only;
    only.name = head.name;
    only.modes = head.modes;
    for (int c : head.classes) {
        only.classes.push_back(static_cast<int>(plan.layout.class_names.size()));
        plan.layout.class_names.push_back(base.class_names[static_cast<std::size_t>(c)]);
    }
    plan.layout.heads.push_back(std::move(only));
    plan.eval_layout = plan.layout;
    plan.table.universe.clear();
    std::set<std::string> kept(plan.layout.class_names.begin(), plan.layout.class_names.end());
    std::set<std::string> produced;
    for (const MappingRule& r : table.rules) {
        if (!kept.count(r.network_class)) continue;
        plan.table.rules.push_back(r);
        produced.insert(r.output_class);
    }
    for (const std::string& u : table.universe)
        if (produced.count(u)) plan.table.universe.push_back(u);
    return plan;
}

} // namespace

std::vector<NetPlan> configure_output(OutputVariant variant, const HeadLayout& layout,
                                      const MappingTable& table) {
    layout.validate();
    std::vector<NetPlan> plans;
    switch (variant) {
        case OutputVariant::SeparateNets: {
            for (const Head& head : layout.heads) plans.push_back(head_plan(layout, table, head));
            break;
        }
        case OutputVariant::SingleHead:
        case OutputVariant::SingleTrainMultiheadTest: {
            NetPlan plan;
            plan.name = "single";
            plan.layout = merged_layout(layout);
            plan.table = merged_table(table, layout);
            plan.modes = {Mode::CW, Mode::PW, Mode::TVD};
            if (variant == OutputVariant::SingleTrainMultiheadTest) {
                // eval argmax restricted per mode, NO shared by both heads
                HeadLayout eval;
                eval.class_names = plan.layout.class_names;
                const int no_index = plan.layout.class_index("NO");
                for (const Head& h : layout.heads) {
                    Head eh;
                    eh.name = h.name;
                    eh.modes = h.modes;
                    for (int c : h.classes) {
                        const std::string& name = layout.class_names[static_cast<std::size_t>(c)];
                        if (is_no_class(name)) continue;
                        eh.classes.push_back(plan.layout.class_index(name));
                    }
                    eh.classes.push_back(no_index);
                    std::sort(eh.classes.begin(), eh.classes.end());
                    eval.heads.push_back(std::move(eh));
                }
                plan.eval_layout = std::move(eval);
            } else {
                plan.eval_layout = plan.layout;
            }
            plans.push_back(std::move(plan));
            break;
        }
        case OutputVariant::Multihead: {
            NetPlan plan;
            plan.name = "multihead";
            plan.layout = layout;
            plan.eval_layout = layout;
            plan.table = table;
            plan.modes = {Mode::CW, Mode::PW, Mode::TVD};
            plans.push_back(std::move(plan));
            break;
        }
    }
    return plans;
}

int network_class_for_label(const std::string& label, Mode mode, BaselineBucket bucket,
                            const NetPlan& plan) {
    const Head& head = plan.layout.head_for_mode(mode);
    int found = -1;
    for (int c : head.classes) {
        const MapResult r = map_output(plan.layout.class_names[static_cast<std::size_t>(c)], mode, bucket, plan.table);
        if (r.output_class != label) continue;
        if (found >= 0)
            throw DataError("label '" + label + "' is produced by both " +
                            plan.layout.class_names[static_cast<std::size_t>(found)] + " and " +
                            plan.layout.class_names[static_cast<std::size_t>(c)] + " under mode " +
                            mode_name(mode) + ", bucket " + bucket_name(bucket));
        found = c;
    }
    if (found < 0)
        throw DataError("label '" + label + "' is not reachable from any network class under mode " +
                        std::string(mode_name(mode)) + ", bucket " + bucket_name(bucket));
    return found;
}

// ---------------------------------------------------------------------------
// JSON I/O
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

Mode mode_from_json(const json& j) { return mode_from_name(j.get<std::string>()); }

std::optional<Mode> opt_mode_from_json(const json& j) {
    const std::string s = j.get<std::string>();
    if (s == "ANY") return std::nullopt;
    return mode_from_name(s);
}

std::optional<BaselineBucket> opt_bucket_from_json(const json& j) {
    const std::string s = j.get<std::string>();
    if (s == "ANY") return std::nullopt;
    if (s == "negative") return BaselineBucket::Negative;
    if (s == "zero") return BaselineBucket::Zero;
    if (s == "positive") return BaselineBucket::Positive;
    throw ConfigError("unknown baseline bucket '" + s + "' (expected negative|zero|positive|ANY)");
}

} // namespace

HeadsConfig heads_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    HeadsConfig cfg;
    for (const auto& name : j.at("network_classes")) cfg.layout.class_names.push_back(name.get<std::string>());
    for (const auto& jh : j.at("heads")) {
        Head h;
        h.name = jh.at("name").get<std::string>();
        for (const auto& m : jh.at("modes")) h.modes.push_back(mode_from_json(m));
        for (const auto& c : jh.at("classes")) h.classes.push_back(cfg.layout.class_index(c.get<std::string>()));
        cfg.layout.heads.push_back(std::move(h));
    }
    for (const auto& name : j.at("output_classes")) cfg.table.universe.push_back(name.get<std::string>());
    for (const auto& jr : j.at("mapping")) {
        MappingRule r;
        r.network_class = jr.at("class").get<std::string>();
        r.mode = opt_mode_from_json(jr.value("mode", json("ANY")));
        r.bucket = opt_bucket_from_json(jr.value("baseline", json("ANY")));
        r.output_class = jr.at("output").get<std::string>();
        r.hazard = jr.value("hazard", false);
        cfg.table.rules.push_back(std::move(r));
    }
    cfg.layout.validate();
    return cfg;
}

std::string heads_config_to_json(const HeadsConfig& cfg) {
    json j;
    j["network_classes"] = cfg.layout.class_names;
    j["heads"] = json::array();
    for (const Head& h : cfg.layout.heads) {
        json jh;
        jh["name"] = h.name;
        jh["modes"] = json::array();
        for (Mode m : h.modes) jh["modes"].push_back(mode_name(m));
        jh["classes"] = json::array();
        for (int c : h.classes) jh["classes"].push_back(cfg.layout.class_names[static_cast<std::size_t>(c)]);
        j["heads"].push_back(std::move(jh));
    }
    j["output_classes"] = cfg.table.universe;
    j["mapping"] = json::array();
    for (const MappingRule& r : cfg.table.rules) {
        json jr;
        jr["class"] = r.network_class;
        jr["mode"] = r.mode ? mode_name(*r.mode) : "ANY";
        jr["baseline"] = r.bucket ? bucket_name(*r.bucket) : "ANY";
        jr["output"] = r.output_class;
        if (r.hazard) jr["hazard"] = true;
        j["mapping"].push_back(std::move(jr));
    }
    return j.dump(2) + "\n";
}

namespace {

json layout_to_json(const HeadLayout& layout) {
    json j;
    j["class_names"] = layout.class_names;
    j["heads"] = json::array();
    for (const Head& h : layout.heads) {
        json jh;
        jh["name"] = h.name;
        jh["modes"] = json::array();
        for (Mode m : h.modes) jh["modes"].push_back(mode_name(m));
        jh["classes"] = h.classes;
        j["heads"].push_back(std::move(jh));
    }
    return j;
}

HeadLayout layout_from_json(const json& j) {
    HeadLayout layout;
    for (const auto& n : j.at("class_names")) layout.class_names.push_back(n.get<std::string>());
    for (const auto& jh : j.at("heads")) {
        Head h;
        h.name = jh.at("name").get<std::string>();
        for (const auto& m : jh.at("modes")) h.modes.push_back(mode_from_name(m.get<std::string>()));
        for (const auto& c : jh.at("classes")) h.classes.push_back(c.get<int>());
        layout.heads.push_back(std::move(h));
    }
    return layout;
}

json table_to_json(const MappingTable& table) {
    json j;
    j["universe"] = table.universe;
    j["rules"] = json::array();
    for (const MappingRule& r : table.rules) {
        json jr;
        jr["class"] = r.network_class;
        jr["mode"] = r.mode ? mode_name(*r.mode) : "ANY";
        jr["baseline"] = r.bucket ? bucket_name(*r.bucket) : "ANY";
        jr["output"] = r.output_class;
        if (r.hazard) jr["hazard"] = true;
        j["rules"].push_back(std::move(jr));
    }
    return j;
}

MappingTable table_from_json(const json& j) {
    MappingTable table;
    for (const auto& u : j.at("universe")) table.universe.push_back(u.get<std::string>());
    for (const auto& jr : j.at("rules")) {
        MappingRule r;
        r.network_class = jr.at("class").get<std::string>();
        r.mode = opt_mode_from_json(jr.at("mode"));
        r.bucket = opt_bucket_from_json(jr.at("baseline"));
        r.output_class = jr.at("output").get<std::string>();
        r.hazard = jr.value("hazard", false);
        table.rules.push_back(std::move(r));
    }
    return table;
}

} // namespace

std::string net_plan_to_json_text(const NetPlan& plan) {
    json j;
    j["name"] = plan.name;
    j["layout"] = layout_to_json(plan.layout);
    j["eval_layout"] = layout_to_json(plan.eval_layout);
    j["table"] = table_to_json(plan.table);
    j["modes"] = json::array();
    for (Mode m : plan.modes) j["modes"].push_back(mode_name(m));
    return j.dump();
}

NetPlan net_plan_from_json_text(const std::string& text) {
    try {
        json j = json::parse(text);
        NetPlan plan;
        plan.name = j.at("name").get<std::string>();
        plan.layout = layout_from_json(j.at("layout"));
        plan.eval_layout = layout_from_json(j.at("eval_layout"));
        plan.table = table_from_json(j.at("table"));
        for (const auto& m : j.at("modes")) plan.modes.push_back(mode_from_name(m.get<std::string>()));
        return plan;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("net plan: ") + e.what());
    }
}

HeadsConfig load_heads_config(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open heads config '" + path + "'");
    std::string text;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);
    try {
        return heads_config_from_json(text);
    } catch (const json::exception& e) {
        throw ConfigError("heads config '" + path + "': " + e.what());
    }
}

} // namespace dspec
