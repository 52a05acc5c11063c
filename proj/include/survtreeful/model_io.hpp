#pragma once

#include <string>
#include <vector>

#include "survtreeful/fusion.hpp"
#include "survtreeful/tree.hpp"

namespace survtreeful {

/// Fitted model artifact: the sheared tree, its leaf-to-group map, the
/// relaxed per-group log hazards with their Breslow baseline, and the
/// covariate schema prediction inputs must match. Node training-row lists
/// are not persisted: a loaded model routes, predicts and summarizes, but
/// cannot be refit.
struct FittedModel {
    std::vector<CovariateSpec> schema;
    Tree tree;
    Grouping grouping;
    std::vector<double> group_beta;  // [0] is the group-1 reference, 0
    StepFunction baseline;           // cumulative hazard of group 1
    std::size_t n_train = 0;
};

/// Grouping keyed by `tree`'s own terminals: a terminal's fused label when
/// set, else `fallback`'s entry for that leaf. Shearing collapses subtrees
/// into new terminals that are absent from the pre-shear grouping; this
/// reconciles the two. Throws DataError when a leaf has neither label.
Grouping tree_grouping(const Tree& tree, const Grouping& fallback);

/// JSON document with stable (alphabetical) key order; doubles print in
/// shortest round-trip form, so parsing recovers them exactly.
std::string save_model(const FittedModel& model);

/// Parses and validates a save_model document. Malformed JSON, missing
/// fields, a grouping that misses a leaf, or a split variable outside the
/// schema all throw DataError.
FittedModel load_model(const std::string& json_text);

void save_model_file(const FittedModel& model, const std::string& path);
FittedModel load_model_file(const std::string& path);

}  // namespace survtreeful
