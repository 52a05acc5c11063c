#include "survtreeful/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace survtreeful {

namespace {

using nlohmann::json;

const char* kind_name(CovariateKind kind) {
    switch (kind) {
        case CovariateKind::continuous: return "continuous";
        case CovariateKind::binary: return "binary";
        case CovariateKind::nominal: return "nominal";
    }
    return "?";
}

CovariateKind kind_from_name(const std::string& name) {
    if (name == "continuous") return CovariateKind::continuous;
    if (name == "binary") return CovariateKind::binary;
    if (name == "nominal") return CovariateKind::nominal;
    throw DataError("unknown covariate kind: " + name);
}

json schema_to_json(const std::vector<CovariateSpec>& schema) {
    json out = json::array();
    for (const auto& spec : schema) {
        json j{{"kind", kind_name(spec.kind)}, {"name", spec.name}};
        if (spec.kind == CovariateKind::nominal) j["levels"] = spec.levels;
        out.push_back(std::move(j));
    }
    return out;
}

json tree_to_json(const Tree& tree) {
    json out = json::array();
    for (const auto& [id, node] : tree.nodes) {
        json j{{"depth", node.depth},    {"events", node.events},
               {"group", node.group},    {"id", id},
               {"n", node.rows.size()},  {"statistic", node.statistic}};
        if (node.split) {
            json s{{"is_subset", node.split->is_subset},
                   {"threshold", node.split->threshold},
                   {"variable", node.split->variable}};
            if (node.split->is_subset) s["in_left"] = node.split->in_left;
            j["split"] = std::move(s);
        } else {
            j["split"] = nullptr;
        }
        out.push_back(std::move(j));
    }
    return out;
}

json grouping_to_json(const Grouping& grouping) {
    json out = json::array();
    for (const auto& [leaf, group] : grouping.leaf_group)
        out.push_back(json::array({leaf, group}));
    return out;
}

/// Structural checks shared by every load path.
void validate(const FittedModel& m) {
    validate_schema(m.schema);
    if (m.tree.nodes.empty() || !m.tree.nodes.count(1))
        throw DataError("model tree is missing its root");
    for (const auto& [id, node] : m.tree.nodes) {
        if (node.split) {
            if (!m.tree.nodes.count(2 * id) || !m.tree.nodes.count(2 * id + 1))
                throw DataError("internal node " + std::to_string(id) +
                                " is missing a child");
            if (node.split->variable >= m.schema.size())
                throw DataError("split variable out of schema range at node " +
                                std::to_string(id));
        }
    }
    if (m.grouping.group_count < 1) throw DataError("model has no groups");
    for (const auto leaf : m.tree.leaf_ids()) {
        const auto it = m.grouping.leaf_group.find(leaf);
        if (it == m.grouping.leaf_group.end())
            throw DataError("grouping misses leaf " + std::to_string(leaf));
        if (it->second < 1 || it->second > m.grouping.group_count)
            throw DataError("group id out of range at leaf " +
                            std::to_string(leaf));
    }
    if (m.group_beta.size() !=
        static_cast<std::size_t>(m.grouping.group_count))
        throw DataError("group_beta length does not match the group count");
    if (m.baseline.times.size() != m.baseline.values.size())
        throw DataError("baseline times/values length mismatch");
    for (std::size_t i = 1; i < m.baseline.times.size(); ++i)
        if (!(m.baseline.times[i - 1] < m.baseline.times[i]))
            throw DataError("baseline times must be strictly increasing");
}

}  // namespace

std::string save_model(const FittedModel& model) {
    validate(model);
    json doc{{"baseline",
              {{"initial", model.baseline.initial},
               {"times", model.baseline.times},
               {"values", model.baseline.values}}},
             {"group_beta", model.group_beta},
             {"group_count", model.grouping.group_count},
             {"grouping", grouping_to_json(model.grouping)},
             {"n_train", model.n_train},
             {"schema", schema_to_json(model.schema)},
             {"tree", tree_to_json(model.tree)}};
    return doc.dump(2) + "\n";
}

FittedModel load_model(const std::string& json_text) {
    FittedModel m;
    try {
        const json doc = json::parse(json_text);
        for (const auto& j : doc.at("schema")) {
            CovariateSpec spec;
            spec.name = j.at("name").get<std::string>();
            spec.kind = kind_from_name(j.at("kind").get<std::string>());
            if (spec.kind == CovariateKind::nominal)
                spec.levels = j.at("levels").get<std::vector<std::string>>();
            m.schema.push_back(std::move(spec));
        }
        for (const auto& j : doc.at("tree")) {
            TreeNode node;
            node.id = j.at("id").get<std::uint32_t>();
            node.depth = j.at("depth").get<std::uint32_t>();
            node.events = j.at("events").get<std::size_t>();
            node.group = j.at("group").get<std::int32_t>();
            node.statistic = j.at("statistic").get<double>();
            if (!j.at("split").is_null()) {
                const auto& s = j.at("split");
                SplitSpec spec;
                spec.variable = s.at("variable").get<std::size_t>();
                spec.is_subset = s.at("is_subset").get<bool>();
                spec.threshold = s.at("threshold").get<double>();
                if (spec.is_subset)
                    spec.in_left =
                        s.at("in_left").get<std::vector<std::uint8_t>>();
                node.split = std::move(spec);
            }
            m.tree.nodes.emplace(node.id, std::move(node));
        }
        for (const auto& j : doc.at("grouping"))
            m.grouping.leaf_group[j.at(0).get<std::uint32_t>()] =
                j.at(1).get<std::int32_t>();
        m.grouping.group_count = doc.at("group_count").get<std::int32_t>();
        m.group_beta = doc.at("group_beta").get<std::vector<double>>();
        const auto& b = doc.at("baseline");
        m.baseline.initial = b.at("initial").get<double>();
        m.baseline.times = b.at("times").get<std::vector<double>>();
        m.baseline.values = b.at("values").get<std::vector<double>>();
        m.n_train = doc.at("n_train").get<std::size_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("model JSON malformed: ") + e.what());
    }
    validate(m);
    return m;
}

Grouping tree_grouping(const Tree& tree, const Grouping& fallback) {
    Grouping g;
    g.group_count = fallback.group_count;
    for (const auto leaf : tree.leaf_ids()) {
        const auto& node = tree.nodes.at(leaf);
        if (node.group > 0) {
            g.leaf_group[leaf] = node.group;
            continue;
        }
        const auto it = fallback.leaf_group.find(leaf);
        if (it == fallback.leaf_group.end())
            throw DataError("no group label for leaf " + std::to_string(leaf));
        g.leaf_group[leaf] = it->second;
    }
    return g;
}

void save_model_file(const FittedModel& model, const std::string& path) {
    const auto text = save_model(model);  // validate before touching the file
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    out << text;
    if (!out) throw DataError("failed writing model file: " + path);
}

FittedModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model(buf.str());
}

}  // namespace survtreeful
