#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "dipoletree/errors.hpp"
#include "dipoletree/tree.hpp"

namespace dipoletree {

inline constexpr const char* kModelFormat = "dipole-tree/1";

namespace iodetail {

using nlohmann::json;

inline json to_json(const KernelSpec& k) {
    json j;
    switch (k.kind) {
        case KernelKind::linear: j["kind"] = "linear"; break;
        case KernelKind::polynomial:
            j["kind"] = "polynomial";
            j["degree"] = k.degree;
            j["offset"] = k.offset;
            break;
        case KernelKind::gaussian:
            j["kind"] = "gaussian";
            j["variance"] = k.variance;
            break;
    }
    return j;
}

inline KernelSpec kernel_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "linear") return KernelSpec::linear();
    if (kind == "polynomial")
        return KernelSpec::polynomial(j.at("degree"), j.at("offset"));
    if (kind == "gaussian") return KernelSpec::gaussian(j.at("variance"));
    throw DataError("model: unknown kernel kind '" + kind + "'");
}

inline json to_json(const KaplanMeier& km) {
    return json{{"times", km.event_times},
                {"survival", km.survival},
                {"at_risk", km.at_risk},
                {"deaths", km.deaths},
                {"max_time", km.max_time}};
}

inline KaplanMeier km_from_json(const json& j) {
    KaplanMeier km;
    km.event_times = j.at("times").get<std::vector<double>>();
    km.survival = j.at("survival").get<std::vector<double>>();
    km.at_risk = j.at("at_risk").get<std::vector<int>>();
    km.deaths = j.at("deaths").get<std::vector<int>>();
    km.max_time = j.at("max_time");
    return km;
}

inline json to_json(const SplitModel& m) {
    json support = json::array();
    for (const auto& s : m.support) {
        support.push_back(json{
            {"x", std::vector<double>(s.x.data(), s.x.data() + s.x.size())},
            {"c", s.coefficient}});
    }
    return json{{"support", support},   {"intercept", m.intercept},
                {"kernel", to_json(m.kernel)}, {"kappa", m.kappa},
                {"epsilon", m.epsilon}, {"objective", m.objective}};
}

inline SplitModel split_from_json(const json& j) {
    SplitModel m;
    for (const auto& s : j.at("support")) {
        const std::vector<double> x = s.at("x").get<std::vector<double>>();
        SupportPoint sp;
        sp.x = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        sp.coefficient = s.at("c");
        m.support.push_back(std::move(sp));
    }
    m.intercept = j.at("intercept");
    m.kernel = kernel_from_json(j.at("kernel"));
    m.kappa = j.at("kappa");
    m.epsilon = j.at("epsilon");
    m.objective = j.at("objective");
    return m;
}

inline json to_json(const TreeNode& node) {
    json j{{"id", node.node_id},
           {"depth", node.depth},
           {"n", node.n_samples},
           {"median", node.median},
           {"median_fallback", node.median_fallback},
           {"km", to_json(node.km)}};
    if (!node.is_leaf()) {
        j["split"] = to_json(*node.split);
        j["logrank"] = node.logrank;
        j["left"] = to_json(*node.left);
        j["right"] = to_json(*node.right);
    }
    return j;
}

inline std::unique_ptr<TreeNode> node_from_json(const json& j) {
    auto node = std::make_unique<TreeNode>();
    node->node_id = j.at("id");
    node->depth = j.at("depth");
    node->n_samples = j.at("n");
    node->median = j.at("median");
    node->median_fallback = j.at("median_fallback");
    node->km = km_from_json(j.at("km"));
    if (j.contains("split")) {
        node->split = split_from_json(j.at("split"));
        node->logrank = j.at("logrank");
        node->left = node_from_json(j.at("left"));
        node->right = node_from_json(j.at("right"));
    }
    return node;
}

}  // namespace iodetail

inline nlohmann::json model_to_json(const SurvivalTree& tree, const std::string& time_col,
                                    const std::string& status_col) {
    using iodetail::to_json;
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["covariates"] = tree.covariate_names;
    j["time_col"] = time_col;
    j["status_col"] = status_col;
    j["standardization"] = {
        {"mean", std::vector<double>(tree.standardization.mean.data(),
                                     tree.standardization.mean.data() +
                                         tree.standardization.mean.size())},
        {"sd", std::vector<double>(tree.standardization.sd.data(),
                                   tree.standardization.sd.data() +
                                       tree.standardization.sd.size())}};
    j["config"] = {{"kernel", to_json(tree.config.kernel)},
                   {"kappa", tree.config.kappa},
                   {"epsilon", tree.config.epsilon},
                   {"zeta1", tree.config.zeta1},
                   {"zeta2", tree.config.zeta2},
                   {"min_node", tree.config.min_node},
                   {"min_child", tree.config.min_child}};
    j["tree"] = to_json(*tree.root);
    return j;
}

struct LoadedModel {
    SurvivalTree tree;
    std::string time_col;
    std::string status_col;
};

inline LoadedModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j.at("format") != kModelFormat)
        throw DataError("model: missing or unsupported format tag");
    LoadedModel out;
    out.time_col = j.at("time_col");
    out.status_col = j.at("status_col");

    SurvivalTree& t = out.tree;
    t.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    const std::vector<double> mean =
        j.at("standardization").at("mean").get<std::vector<double>>();
    const std::vector<double> sd = j.at("standardization").at("sd").get<std::vector<double>>();
    t.standardization.mean =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    t.standardization.sd =
        Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));

    const auto& c = j.at("config");
    t.config.kernel = iodetail::kernel_from_json(c.at("kernel"));
    t.config.kappa = c.at("kappa");
    t.config.epsilon = c.at("epsilon");
    t.config.zeta1 = c.at("zeta1");
    t.config.zeta2 = c.at("zeta2");
    t.config.min_node = c.at("min_node");
    t.config.min_child = c.at("min_child");

    t.root = iodetail::node_from_json(j.at("tree"));
    return out;
}

inline void save_model(const SurvivalTree& tree, const std::string& path,
                       const std::string& time_col = "time",
                       const std::string& status_col = "status") {
    std::ofstream out(path);
    if (!out) throw DataError("model: cannot write '" + path + "'");
    out << model_to_json(tree, time_col, status_col).dump(2) << "\n";
}

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("model: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model: invalid JSON: ") + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model: malformed document: ") + e.what());
    }
}

}  // namespace dipoletree
