#include "smm/params.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

using nlohmann::json;

namespace smm {

Mat& ParamStore::add(const std::string& name, Mat init) {
    auto [it, inserted] = values_.try_emplace(name, std::move(init));
    if (!inserted) throw Error("duplicate parameter: " + name);
    order_.push_back(name);
    return it->second;
}

Mat& ParamStore::at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("unknown parameter: " + name);
    return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& [k, v] : values_) n += static_cast<std::size_t>(v.size());
    return n;
}

void ParamStore::save(const std::string& path) const {
    json j;
    j["version"] = 1;
    json params = json::object();
    for (const std::string& name : order_) {
        const Mat& m = values_.at(name);
        std::vector<float> data(static_cast<std::size_t>(m.size()));
        // column-major, matching Eigen storage
        for (Eigen::Index i = 0; i < m.size(); ++i)
            data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
        params[name] = {{"shape", {m.rows(), m.cols()}}, {"data", data}};
    }
    j["params"] = std::move(params);
    j["order"] = order_;
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out << j.dump();
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("checkpoint parse failure: " + std::string(e.what()));
    }
    if (!j.contains("version")) throw Error("checkpoint missing version field");
    if (j.at("version").get<int>() != 1)
        throw Error("unsupported checkpoint version");
    ParamStore store;
    for (const auto& name : j.at("order").get<std::vector<std::string>>()) {
        const json& p = j.at("params").at(name);
        auto shape = p.at("shape");
        Eigen::Index r = shape.at(0).get<Eigen::Index>();
        Eigen::Index c = shape.at(1).get<Eigen::Index>();
        auto data = p.at("data").get<std::vector<float>>();
        if (static_cast<Eigen::Index>(data.size()) != r * c)
            throw Error("checkpoint shape mismatch for " + name);
        Mat m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = static_cast<double>(data[static_cast<std::size_t>(i)]);
        store.add(name, std::move(m));
    }
    return store;
}

ParamBinding::ParamBinding(ad::Tape& tape, const ParamStore& store) {
    for (const std::string& name : store.order()) {
        vars_.emplace(name, tape.input(store.at(name)));
        order_.push_back(name);
    }
}

ad::Var ParamBinding::operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw Error("unbound parameter: " + name);
    return it->second;
}

Mat init_fanin(int rows, int cols, int fan_in, Rng& rng) {
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m(i, j) = rng.uniform(-s, s);
    return m;
}

} // namespace smm
