#pragma once

#include "smm/ad.hpp"
#include "smm/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace smm {

// Named parameter set with a stable registration order. The order fixes
// both the checkpoint layout and the optimizer's update sequence, which
// keeps training runs reproducible.
class ParamStore {
public:
    Mat& add(const std::string& name, Mat init);
    Mat& at(const std::string& name);
    const Mat& at(const std::string& name) const;
    bool contains(const std::string& name) const { return values_.count(name) > 0; }

    const std::vector<std::string>& order() const { return order_; }
    std::size_t total_size() const;

    void save(const std::string& path) const;
    static ParamStore load(const std::string& path);

private:
    std::vector<std::string> order_;
    std::map<std::string, Mat> values_;
};

// Tape-local handles for every parameter, created once per forward build.
class ParamBinding {
public:
    ParamBinding(ad::Tape& tape, const ParamStore& store);
    ad::Var operator[](const std::string& name) const;

    const std::vector<std::string>& order() const { return order_; }

private:
    std::map<std::string, ad::Var> vars_;
    std::vector<std::string> order_;
};

// fan-in scaled uniform in [-s, s], s = 1/sqrt(fan_in)
Mat init_fanin(int rows, int cols, int fan_in, Rng& rng);

} // namespace smm
