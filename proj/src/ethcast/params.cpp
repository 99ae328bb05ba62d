#include "ethcast/params.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "ethcast/common.hpp"

namespace ethcast {

const char* param_role_name(ParamRole role) {
    switch (role) {
        case ParamRole::InputEmbed: return "input_embed";
        case ParamRole::Positional: return "positional";
        case ParamRole::Rotary: return "rotary";
        case ParamRole::Norm: return "norm";
        case ParamRole::Attention: return "attention";
        case ParamRole::Ffn: return "ffn";
        case ParamRole::Head: return "head";
        case ParamRole::Recurrent: return "recurrent";
        case ParamRole::Dense: return "dense";
    }
    return "dense";
}

Parameter& ParameterStore::add(std::string name, std::vector<std::size_t> shape, ParamRole role) {
    if (index_.count(name)) fail(ErrorKind::Config, "duplicate parameter name " + name);
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    Parameter& p = entries_.emplace_back();
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.role = role;
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    p.trainable = true;
    index_.emplace(p.name, entries_.size() - 1);
    return p;
}

Parameter* ParameterStore::find(std::string_view name) {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const Parameter* ParameterStore::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

Parameter& ParameterStore::at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    fail(ErrorKind::Config, "unknown parameter " + std::string(name));
}

const Parameter& ParameterStore::at(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    fail(ErrorKind::Config, "unknown parameter " + std::string(name));
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    for (const auto& p : entries_) out.push_back(p.name);
    return out;
}

std::vector<std::string> ParameterStore::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& p : entries_) {
        if (p.trainable) out.push_back(p.name);
    }
    return out;
}

std::size_t ParameterStore::element_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_) n += p.size();
    return n;
}

std::size_t ParameterStore::trainable_element_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_) {
        if (p.trainable) n += p.size();
    }
    return n;
}

void ParameterStore::set_trainable(Parameter& p, bool trainable) {
    p.trainable = trainable;
    if (trainable) {
        p.grad.assign(p.size(), 0.0);
    } else {
        p.grad.clear();
        p.grad.shrink_to_fit();
    }
}

void ParameterStore::set_all_trainable(bool trainable) {
    for (auto& p : entries_) set_trainable(p, trainable);
}

void ParameterStore::zero_grad() {
    for (auto& p : entries_) {
        if (p.trainable) std::fill(p.grad.begin(), p.grad.end(), 0.0);
    }
}

ParamSnapshot ParameterStore::snapshot(bool trainable_only) const {
    ParamSnapshot snap;
    for (const auto& p : entries_) {
        if (!trainable_only || p.trainable) snap.emplace(p.name, p.value);
    }
    return snap;
}

void ParameterStore::restore(const ParamSnapshot& snapshot) {
    for (const auto& [name, values] : snapshot) {
        Parameter& p = at(name);
        if (values.size() != p.size()) fail(ErrorKind::Shape, "snapshot size mismatch for " + name);
        p.value = values;
    }
}

}  // namespace ethcast
