#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ethcast {

// What a parameter does in the network; freeze policies select by role.
enum class ParamRole { InputEmbed, Positional, Rotary, Norm, Attention, Ffn, Head, Recurrent, Dense };

const char* param_role_name(ParamRole role);

struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;
    ParamRole role = ParamRole::Dense;
    std::vector<double> value;
    std::vector<double> grad;  // sized only while trainable
    bool trainable = true;

    std::size_t size() const { return value.size(); }
};

// Values of a set of parameters, keyed by name.
using ParamSnapshot = std::map<std::string, std::vector<double>>;

// Named parameter arrays with a trainable mask. Element addresses are stable
// for the lifetime of the store, so layers hold Parameter pointers into it.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;
    ParameterStore(ParameterStore&&) = default;
    ParameterStore& operator=(ParameterStore&&) = default;

    Parameter& add(std::string name, std::vector<std::size_t> shape, ParamRole role);

    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;
    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    std::size_t count() const { return entries_.size(); }

    std::vector<std::string> names() const;
    std::vector<std::string> trainable_names() const;
    std::size_t element_count() const;
    std::size_t trainable_element_count() const;

    void set_trainable(Parameter& p, bool trainable);
    void set_all_trainable(bool trainable);
    void zero_grad();

    ParamSnapshot snapshot(bool trainable_only = false) const;
    void restore(const ParamSnapshot& snapshot);

private:
    std::deque<Parameter> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ethcast
