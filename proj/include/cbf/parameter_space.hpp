#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbf/errors.hpp"

namespace cbf {

/// Ordered, uniquely named parameters a hypothesis may refer to. Aliases map
/// alternative spellings (e.g. "y2_with_y1" for "y1_with_y2") onto a parameter.
class ParameterSpace {
 public:
  ParameterSpace() = default;

  explicit ParameterSpace(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw DataError("parameter names must be non-empty");
      if (!lookup_.emplace(names_[i], i).second) throw DataError("duplicate parameter name '" + names_[i] + "'");
    }
  }

  void add_alias(const std::string& alias, std::size_t index) {
    if (index >= names_.size()) throw DataError("alias '" + alias + "' points outside the parameter space");
    auto [it, inserted] = lookup_.emplace(alias, index);
    if (!inserted && it->second != index) throw DataError("alias '" + alias + "' is ambiguous");
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = lookup_.find(std::string(name));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const ParameterSpace& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t, std::less<>> lookup_;
};

}  // namespace cbf
