#pragma once

#include "xferlos/core/common.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace xferlos {

/// Lowercase, trim, and collapse internal whitespace runs to one space.
inline std::string canonical_feature_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char ch : raw) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

inline constexpr std::string_view kIndicatorSuffix = "_indicator";
inline constexpr std::string_view kHourFeature = "hour";

/// Ordered, uniquely named model-input axis of one domain. Order is kernel row order.
class FeatureSpace {
 public:
  FeatureSpace() = default;

  FeatureSpace(std::vector<std::string> names, std::string domain = {}) : domain_(std::move(domain)) {
    names_.reserve(names.size());
    for (auto& n : names) names_.push_back(canonical_feature_name(n));
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], i).second)
        throw ValidationError("duplicate feature name '" + names_[i] + "' in feature space" +
                              (domain_.empty() ? std::string() : " of domain '" + domain_ + "'"));
    }
  }

  /// Model-input space for raw inputs: [inputs..., inputs_indicator..., hour].
  static FeatureSpace augmented(const std::vector<std::string>& inputs, std::string domain = {}) {
    std::vector<std::string> names;
    names.reserve(inputs.size() * 2 + 1);
    for (const auto& n : inputs) names.push_back(canonical_feature_name(n));
    for (const auto& n : inputs) names.push_back(canonical_feature_name(n) + std::string(kIndicatorSuffix));
    names.emplace_back(kHourFeature);
    return FeatureSpace(std::move(names), std::move(domain));
  }

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::string& domain() const noexcept { return domain_; }
  void set_domain(std::string d) { domain_ = std::move(d); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = index_.find(canonical_feature_name(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  friend bool operator==(const FeatureSpace& a, const FeatureSpace& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string domain_;
};

}  // namespace xferlos
