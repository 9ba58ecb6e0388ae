#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bnt::io {

// Flat key/value document with dotted keys:
//   # comment
//   order = 4
//   coeff.g11.0.0.1 = -1/2
// Later assignments to the same key override earlier ones.
class KvDoc {
  public:
    static KvDoc parse(const std::string& text);
    static KvDoc parse_file(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& at(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;

    // All keys beginning with `prefix` (the prefix itself excluded), sorted.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  private:
    std::map<std::string, std::string> entries_;
};

}  // namespace bnt::io
