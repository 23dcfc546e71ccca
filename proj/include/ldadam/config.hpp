#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ldadam {

// Flat `key = value` configuration text: one assignment per line, `#` starts a
// comment, keys use dotted sections (problem.kind, optimizer.beta1). Every key
// must be consumed by the reader; unknown keys are hard errors.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    std::uint64_t get_uint(const std::string& key);
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);
    // comma-separated list
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback);

    // Throws listing every key that was never read.
    void require_all_consumed() const;

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

} // namespace ldadam
