#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lpnuq {

/// Flat key = value configuration. Lines starting with '#' (or blank) are
/// ignored; keys are validated against the documented set so typos fail
/// loudly instead of silently using defaults.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    /// True when the key was set (file or override).
    bool has(const std::string& key) const;

    /// CLI override; same key validation as the file path.
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key,
                                  const std::vector<int>& fallback) const;

    /// All documented keys, for diagnostics.
    static const std::vector<std::string>& known_keys();

private:
    std::map<std::string, std::string> values_;
};

} // namespace lpnuq
