#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spillover {

/// Nested key-value configuration: "[section]" headers followed by
/// "key = value" lines; '#' starts a comment. Keys are addressed as
/// "section.key". Typed getters fall back to the supplied default when the
/// key is absent and throw ParseError on malformed values.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& def = "") const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    std::uint64_t get_uint64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    /// Insert only when the key is absent (presets underneath user values).
    void set_default(const std::string& key, const std::string& value);

    /// Stable content hash over sorted key=value pairs, for provenance.
    std::uint64_t content_hash() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace spillover
