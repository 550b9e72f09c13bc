// Flat key=value run configuration: one pair per line, '#' comments, no
// sections. Commands declare their known keys with defaults; unknown keys in
// a config file are rejected, and the effective configuration can be echoed
// back out as a valid config file.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mgdun {

class RunConfig {
public:
    // Declare a key with its default and a one-line help string.
    void declare(const std::string& key, const std::string& def,
                 const std::string& help);

    // Parse and overlay a config file / string; rejects undeclared keys.
    void load_file(const std::string& path);
    void load_string(const std::string& text, const std::string& origin = "<string>");
    // Programmatic override (key must be declared).
    void set(const std::string& key, const std::string& value);

    std::string get_str(const std::string& key) const;
    int get_int(const std::string& key) const;
    float get_float(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;  // comma-separated

    // Effective configuration, every declared key, stable order.
    std::string echo() const;
    std::string help() const;

private:
    struct Entry {
        std::string value;
        std::string help;
    };
    const Entry& entry(const std::string& key) const;

    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

}  // namespace mgdun
