#include "mgdun/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mgdun {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::declare(const std::string& key, const std::string& def,
                        const std::string& help) {
    if (entries_.count(key))
        throw std::logic_error("RunConfig: key '" + key + "' declared twice");
    entries_[key] = Entry{def, help};
    order_.push_back(key);
}

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
        throw std::invalid_argument("RunConfig: unknown key '" + key + "'");
    return it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = entries_.find(key);
    if (it == entries_.end())
        throw std::invalid_argument("RunConfig: unknown key '" + key + "'");
    it->second.value = value;
}

void RunConfig::load_string(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!entries_.count(key))
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
        entries_[key].value = value;
    }
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("RunConfig: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    load_string(ss.str(), path);
}

std::string RunConfig::get_str(const std::string& key) const { return entry(key).value; }

int RunConfig::get_int(const std::string& key) const {
    try {
        return std::stoi(entry(key).value);
    } catch (const std::exception&) {
        throw std::invalid_argument("RunConfig: key '" + key + "' = '" +
                                    entry(key).value + "' is not an integer");
    }
}

float RunConfig::get_float(const std::string& key) const {
    try {
        return std::stof(entry(key).value);
    } catch (const std::exception&) {
        throw std::invalid_argument("RunConfig: key '" + key + "' = '" +
                                    entry(key).value + "' is not a number");
    }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    try {
        return std::stoull(entry(key).value);
    } catch (const std::exception&) {
        throw std::invalid_argument("RunConfig: key '" + key + "' = '" +
                                    entry(key).value + "' is not a u64");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = entry(key).value;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("RunConfig: key '" + key + "' = '" + v +
                                "' is not a boolean");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    const std::string& v = entry(key).value;
    std::vector<int> out;
    if (v.empty()) return out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        try {
            out.push_back(std::stoi(trim(item)));
        } catch (const std::exception&) {
            throw std::invalid_argument("RunConfig: key '" + key + "' = '" + v +
                                        "' is not a comma-separated int list");
        }
    }
    return out;
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    for (const auto& key : order_) {
        const Entry& e = entries_.at(key);
        os << key << " = " << e.value << "\n";
    }
    return os.str();
}

std::string RunConfig::help() const {
    std::ostringstream os;
    for (const auto& key : order_) {
        const Entry& e = entries_.at(key);
        os << "  " << key << " (default: " << (e.value.empty() ? "<empty>" : e.value)
           << ") - " << e.help << "\n";
    }
    return os.str();
}

}  // namespace mgdun
