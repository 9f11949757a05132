#pragma once

// Flat key=value configuration files. Lines starting with '#' are comments.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ppcoad/core.hpp"

namespace ppcoad {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(what + ": expected a number, got '" + s + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(what + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& what) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "true" || l == "1" || l == "yes") return true;
    if (l == "false" || l == "0" || l == "no") return false;
    throw Error(what + ": expected true or false, got '" + s + "'");
}

class Config {
public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& origin = "<config>") {
        Config cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw Error(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config file " + path);
        return parse(in, path);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string str(const std::string& key, const std::string& def) const {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }
    std::string str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw Error("missing config key '" + key + "'");
        return it->second;
    }
    double real(const std::string& key, double def) const { return has(key) ? parse_double(str(key), key) : def; }
    std::uint64_t uint(const std::string& key, std::uint64_t def) const {
        return has(key) ? parse_uint(str(key), key) : def;
    }
    bool flag(const std::string& key, bool def) const { return has(key) ? parse_bool(str(key), key) : def; }
    std::vector<std::string> list(const std::string& key) const {
        if (!has(key) || str(key).empty()) return {};
        return split(str(key), ',');
    }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace ppcoad
