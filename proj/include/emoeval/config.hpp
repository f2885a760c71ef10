#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace emoeval {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Plain `key = value` run configuration. Lines starting with '#' and blank
/// lines are ignored; keys are dotted names such as "scorer.backend".
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig config;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string trimmed = trim(line);
            if (trimmed.empty() || trimmed.front() == '#') continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
            config.values_[key] = value;
        }
        return config;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return parse(buffer.str());
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

    [[nodiscard]] std::string get(const std::string& key, const std::string& fallback = {}) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] std::string require(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("config key '" + key + "' is required");
        return it->second;
    }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double value = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing text");
            return value;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not a number: '" + it->second + "'");
        }
    }

    [[nodiscard]] long long get_int(const std::string& key, long long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const long long value = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing text");
            return value;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' is not an integer: '" + it->second + "'");
        }
    }

private:
    static std::string trim(const std::string& text) {
        const std::size_t begin = text.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return {};
        const std::size_t end = text.find_last_not_of(" \t\r\n");
        return text.substr(begin, end - begin + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace emoeval
