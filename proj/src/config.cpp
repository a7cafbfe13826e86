#include "cria/config.hpp"

#include <array>
#include <fstream>

namespace cria {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void Config::define(const std::string& key, const std::string& default_value, const std::string& help) {
    if (schema_.count(key)) throw ConfigError("config: key '" + key + "' defined twice");
    schema_[key] = Entry{default_value, help, next_order_++};
}

void Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        if (!schema_.count(key))
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        file_values_[key] = trim(t.substr(eq + 1));
    }
}

void Config::set_flag(const std::string& key, const std::string& value) {
    if (!schema_.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    flag_values_[key] = value;
}

bool Config::overridden(const std::string& key) const {
    return flag_values_.count(key) != 0 || file_values_.count(key) != 0;
}

std::string Config::get(const std::string& key) const {
    auto s = schema_.find(key);
    if (s == schema_.end()) throw ConfigError("config: unknown key '" + key + "'");
    if (auto it = flag_values_.find(key); it != flag_values_.end()) return it->second;
    if (auto it = file_values_.find(key); it != file_values_.end()) return it->second;
    return s->second.default_value;
}

long long Config::get_int(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const long long out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const unsigned long long out = std::stoull(v, &used);
        if (used != v.size() || v.find('-') != std::string::npos) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

double Config::get_double(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::array<std::string, 3>> Config::describe() const {
    std::vector<std::array<std::string, 3>> out(schema_.size());
    for (const auto& [key, entry] : schema_)
        out[entry.order] = {key, entry.default_value, entry.help};
    return out;
}

}  // namespace cria
