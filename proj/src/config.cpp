#include "latefusion/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>

#include "latefusion/error.hpp"

namespace latefusion {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s)
{
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

// Drops a trailing '#' comment that is not inside quotes.
std::string strip_comment(const std::string& line)
{
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& origin)
{
    Config cfg;
    std::string line, section;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string text = trim(strip_comment(line));
        if (text.empty()) continue;
        if (text.front() == '[' && text.back() == ']' && text.find('=') == std::string::npos) {
            section = trim(std::string_view(text).substr(1, text.size() - 2));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
        }
        std::string key = trim(std::string_view(text).substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        cfg.values_[key] = trim(std::string_view(text).substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    Config cfg = parse(in, path.string());
    cfg.base_dir_ = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = trim(value); }

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    auto it = values_.find(key);
    return it == values_.end() ? fallback : unquote(it->second);
}

double Config::get_double(const std::string& key, double fallback) const
{
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("'" + key + "' is not a number: " + s);
    }
    return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const
{
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("'" + key + "' is not a non-negative integer: " + s);
    }
    return v;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const
{
    return static_cast<std::size_t>(get_u64(key, fallback));
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("'" + key + "' is not a boolean: " + s);
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const
{
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string s = it->second;
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::vector<std::string> out;
    std::string item;
    bool quoted = false;
    for (char c : s) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            out.push_back(unquote(trim(item)));
            item.clear();
        } else {
            item += c;
        }
    }
    if (!trim(item).empty() || !out.empty()) out.push_back(unquote(trim(item)));
    return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const
{
    if (!has(key)) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : get_list(key)) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw ConfigError("'" + key + "' holds a non-integer entry: " + item);
        }
        out.push_back(v);
    }
    return out;
}

std::filesystem::path Config::get_path(const std::string& key, const std::filesystem::path& fallback) const
{
    std::filesystem::path p = has(key) ? std::filesystem::path(get_string(key)) : fallback;
    if (p.empty() || p.is_absolute()) return p;
    return base_dir_ / p;
}

}  // namespace latefusion
