#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace latefusion {

/// Flat key/value configuration read from a small TOML-like text format:
///
///     # comment
///     seed = 7
///     [rf]
///     mtry = [5, 10]      -> key "rf.mtry"
///     [synth.a]
///     planted = ["1:2.0"] -> key "synth.a.planted"
///
/// Values may be bare, double-quoted, or bracketed comma-separated lists.
class Config {
public:
    static Config parse(std::istream& in, const std::string& origin = "<config>");
    /// Throws InputError when the file is absent.
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

    /// Directory that relative paths are resolved against.
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
    void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

    std::string get_string(const std::string& key, const std::string& fallback = "") const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback = {}) const;
    std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const;
    std::filesystem::path get_path(const std::string& key, const std::filesystem::path& fallback = {}) const;

private:
    std::map<std::string, std::string> values_;
    std::filesystem::path base_dir_ = ".";
};

}  // namespace latefusion
