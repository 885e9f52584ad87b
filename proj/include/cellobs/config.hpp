#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cellobs/errors.hpp"

namespace cellobs {

// Flat `key = value` configuration file: one pair per line, `#` starts a
// comment, blank lines ignored. Keys are dotted lowercase identifiers.
// Unknown keys are rejected at validation time (typo safety); every getter
// names the offending key in its error message.
struct Config {
    std::map<std::string, std::string> kv;
    std::string path;          // file the config was loaded from ("" if none)
    std::string dir;           // directory of `path`; base for relative paths
    std::uint64_t hash = 0;    // FNV-1a over raw bytes + overrides, in order

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    // Typed getters; the *_or forms fall back to a default when the key is
    // absent. Malformed values throw ConfigError naming the key.
    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double dflt) const;
    long get_long_or(const std::string& key, long dflt) const;
    bool get_bool_or(const std::string& key, bool dflt) const;
    std::vector<double> get_list_or(const std::string& key,
                                    const std::vector<double>& dflt) const;

    // Resolves a path value relative to the config file's directory.
    std::string resolve_path(const std::string& value) const;
};

// Throws ConfigError (unreadable file) or ParseError (malformed line, with
// line number).
Config load_config(const std::string& path);

// Applies a `key=value` override (as given on the command line) and folds it
// into the hash. Throws ConfigError when the argument has no '='.
void apply_override(Config& cfg, const std::string& key_equals_value);

// Rejects keys outside the known schema; throws ConfigError naming the key.
void reject_unknown_keys(const Config& cfg);

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace cellobs
