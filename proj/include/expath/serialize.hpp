#pragma once

// nlohmann::json adapters for the configuration types that cross file and C
// API boundaries. Missing keys keep their defaults.

#include <nlohmann/json.hpp>

#include "expath/kge.hpp"

namespace expath {

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// "h", "r", "t" label triple.
nlohmann::json fact_json(const KnowledgeGraph& kg, const Fact& f);
// Resolves {h, r, t} labels; throws LookupError naming the record.
Fact fact_from_json(const KnowledgeGraph& kg, const nlohmann::json& j);

nlohmann::json triple_json(const Triple& t);
Triple triple_from_json(const nlohmann::json& j);  // throws ParseError

// Reads a whole JSON file; IoError / ParseError carry the path.
nlohmann::json read_json_file(const std::filesystem::path& path);
// Writes dump(j), creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Pretty-printed, sorted keys, trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace expath
