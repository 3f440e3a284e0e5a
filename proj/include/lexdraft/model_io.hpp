#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "lexdraft/langmodel.hpp"

namespace lexdraft {

// "LEXLM1" model files: a text manifest (key=value lines and the embedded
// LEXVOC1 vocabulary), a "payload" line, then little-endian IEEE-754 doubles.
void save_model(const LanguageModel& model, const std::filesystem::path& path);
std::string serialize_model(const LanguageModel& model);

std::unique_ptr<LanguageModel> load_model(const std::filesystem::path& path);
std::unique_ptr<LanguageModel> parse_model(std::string_view bytes);

struct ModelManifest {
  std::map<std::string, std::string> fields;
  size_t vocab_size = 0;
};
ModelManifest read_manifest(std::string_view bytes);

// FNV-1a of the file bytes, 16 hex digits.
std::string model_file_hash(const std::filesystem::path& path);

}  // namespace lexdraft
