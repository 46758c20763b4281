#pragma once

#include "imface/model/model.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace imface::cli {

/// {"exp": [...], "id": [...], "detail": [...]}; sizes checked against `c`.
model::LatentCodes read_codes(const std::filesystem::path& path, const model::ModelConfig& c);
nlohmann::json codes_json(const model::LatentCodes& codes);
void write_codes(const std::filesystem::path& path, const model::LatentCodes& codes, nlohmann::json extra = {});

/// Training embeddings stored next to a model (embeddings.bin).
diff::NamedTensors read_embeddings(const std::filesystem::path& model_dir);
/// Codes of one training scan, keyed "identity/expression".
model::LatentCodes scan_codes(const diff::NamedTensors& emb, const std::string& scan_key);
/// Mean of every stored code of each kind.
model::LatentCodes mean_codes(const diff::NamedTensors& emb, const model::ModelConfig& c);

/// Resolved inputs of a run, saved as <dir>/run/<command>.json.
void write_snapshot(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& resolved);

/// Creates the parent directory of an output file.
void ensure_parent(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace imface::cli
