#pragma once

// Schema-versioned JSON archive for fitted models and ensembles. Doubles are
// written in shortest round-trip form, so load(save(a)) is bit-exact.

#include <filesystem>
#include <optional>
#include <string_view>

#include "json.hpp"

#include "bopdmd/bop.hpp"

namespace bopdmd {

inline constexpr int kArchiveSchemaVersion = 1;

enum class ModelKind { Exact, Optimized, BopEnsemble };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view text);

struct ModelArchive {
  int schema_version = kArchiveSchemaVersion;
  ModelKind kind = ModelKind::Exact;
  /// Present for Exact and Optimized; for BopEnsemble the mean model.
  DmdModel model;
  /// Present for BopEnsemble only.
  std::optional<EnsembleStatistics> ensemble;
  /// Training metadata: rank, time span, config echo, seed.
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const ModelArchive& archive);
ModelArchive archive_from_json(const nlohmann::json& doc);

void save_archive(const ModelArchive& archive, const std::filesystem::path& path);
ModelArchive load_archive(const std::filesystem::path& path);

/// Complex vectors/matrices as {"rows", "cols", "re", "im"}, column-major.
nlohmann::json complex_to_json(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd complex_from_json(const nlohmann::json& j);

}  // namespace bopdmd
