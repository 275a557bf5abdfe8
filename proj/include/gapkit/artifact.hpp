#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gapkit/error.hpp"
#include "gapkit/frame.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/realign.hpp"

namespace gapkit {

inline constexpr int kArtifactSchemaVersion = 1;

struct InputDigest {
  std::string path;
  std::string sha256;
  std::uint64_t rows = 0;
};

struct Provenance {
  std::string tool_version;
  std::vector<InputDigest> inputs;
  std::map<std::string, std::string> parameters;
};

using ArtifactPayload = std::variant<ModalityStats, AlignmentStats, ReferenceFrame, BlockwiseStats>;

struct StatsArtifact {
  int schema_version = kArtifactSchemaVersion;
  ArtifactPayload payload;
  Provenance provenance;
};

/// "modality_stats", "alignment_stats", "reference_frame" or "blockwise_stats".
std::string payload_kind(const ArtifactPayload& payload);

/// JSON text with every double rendered to 17 significant digits.
std::string artifact_to_text(const StatsArtifact& artifact);
/// Throws VersionError for an unknown schema_version and DataError for any
/// malformed or inconsistent field.
StatsArtifact artifact_from_text(const std::string& text);

void save_artifact(const StatsArtifact& artifact, const std::filesystem::path& path);
StatsArtifact load_artifact(const std::filesystem::path& path);

/// load_artifact plus a check that the payload holds T.
template <class T>
T load_payload(const std::filesystem::path& path) {
  StatsArtifact a = load_artifact(path);
  if (auto* p = std::get_if<T>(&a.payload)) return std::move(*p);
  throw DataError(path.string() + ": artifact holds " + payload_kind(a.payload));
}

}  // namespace gapkit
