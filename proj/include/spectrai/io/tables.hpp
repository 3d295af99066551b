#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spectrai/core/types.hpp"

namespace spectrai::io {

/// Delimited spectra table: comma separated, '.' decimal point, no quoting.
/// First row holds the wavelengths; an optional trailing "label" column
/// carries class names.
struct SpectraTable {
  WavelengthAxis axis;
  std::vector<Spectrum> spectra;
  std::optional<std::vector<std::string>> labels;
};

SpectraTable parse_spectra_table(std::string_view text);
std::string format_spectra_table(const SpectraTable& table);

SpectraTable read_spectra_table(const std::filesystem::path& path);
void write_spectra_table(const SpectraTable& table, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

enum class Split { Train, Val, Test, Unassigned };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestRecord {
  std::string id;
  std::string input_path;
  std::optional<std::string> target_path;
  std::optional<std::string> label;
  PairKind pair_kind = PairKind::SpectrumToSpectrum;
  Split split = Split::Unassigned;
  std::optional<std::string> group_key;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  /// Directory relative paths resolve against; empty for in-memory manifests.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
};

DatasetManifest parse_manifest(std::string_view json_text);
/// Canonical JSON: sorted keys, two-space indent, trailing newline.
std::string format_manifest(const DatasetManifest& manifest);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace spectrai::io
