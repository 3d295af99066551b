#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spectrai/core/types.hpp"

namespace spectrai::io {

enum class Interleave { Bsq, Bil, Bip };
enum class ByteOrder { Little, Big };
enum class EnviDataType { Float32 = 4, UInt16 = 12 };

std::string_view to_string(Interleave interleave);
Interleave parse_interleave(std::string_view text);

/// Subset of the ENVI header honored by this library. Keys outside the
/// subset are kept verbatim in `extra` and written back unchanged.
struct EnviHeader {
  Index samples = 0;  // W
  Index lines = 0;    // H
  Index bands = 0;
  EnviDataType data_type = EnviDataType::Float32;
  Interleave interleave = Interleave::Bsq;
  ByteOrder byte_order = ByteOrder::Little;
  std::optional<std::vector<double>> wavelengths;
  std::string description;
  std::vector<std::pair<std::string, std::string>> extra;

  std::size_t bytes_per_value() const { return data_type == EnviDataType::Float32 ? 4 : 2; }
  std::size_t raw_size() const {
    return static_cast<std::size_t>(samples) * static_cast<std::size_t>(lines) *
           static_cast<std::size_t>(bands) * bytes_per_value();
  }
};

EnviHeader parse_envi_header(std::string_view text);
std::string format_envi_header(const EnviHeader& header);

/// Header text plus raw bytes, as produced by write_envi.
struct EnviDocument {
  std::string header;
  std::vector<std::uint8_t> raw;
};

/// Decodes raw bytes into canonical (y, x, band) order.
Hypercube decode_envi(const EnviHeader& header, std::span<const std::uint8_t> raw);

EnviDocument write_envi(const Hypercube& cube, Interleave interleave = Interleave::Bsq,
                        ByteOrder byte_order = ByteOrder::Little);

Hypercube read_envi(const std::filesystem::path& header_path,
                    const std::filesystem::path& raw_path);
/// Reads `X.hdr` with its raw companion located by `raw_path_for`.
Hypercube read_envi(const std::filesystem::path& header_path);

void save_envi(const Hypercube& cube, const std::filesystem::path& header_path,
               Interleave interleave = Interleave::Bsq, ByteOrder byte_order = ByteOrder::Little);

/// Raw data file for a header: stem + ".raw", else stem + ".img", else the
/// bare stem. Returns the ".raw" candidate when none exist.
std::filesystem::path raw_path_for(const std::filesystem::path& header_path);

// Masks: single-band uint16 ENVI plus `<stem>.classes.json`.
std::filesystem::path class_table_path_for(const std::filesystem::path& header_path);
SegmentationMask read_mask(const std::filesystem::path& header_path);
void save_mask(const SegmentationMask& mask, const std::filesystem::path& header_path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace spectrai::io
