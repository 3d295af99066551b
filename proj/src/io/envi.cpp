#include "spectrai/io/envi.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spectrai::io {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Index parse_count(const std::string& key, const std::string& value, int line) {
  Index out = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || p != value.data() + value.size())
    throw ParseError("line " + std::to_string(line) + ": '" + key + "' expects an integer, got '" +
                     value + "'");
  return out;
}

std::vector<double> parse_list(const std::string& value, int line) {
  std::string body = trim(value);
  if (body.size() < 2 || body.front() != '{' || body.back() != '}')
    throw ParseError("line " + std::to_string(line) + ": expected a braced list");
  body = body.substr(1, body.size() - 2);
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (t.empty()) continue;
    double v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size())
      throw ParseError("line " + std::to_string(line) + ": bad list entry '" + t + "'");
    out.push_back(v);
  }
  return out;
}

template <typename T>
T byteswap_value(T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

constexpr bool kHostLittle = std::endian::native == std::endian::little;

// Linear file offset (in values) of element (y, x, b) for the interleave.
inline std::size_t file_index(Interleave il, Index y, Index x, Index b, Index h, Index w,
                              Index bands) {
  switch (il) {
    case Interleave::Bsq: return static_cast<std::size_t>((b * h + y) * w + x);
    case Interleave::Bil: return static_cast<std::size_t>((y * bands + b) * w + x);
    case Interleave::Bip: return static_cast<std::size_t>((y * w + x) * bands + b);
  }
  return 0;
}

template <typename T>
T load_value(const std::uint8_t* p, ByteOrder order) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if ((order == ByteOrder::Little) != kHostLittle) v = byteswap_value(v);
  return v;
}

template <typename T>
void store_value(std::uint8_t* p, T v, ByteOrder order) {
  if ((order == ByteOrder::Little) != kHostLittle) v = byteswap_value(v);
  std::memcpy(p, &v, sizeof(T));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(Interleave interleave) {
  switch (interleave) {
    case Interleave::Bsq: return "bsq";
    case Interleave::Bil: return "bil";
    case Interleave::Bip: return "bip";
  }
  return "bsq";
}

Interleave parse_interleave(std::string_view text) {
  const auto t = lower(std::string(text));
  if (t == "bsq") return Interleave::Bsq;
  if (t == "bil") return Interleave::Bil;
  if (t == "bip") return Interleave::Bip;
  throw ParseError("unknown interleave '" + std::string(text) + "'");
}

EnviHeader parse_envi_header(std::string_view text) {
  EnviHeader h;
  std::istringstream in{std::string(text)};
  std::string raw_line;
  int line_no = 0;
  bool saw_magic = false;
  bool have_samples = false, have_lines = false, have_bands = false;

  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = trim(raw_line);
    if (!saw_magic) {
      if (line != "ENVI") throw ParseError("line 1: header must start with 'ENVI'");
      saw_magic = true;
      continue;
    }
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key_raw = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    const int start_line = line_no;
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        if (!std::getline(in, raw_line))
          throw ParseError("line " + std::to_string(start_line) + ": unterminated '{' list");
        ++line_no;
        value += " " + trim(raw_line);
      }
    }
    if (key_raw.empty()) throw ParseError("line " + std::to_string(start_line) + ": empty key");
    const std::string key = lower(key_raw);
    if (key == "samples") {
      h.samples = parse_count(key, value, start_line);
      have_samples = true;
    } else if (key == "lines") {
      h.lines = parse_count(key, value, start_line);
      have_lines = true;
    } else if (key == "bands") {
      h.bands = parse_count(key, value, start_line);
      have_bands = true;
    } else if (key == "data type") {
      const auto dt = parse_count(key, value, start_line);
      if (dt == 4) h.data_type = EnviDataType::Float32;
      else if (dt == 12) h.data_type = EnviDataType::UInt16;
      else
        throw ParseError("line " + std::to_string(start_line) + ": unsupported data type " +
                         value + " (supported: 4, 12)");
    } else if (key == "interleave") {
      try {
        h.interleave = parse_interleave(value);
      } catch (const ParseError&) {
        throw ParseError("line " + std::to_string(start_line) + ": unknown interleave '" + value + "'");
      }
    } else if (key == "byte order") {
      const auto bo = parse_count(key, value, start_line);
      if (bo != 0 && bo != 1)
        throw ParseError("line " + std::to_string(start_line) + ": byte order must be 0 or 1");
      h.byte_order = bo == 0 ? ByteOrder::Little : ByteOrder::Big;
    } else if (key == "wavelength") {
      h.wavelengths = parse_list(value, start_line);
    } else if (key == "description") {
      auto v = value;
      if (v.size() >= 2 && v.front() == '{' && v.back() == '}') v = trim(v.substr(1, v.size() - 2));
      h.description = v;
    } else {
      h.extra.emplace_back(key_raw, value);
    }
  }
  if (!saw_magic) throw ParseError("line 1: header must start with 'ENVI'");
  if (!have_samples || !have_lines || !have_bands)
    throw ParseError("header missing samples/lines/bands");
  if (h.samples < 1 || h.lines < 1 || h.bands < 1)
    throw ParseError("samples, lines and bands must be >= 1");
  if (h.wavelengths && static_cast<Index>(h.wavelengths->size()) != h.bands)
    throw ParseError("wavelength list has " + std::to_string(h.wavelengths->size()) +
                     " entries, expected " + std::to_string(h.bands));
  return h;
}

std::string format_envi_header(const EnviHeader& h) {
  std::ostringstream os;
  os << "ENVI\n";
  if (!h.description.empty()) os << "description = {" << h.description << "}\n";
  os << "samples = " << h.samples << "\n";
  os << "lines = " << h.lines << "\n";
  os << "bands = " << h.bands << "\n";
  os << "header offset = 0\n";
  os << "data type = " << static_cast<int>(h.data_type) << "\n";
  os << "interleave = " << to_string(h.interleave) << "\n";
  os << "byte order = " << (h.byte_order == ByteOrder::Little ? 0 : 1) << "\n";
  if (h.wavelengths) {
    os << "wavelength = {";
    for (std::size_t i = 0; i < h.wavelengths->size(); ++i)
      os << (i ? ", " : "") << format_double((*h.wavelengths)[i]);
    os << "}\n";
  }
  for (const auto& [k, v] : h.extra) {
    if (lower(k) == "header offset") continue;
    os << k << " = " << v << "\n";
  }
  return os.str();
}

Hypercube decode_envi(const EnviHeader& h, std::span<const std::uint8_t> raw) {
  if (raw.size() != h.raw_size())
    throw IoError("raw size mismatch: expected " + std::to_string(h.raw_size()) + " bytes, got " +
                  std::to_string(raw.size()));
  const Index H = h.lines, W = h.samples, B = h.bands;
  Hypercube::Matrix m(H * W, B);
  const std::size_t bpv = h.bytes_per_value();
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x)
      for (Index b = 0; b < B; ++b) {
        const std::uint8_t* p = raw.data() + file_index(h.interleave, y, x, b, H, W, B) * bpv;
        m(y * W + x, b) = h.data_type == EnviDataType::Float32
                              ? load_value<float>(p, h.byte_order)
                              : static_cast<float>(load_value<std::uint16_t>(p, h.byte_order));
      }
  WavelengthAxis axis = h.wavelengths ? WavelengthAxis(*h.wavelengths) : WavelengthAxis::synthetic(B);
  return Hypercube(H, W, std::move(m), std::move(axis), h.description);
}

EnviDocument write_envi(const Hypercube& cube, Interleave interleave, ByteOrder byte_order) {
  EnviHeader h;
  h.samples = cube.width();
  h.lines = cube.height();
  h.bands = cube.bands();
  h.data_type = EnviDataType::Float32;
  h.interleave = interleave;
  h.byte_order = byte_order;
  if (cube.axis().unit() != "index") h.wavelengths = cube.axis().values();
  h.description = cube.name();

  EnviDocument doc;
  doc.header = format_envi_header(h);
  doc.raw.resize(h.raw_size());
  const Index H = h.lines, W = h.samples, B = h.bands;
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x)
      for (Index b = 0; b < B; ++b)
        store_value<float>(doc.raw.data() + file_index(interleave, y, x, b, H, W, B) * 4,
                           cube(y, x, b), byte_order);
  return doc;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_text_file(const fs::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

fs::path raw_path_for(const fs::path& header_path) {
  fs::path stem = header_path;
  stem.replace_extension();
  for (const char* ext : {".raw", ".img"}) {
    fs::path p = stem;
    p += ext;
    if (fs::exists(p)) return p;
  }
  if (stem != header_path && fs::exists(stem)) return stem;
  fs::path p = stem;
  p += ".raw";
  return p;
}

Hypercube read_envi(const fs::path& header_path, const fs::path& raw_path) {
  const EnviHeader h = parse_envi_header(read_text_file(header_path));
  const auto raw = read_file_bytes(raw_path);
  return decode_envi(h, raw);
}

Hypercube read_envi(const fs::path& header_path) {
  return read_envi(header_path, raw_path_for(header_path));
}

void save_envi(const Hypercube& cube, const fs::path& header_path, Interleave interleave,
               ByteOrder byte_order) {
  const auto doc = write_envi(cube, interleave, byte_order);
  write_text_file(header_path, doc.header);
  fs::path raw = header_path;
  raw.replace_extension(".raw");
  write_file_bytes(raw, doc.raw);
}

fs::path class_table_path_for(const fs::path& header_path) {
  fs::path p = header_path;
  p.replace_extension(".classes.json");
  return p;
}

SegmentationMask read_mask(const fs::path& header_path) {
  const EnviHeader h = parse_envi_header(read_text_file(header_path));
  if (h.bands != 1 || h.data_type != EnviDataType::UInt16)
    throw ParseError("mask '" + header_path.string() + "' must be single-band uint16");
  const auto raw = read_file_bytes(raw_path_for(header_path));
  if (raw.size() != h.raw_size())
    throw IoError("raw size mismatch: expected " + std::to_string(h.raw_size()) + " bytes, got " +
                  std::to_string(raw.size()));
  SegmentationMask::Labels labels(h.lines, h.samples);
  for (Index y = 0; y < h.lines; ++y)
    for (Index x = 0; x < h.samples; ++x)
      labels(y, x) = load_value<std::uint16_t>(raw.data() + 2 * static_cast<std::size_t>(y * h.samples + x),
                                               h.byte_order);
  const auto table = nlohmann::json::parse(read_text_file(class_table_path_for(header_path)));
  std::vector<std::string> classes = table.at("classes").get<std::vector<std::string>>();
  return SegmentationMask(std::move(labels), std::move(classes));
}

void save_mask(const SegmentationMask& mask, const fs::path& header_path) {
  EnviHeader h;
  h.samples = mask.width();
  h.lines = mask.height();
  h.bands = 1;
  h.data_type = EnviDataType::UInt16;
  std::vector<std::uint8_t> raw(h.raw_size());
  for (Index y = 0; y < mask.height(); ++y)
    for (Index x = 0; x < mask.width(); ++x)
      store_value<std::uint16_t>(raw.data() + 2 * static_cast<std::size_t>(y * mask.width() + x),
                                 static_cast<std::uint16_t>(mask(y, x)), ByteOrder::Little);
  write_text_file(header_path, format_envi_header(h));
  fs::path rawp = header_path;
  rawp.replace_extension(".raw");
  write_file_bytes(rawp, raw);
  nlohmann::json table{{"classes", mask.class_table()}};
  write_text_file(class_table_path_for(header_path), table.dump(2) + "\n");
}

}  // namespace spectrai::io
