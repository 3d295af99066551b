#include "spectrai/io/tables.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include "spectrai/io/envi.hpp"

namespace spectrai::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view s, double& out) {
  s = strip(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

SpectraTable parse_spectra_table(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!strip(line).empty()) lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  if (lines.empty()) throw ParseError("spectra table is empty");

  auto header = split_commas(lines.front());
  bool has_label = !header.empty() && strip(header.back()) == "label";
  if (has_label) header.pop_back();
  std::vector<double> wl;
  for (std::size_t c = 0; c < header.size(); ++c) {
    double v;
    if (!parse_number(header[c], v))
      throw ParseError("row 1, column " + std::to_string(c + 1) + ": non-numeric wavelength '" +
                       std::string(strip(header[c])) + "'");
    wl.push_back(v);
  }
  SpectraTable table;
  table.axis = WavelengthAxis(std::move(wl));
  const std::size_t n = header.size();
  if (has_label) table.labels.emplace();

  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto cells = split_commas(lines[r]);
    const std::size_t expected = n + (has_label ? 1 : 0);
    if (cells.size() != expected)
      throw ParseError("row " + std::to_string(r + 1) + ": " + std::to_string(cells.size()) +
                       " values, expected " + std::to_string(expected));
    Spectrum::Vector v(static_cast<Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
      double d;
      if (!parse_number(cells[c], d))
        throw ParseError("row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                         ": non-numeric cell '" + std::string(strip(cells[c])) + "'");
      v[static_cast<Index>(c)] = static_cast<float>(d);
    }
    table.spectra.emplace_back(std::move(v), table.axis);
    if (has_label) table.labels->emplace_back(strip(cells.back()));
  }
  return table;
}

std::string format_spectra_table(const SpectraTable& table) {
  std::string out;
  const auto& ax = table.axis.values();
  for (std::size_t i = 0; i < ax.size(); ++i) {
    if (i) out += ',';
    out += format_value(ax[i]);
  }
  if (table.labels) out += ",label";
  out += '\n';
  for (std::size_t r = 0; r < table.spectra.size(); ++r) {
    const auto& s = table.spectra[r];
    if (s.size() != table.axis.size()) throw ShapeError("spectrum length differs from table axis");
    for (Index i = 0; i < s.size(); ++i) {
      if (i) out += ',';
      out += format_value(s[i]);
    }
    if (table.labels) out += "," + table.labels->at(r);
    out += '\n';
  }
  return out;
}

SpectraTable read_spectra_table(const fs::path& path) { return parse_spectra_table(read_text_file(path)); }

void write_spectra_table(const SpectraTable& table, const fs::path& path) {
  write_text_file(path, format_spectra_table(table));
}

// ---------------------------------------------------------------------------

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  if (text == "unassigned") return Split::Unassigned;
  throw ParseError("schema error: unknown split '" + std::string(text) + "'");
}

fs::path DatasetManifest::resolve(const std::string& path) const {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

DatasetManifest parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("schema error: manifest must be an object");
  for (const auto& [k, _] : doc.items())
    if (k != "version" && k != "records") throw ParseError("schema error: unknown field '" + k + "'");
  if (!doc.contains("version") || doc["version"] != 1)
    throw ParseError("schema error: version must be 1");
  if (!doc.contains("records") || !doc["records"].is_array())
    throw ParseError("schema error: records must be an array");

  static const std::set<std::string> known{"id", "input_path", "target_path", "label",
                                           "pair_kind", "split", "group_key"};
  DatasetManifest m;
  std::set<std::string> ids;
  std::size_t i = 0;
  for (const auto& r : doc["records"]) {
    const std::string where = "record " + std::to_string(i++);
    if (!r.is_object()) throw ParseError("schema error: " + where + " must be an object");
    for (const auto& [k, _] : r.items())
      if (!known.count(k)) throw ParseError("schema error: " + where + ": unknown field '" + k + "'");
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
      if (!r.contains(key)) {
        if (required) throw ParseError("schema error: " + where + ": missing '" + key + "'");
        return std::nullopt;
      }
      if (!r[key].is_string()) throw ParseError("schema error: " + where + ": '" + key + "' must be a string");
      return r[key].get<std::string>();
    };
    ManifestRecord rec;
    rec.id = *str("id", true);
    rec.input_path = *str("input_path", true);
    rec.target_path = str("target_path", false);
    rec.label = str("label", false);
    try {
      rec.pair_kind = parse_pair_kind(*str("pair_kind", true));
    } catch (const ParseError& e) {
      throw ParseError("schema error: " + where + ": " + e.what());
    }
    rec.split = parse_split(str("split", false).value_or("unassigned"));
    rec.group_key = str("group_key", false);
    if (rec.id.empty() || rec.input_path.empty())
      throw ParseError("schema error: " + where + ": id and input_path must be non-empty");
    if (rec.target_path && rec.target_path->empty())
      throw ParseError("schema error: " + where + ": target_path must be non-empty");
    if (!ids.insert(rec.id).second) throw ParseError("duplicate id " + rec.id);
    m.records.push_back(std::move(rec));
  }
  return m;
}

std::string format_manifest(const DatasetManifest& m) {
  json records = json::array();
  for (const auto& r : m.records) {
    json j{{"id", r.id},
           {"input_path", r.input_path},
           {"pair_kind", std::string(to_string(r.pair_kind))},
           {"split", std::string(to_string(r.split))}};
    if (r.target_path) j["target_path"] = *r.target_path;
    if (r.label) j["label"] = *r.label;
    if (r.group_key) j["group_key"] = *r.group_key;
    records.push_back(std::move(j));
  }
  json doc{{"version", 1}, {"records", std::move(records)}};
  return doc.dump(2) + "\n";
}

DatasetManifest read_manifest(const fs::path& path) {
  auto m = parse_manifest(read_text_file(path));
  m.base_dir = path.parent_path();
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_text_file(path, format_manifest(manifest));
}

}  // namespace spectrai::io
