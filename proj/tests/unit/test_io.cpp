#include "doctest.h"

#include <cstring>

#include "spectrai/io/envi.hpp"
#include "spectrai/io/tables.hpp"
#include "spectrai/pipeline/rng.hpp"
#include "../support/fixtures.hpp"

using namespace spectrai;
using namespace spectrai::io;
using spectrai::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Hypercube random_cube(Index h, Index w, Index b, Rng& rng, std::string name = "") {
  Hypercube::Matrix m(h * w, b);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal() * 100.0);
  return Hypercube(h, w, std::move(m), WavelengthAxis::linear(400, 10, b), std::move(name));
}

bool bit_equal(const Hypercube& a, const Hypercube& b) {
  return a.height() == b.height() && a.width() == b.width() && a.bands() == b.bands() &&
         std::memcmp(a.pixels().data(), b.pixels().data(), sizeof(float) * a.pixels().size()) == 0;
}

const char* kHeader =
    "ENVI\n"
    "description = {test}\n"
    "samples = 3\n"
    "lines = 2\n"
    "bands = 4\n"
    "header offset = 0\n"
    "data type = 4\n"
    "interleave = bil\n"
    "byte order = 0\n"
    "wavelength = {400, 410, 420, 430}\n";

}  // namespace

TEST_CASE("ENVI header parsing") {
  const auto h = parse_envi_header(kHeader);
  CHECK(h.samples == 3);
  CHECK(h.lines == 2);
  CHECK(h.bands == 4);
  CHECK(h.interleave == Interleave::Bil);
  CHECK(h.byte_order == ByteOrder::Little);
  REQUIRE(h.wavelengths);
  CHECK(h.wavelengths->size() == 4);
  CHECK(h.raw_size() == 3 * 2 * 4 * 4);

  CHECK_THROWS_AS(parse_envi_header("samples = 3\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse_envi_header("ENVI\nsamples = 3\nthis line is wrong\n"), doctest::Contains("line 3"),
                       ParseError);
  CHECK_THROWS_AS(parse_envi_header("ENVI\nsamples = 3\nlines = 2\nbands = 2\ndata type = 4\nwavelength = {1}\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_envi_header("ENVI\nsamples = 0\nlines = 2\nbands = 2\ndata type = 4\n"), ParseError);
  // keys are case-insensitive; unknown keys survive a write
  const auto u = parse_envi_header("ENVI\nSAMPLES = 1\nLines = 1\nbands = 1\ndata type = 4\nsensor type = AVIRIS\n");
  CHECK(u.samples == 1);
  CHECK(format_envi_header(u).find("sensor type = AVIRIS") != std::string::npos);
}

TEST_CASE("ENVI decode matches interleave layouts") {
  // 1x2 cube, 2 bands: pixel (0,0) = [1,3], pixel (0,1) = [2,4]
  auto bytes = [](std::vector<float> v) {
    std::vector<std::uint8_t> b(v.size() * 4);
    std::memcpy(b.data(), v.data(), b.size());
    return b;
  };
  EnviHeader h;
  h.samples = 2;
  h.lines = 1;
  h.bands = 2;
  h.interleave = Interleave::Bsq;
  auto c = decode_envi(h, bytes({1, 2, 3, 4}));
  CHECK(c(0, 0, 0) == 1);
  CHECK(c(0, 1, 0) == 2);
  CHECK(c(0, 0, 1) == 3);
  h.interleave = Interleave::Bip;
  c = decode_envi(h, bytes({1, 3, 2, 4}));
  CHECK(c(0, 1, 0) == 2);
  CHECK(c(0, 0, 1) == 3);
  h.interleave = Interleave::Bil;
  c = decode_envi(h, bytes({1, 2, 3, 4}));
  CHECK(c(0, 1, 0) == 2);
  CHECK(c(0, 1, 1) == 4);
  CHECK(c.axis().unit() == "index");
}

TEST_CASE("ENVI round trips") {
  Rng rng(9);
  Hypercube::Matrix one(1, 1);
  one << 0.125f;
  const Hypercube tiny(1, 1, one, WavelengthAxis({500.0}));
  for (auto il : {Interleave::Bsq, Interleave::Bil, Interleave::Bip})
    for (auto bo : {ByteOrder::Little, ByteOrder::Big}) {
      const auto doc = write_envi(tiny, il, bo);
      CHECK(bit_equal(decode_envi(parse_envi_header(doc.header), doc.raw), tiny));
      const auto cube = random_cube(2, 3, 4, rng);
      const auto d2 = write_envi(cube, il, bo);
      const auto back = decode_envi(parse_envi_header(d2.header), d2.raw);
      CHECK(bit_equal(back, cube));
      CHECK(back.axis() == cube.axis());
    }
  // big-endian bytes really are swapped
  const auto little = write_envi(tiny, Interleave::Bsq, ByteOrder::Little);
  const auto big = write_envi(tiny, Interleave::Bsq, ByteOrder::Big);
  CHECK(little.raw[0] == big.raw[3]);
  CHECK(write_envi(tiny).header.find("description") == std::string::npos);
  CHECK(write_envi(tiny.with_name("scene")).header.find("description = {scene}") != std::string::npos);
}

TEST_CASE("ENVI files on disk") {
  TempDir dir("envi");
  Rng rng(2);
  const auto cube = random_cube(3, 5, 2, rng, "c");
  save_envi(cube, dir / "c.hdr", Interleave::Bip, ByteOrder::Big);
  CHECK(fs::exists(dir / "c.raw"));
  CHECK(bit_equal(read_envi(dir / "c.hdr"), cube));

  auto raw = read_file_bytes(dir / "c.raw");
  raw.pop_back();
  write_file_bytes(dir / "c.raw", raw);
  CHECK_THROWS_WITH_AS(read_envi(dir / "c.hdr"), doctest::Contains("raw size mismatch"), IoError);
  CHECK_THROWS_WITH(read_envi(dir / "c.hdr"), doctest::Contains("120"));
  CHECK_THROWS_WITH(read_envi(dir / "c.hdr"), doctest::Contains("119"));
  CHECK_THROWS_AS(read_envi(dir / "missing.hdr"), IoError);

  SegmentationMask::Labels l(2, 3);
  l << 0, 1, 2, 5, 4, 3;
  const SegmentationMask mask(l, aerorit_classes());
  save_mask(mask, dir / "m.hdr");
  CHECK(read_mask(dir / "m.hdr") == mask);
  CHECK(fs::exists(class_table_path_for(dir / "m.hdr")));
}

TEST_CASE("spectra tables") {
  auto t = parse_spectra_table("500,510,520\n1,2,3\n");
  CHECK(t.axis.values() == std::vector<double>{500, 510, 520});
  REQUIRE(t.spectra.size() == 1);
  CHECK(t.spectra[0].values() == Eigen::Vector3f(1, 2, 3));
  CHECK_FALSE(t.labels);

  CHECK_THROWS_WITH_AS(parse_spectra_table("500,510,520\n1,2,3\n1,2\n"), doctest::Contains("row 3"), ParseError);
  CHECK_THROWS_WITH_AS(parse_spectra_table("500,510,520\n1,x,3\n"), doctest::Contains("column 2"), ParseError);

  const auto labelled = parse_spectra_table("500,510,label\n1,2,cancer\n3,4,normal\n");
  REQUIRE(labelled.labels);
  CHECK((*labelled.labels)[1] == "normal");
  CHECK(labelled.spectra[1].size() == 2);

  Rng rng(1);
  SpectraTable big;
  big.axis = WavelengthAxis::linear(500, 1.5, 7);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXf v(7);
    for (int k = 0; k < 7; ++k) v[k] = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-8, 8)));
    big.spectra.emplace_back(v, big.axis);
  }
  const auto back = parse_spectra_table(format_spectra_table(big));
  REQUIRE(back.spectra.size() == 50);
  for (int i = 0; i < 50; ++i) CHECK(back.spectra[i].values() == big.spectra[i].values());
}

TEST_CASE("manifests") {
  const char* two = R"({"version": 1, "records": [
    {"id": "a", "input_path": "a.hdr", "target_path": "a_mask.hdr", "pair_kind": "cube->mask", "split": "train", "group_key": "patient-7"},
    {"id": "b", "input_path": "b.hdr", "target_path": "b_mask.hdr", "pair_kind": "cube->mask", "split": "unassigned", "group_key": "patient-7"}]})";
  const auto m = parse_manifest(two);
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].group_key == m.records[1].group_key);
  CHECK(*m.records[0].group_key == "patient-7");
  CHECK(m.records[0].split == Split::Train);

  const std::string canon = format_manifest(m);
  CHECK(format_manifest(parse_manifest(canon)) == canon);
  CHECK(parse_manifest(canon).records == m.records);

  CHECK(parse_manifest(R"({"version": 1, "records": []})").records.empty());
  std::string dup = two;
  dup.replace(dup.find("\"id\": \"b\""), 9, "\"id\": \"a\"");
  CHECK_THROWS_WITH_AS(parse_manifest(dup), doctest::Contains("duplicate id a"), ParseError);
  std::string bad_split = two;
  bad_split.replace(bad_split.find("\"train\""), 7, "\"training\"");
  CHECK_THROWS_AS(parse_manifest(bad_split), ParseError);
  CHECK_THROWS_AS(parse_manifest(R"({"version": 1, "records": [{"id": "a", "input_path": "x", "pair_kind": "cube->mask", "colour": 1}]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_manifest(R"({"version": 1, "records": [{"id": "a", "input_path": "", "pair_kind": "cube->mask"}]})"),
                  ParseError);

  TempDir dir("manifest");
  write_manifest(m, dir / "m.json");
  const auto read = read_manifest(dir / "m.json");
  CHECK(read.records == m.records);
  CHECK(read.resolve("a.hdr") == dir / "a.hdr");
  CHECK(read_text_file(dir / "m.json") == canon);
}
