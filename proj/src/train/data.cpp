#include "spectrai/train/data.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "spectrai/io/envi.hpp"

namespace spectrai::train {

namespace {

bool is_index(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && v >= 0;
}

struct LabelTable {
  std::vector<std::string> names;
  bool numeric = true;

  void build(const std::vector<std::string>& all) {
    numeric = std::all_of(all.begin(), all.end(), is_index);
    if (!numeric) {
      std::set<std::string> s(all.begin(), all.end());
      names.assign(s.begin(), s.end());
      return;
    }
    int mx = -1;
    for (const auto& a : all) mx = std::max(mx, std::stoi(a));
    for (int i = 0; i <= mx; ++i) names.push_back(std::to_string(i));
  }

  ClassLabel lookup(const std::string& raw) const {
    if (numeric) return {std::stoi(raw), raw};
    const auto it = std::lower_bound(names.begin(), names.end(), raw);
    return {static_cast<std::int32_t>(it - names.begin()), raw};
  }
};

}  // namespace

LoadedDataset load_dataset(const io::DatasetManifest& manifest, TaskKind task) {
  const PairKind want = pair_kind_for(task);
  LoadedDataset out;
  struct PendingLabel {
    std::size_t sample;
    std::string raw;
  };
  std::vector<PendingLabel> pending;

  for (const auto& r : manifest.records) {
    if (r.pair_kind != want)
      throw ConfigError("record " + r.id + " is " + std::string(to_string(r.pair_kind)) + ", task " +
                        std::string(to_string(task)) + " needs " + std::string(to_string(want)));
    const auto input = manifest.resolve(r.input_path);
    auto push = [&](SamplePair p) {
      p.kind = r.pair_kind;
      p.group_key = r.group_key;
      out.samples.push_back(std::move(p));
      out.splits.push_back(r.split);
    };
    switch (r.pair_kind) {
      case PairKind::SpectrumToSpectrum: {
        if (!r.target_path) throw ConfigError("record " + r.id + ": target_path required");
        const auto low = io::read_spectra_table(input);
        const auto high = io::read_spectra_table(manifest.resolve(*r.target_path));
        if (low.spectra.size() != high.spectra.size())
          throw ConfigError("record " + r.id + ": input and target tables differ in row count");
        for (std::size_t i = 0; i < low.spectra.size(); ++i) {
          const std::string id = low.spectra.size() == 1 ? r.id : r.id + "#" + std::to_string(i);
          push(SamplePair{id, low.spectra[i], high.spectra[i], r.pair_kind, {}});
        }
        break;
      }
      case PairKind::SpectrumToLabel: {
        const auto t = io::read_spectra_table(input);
        for (std::size_t i = 0; i < t.spectra.size(); ++i) {
          std::string raw;
          if (t.labels) raw = (*t.labels)[i];
          else if (r.label) raw = *r.label;
          else throw ConfigError("record " + r.id + ": no label column and no record label");
          const std::string id = t.spectra.size() == 1 ? r.id : r.id + "#" + std::to_string(i);
          pending.push_back({out.samples.size(), raw});
          push(SamplePair{id, t.spectra[i], ClassLabel{}, r.pair_kind, {}});
        }
        break;
      }
      case PairKind::CubeToCube: {
        if (!r.target_path) throw ConfigError("record " + r.id + ": target_path required");
        push(SamplePair{r.id, io::read_envi(input), io::read_envi(manifest.resolve(*r.target_path)), r.pair_kind, {}});
        break;
      }
      case PairKind::CubeToMask: {
        if (!r.target_path) throw ConfigError("record " + r.id + ": target_path required");
        SegmentationMask m = io::read_mask(manifest.resolve(*r.target_path));
        if (out.class_names.empty()) out.class_names = m.class_table();
        else if (out.class_names != m.class_table())
          throw ConfigError("record " + r.id + ": class table differs from earlier records");
        push(SamplePair{r.id, io::read_envi(input), std::move(m), r.pair_kind, {}});
        break;
      }
      case PairKind::CubeToLabel: {
        if (!r.label) throw ConfigError("record " + r.id + ": label required");
        pending.push_back({out.samples.size(), *r.label});
        push(SamplePair{r.id, io::read_envi(input), ClassLabel{}, r.pair_kind, {}});
        break;
      }
    }
  }
  if (!pending.empty()) {
    std::vector<std::string> raws;
    for (const auto& p : pending) raws.push_back(p.raw);
    LabelTable table;
    table.build(raws);
    out.class_names = table.names;
    for (const auto& p : pending) out.samples[p.sample].target = table.lookup(p.raw);
  }
  for (const auto& s : out.samples) {
    int scale = 1;
    if (task == TaskKind::SuperResolution)
      scale = static_cast<int>(std::get<Hypercube>(s.target).height() / std::get<Hypercube>(s.input).height());
    check_pair(s, scale);
  }
  return out;
}

PartitionedData partition(LoadedDataset data, const SplitSpec& spec) {
  PartitionedData out;
  out.class_names = std::move(data.class_names);
  std::vector<std::size_t> unassigned;
  std::vector<std::optional<std::string>> keys;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    switch (data.splits[i]) {
      case io::Split::Train: out.train.push_back(std::move(data.samples[i])); break;
      case io::Split::Val: out.val.push_back(std::move(data.samples[i])); break;
      case io::Split::Test: out.test.push_back(std::move(data.samples[i])); break;
      case io::Split::Unassigned:
        unassigned.push_back(i);
        keys.push_back(data.samples[i].group_key);
        break;
    }
  }
  if (!unassigned.empty()) {
    const SplitResult r = split_dataset(static_cast<Index>(unassigned.size()), spec, keys);
    out.warnings = r.warnings;
    for (Index k : r.train) out.train.push_back(std::move(data.samples[unassigned[static_cast<std::size_t>(k)]]));
    for (Index k : r.val) out.val.push_back(std::move(data.samples[unassigned[static_cast<std::size_t>(k)]]));
    for (Index k : r.test) out.test.push_back(std::move(data.samples[unassigned[static_cast<std::size_t>(k)]]));
  }
  return out;
}

}  // namespace spectrai::train
