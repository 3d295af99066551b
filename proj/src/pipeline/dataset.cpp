#include "spectrai/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "spectrai/pipeline/rng.hpp"

namespace spectrai {

std::vector<PatchOrigin> patch_origins(Index height, Index width, Index size, Index stride) {
  if (size < 1 || stride < 1) throw RangeError("patch size and stride must be >= 1");
  if (size > height || size > width) throw RangeError("patch larger than image");
  std::vector<PatchOrigin> out;
  for (Index y = 0; y + size <= height; y += stride)
    for (Index x = 0; x + size <= width; x += stride) out.push_back({y, x});
  return out;
}

void for_each_patch(const Hypercube& cube, const SegmentationMask* mask, Index size, Index stride,
                    const std::function<void(const Patch&)>& visit) {
  if (mask && (mask->height() != cube.height() || mask->width() != cube.width()))
    throw ShapeError("mask dimensions differ from cube");
  for (const auto& o : patch_origins(cube.height(), cube.width(), size, stride)) {
    Patch p{crop(cube, o.y, o.x, size, size), std::nullopt, o};
    if (mask) p.mask = crop(*mask, o.y, o.x, size, size);
    visit(p);
  }
}

std::vector<Patch> extract_patches(const Hypercube& cube, const std::optional<SegmentationMask>& mask,
                                   Index size, Index stride) {
  std::vector<Patch> out;
  for_each_patch(cube, mask ? &*mask : nullptr, size, stride,
                 [&](const Patch& p) { out.push_back(p); });
  return out;
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split ratios must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("ratios must sum to 1");
}

SplitSpec parse_split_ratios(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad split ratio '" + item + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("split must have three ratios train:val:test");
  const double total = parts[0] + parts[1] + parts[2];
  const bool percent = parts[0] > 1 || parts[1] > 1 || parts[2] > 1 || total > 1 + 1e-9;
  if (percent)
    for (auto& p : parts) p /= 100.0;
  SplitSpec spec;
  spec.train = parts[0];
  spec.val = parts[1];
  spec.test = parts[2];
  spec.validate();
  return spec;
}

namespace {

Index capacity(Index n, double ratio) {
  return static_cast<Index>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

}  // namespace

SplitResult split_dataset(Index n, const SplitSpec& spec,
                          const std::vector<std::optional<std::string>>& group_keys) {
  if (n < 1) throw RangeError("cannot split an empty dataset");
  spec.validate();
  const Index val_cap = capacity(n, spec.val);
  const Index test_cap = capacity(n, spec.test);
  const Index train_cap = n - val_cap - test_cap;
  Rng rng(spec.seed);
  SplitResult out;

  if (!spec.group_aware) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    out.val.assign(order.begin(), order.begin() + val_cap);
    out.test.assign(order.begin() + val_cap, order.begin() + val_cap + test_cap);
    out.train.assign(order.begin() + val_cap + test_cap, order.end());
  } else {
    if (!group_keys.empty() && static_cast<Index>(group_keys.size()) != n)
      throw ShapeError("group_keys must have one entry per item");
    // Groups in order of first appearance; ungrouped items are singletons.
    std::vector<std::vector<Index>> groups;
    std::map<std::string, std::size_t> by_key;
    std::vector<std::string> names;
    for (Index i = 0; i < n; ++i) {
      const auto& key = group_keys.empty() ? std::nullopt : group_keys[static_cast<std::size_t>(i)];
      if (key && !key->empty()) {
        auto [it, fresh] = by_key.emplace(*key, groups.size());
        if (fresh) {
          groups.emplace_back();
          names.push_back(*key);
        }
        groups[it->second].push_back(i);
      } else {
        groups.push_back({i});
        names.push_back("#" + std::to_string(i));
      }
    }
    std::vector<std::size_t> order(groups.size());
    for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
    rng.shuffle(order);
    Index val_left = val_cap, test_left = test_cap;
    for (std::size_t g : order) {
      const auto& members = groups[g];
      const auto size = static_cast<Index>(members.size());
      std::vector<Index>* dest = &out.train;
      if (size <= val_left) {
        dest = &out.val;
        val_left -= size;
      } else if (size <= test_left) {
        dest = &out.test;
        test_left -= size;
      } else if (size > std::max({train_cap, val_cap, test_cap})) {
        out.warnings.push_back("group '" + names[g] + "' (" + std::to_string(size) +
                               " items) exceeds every split capacity; forced into train");
      }
      dest->insert(dest->end(), members.begin(), members.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace spectrai
