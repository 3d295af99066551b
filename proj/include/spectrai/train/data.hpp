#pragma once

#include <string>
#include <vector>

#include "spectrai/io/tables.hpp"
#include "spectrai/pipeline/dataset.hpp"

namespace spectrai::train {

struct LoadedDataset {
  std::vector<SamplePair> samples;
  std::vector<io::Split> splits;  // per sample, from the manifest record
  std::vector<std::string> class_names;
};

/// Expands manifest records into samples. Spectra tables contribute one
/// sample per row (ids "<record>#<row>"); low/high tables zip by row.
/// Records must carry the task's pair kind.
LoadedDataset load_dataset(const io::DatasetManifest& manifest, TaskKind task);

struct PartitionedData {
  std::vector<SamplePair> train, val, test;
  std::vector<std::string> class_names;
  std::vector<std::string> warnings;
};

/// Keeps manifest splits; unassigned samples are split with `spec`.
PartitionedData partition(LoadedDataset data, const SplitSpec& spec);

}  // namespace spectrai::train
