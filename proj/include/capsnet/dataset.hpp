#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capsnet/common.hpp"

namespace capsnet {

struct Record {
  std::string text;
  std::string intent;
};

/// Intent label set; ids are assigned by lexicographic order of names.
struct Manifest {
  std::vector<std::string> intents;

  Index id_of(const std::string& name) const;
  Index size() const { return static_cast<Index>(intents.size()); }
};

Manifest make_manifest(std::vector<std::string> intent_names);
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

/// Line-delimited JSON, keys exactly "text" and "intent".
void save_records(const std::vector<Record>& records, const std::string& path);
std::vector<Record> load_records(const std::string& path);

struct LabeledExample {
  std::string text;
  Index intent_id;
};

std::vector<LabeledExample> load_dataset(const std::string& path, const Manifest& manifest);

struct ConvertResult {
  Index train_count = 0;
  Index test_count = 0;
  Manifest manifest;
  std::uint64_t source_hash = 0;
};

/// Normalizes the raw per-intent SNIPS distribution (train_<Intent>_full.json
/// and validate_<Intent>.json files, found anywhere under raw_dir) into
/// out_dir/train.jsonl, out_dir/test.jsonl and out_dir/manifest.txt. Slot
/// annotations are discarded; chunk texts are concatenated into plain text.
ConvertResult convert_snips(const std::string& raw_dir, const std::string& out_dir);

/// FNV-1a content hash used to pin the raw source files in manifest.meta.json.
std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed = 14695981039346656037ull);

}  // namespace capsnet
