#include "capsnet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace capsnet {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string normalize_text(const std::string& raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<Record> parse_intent_file(const fs::path& path, const std::string& intent) {
  json root;
  try {
    root = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("malformed SNIPS file " + path.string() + ": " + e.what());
  }
  if (!root.is_object() || !root.contains(intent) || !root[intent].is_array())
    throw DataError("SNIPS file " + path.string() + " lacks entry array for intent " + intent);
  std::vector<Record> records;
  Index entry_no = 0;
  for (const auto& entry : root[intent]) {
    ++entry_no;
    if (!entry.is_object() || !entry.contains("data") || !entry["data"].is_array())
      throw DataError("SNIPS file " + path.string() + ", entry " + std::to_string(entry_no) +
                      ": missing data array");
    std::string text;
    for (const auto& chunk : entry["data"]) {
      if (!chunk.is_object() || !chunk.contains("text") || !chunk["text"].is_string())
        throw DataError("SNIPS file " + path.string() + ", entry " + std::to_string(entry_no) +
                        ": chunk without text");
      text += chunk["text"].get<std::string>();
    }
    records.push_back({normalize_text(text), intent});
  }
  return records;
}

}  // namespace

Index Manifest::id_of(const std::string& name) const {
  auto it = std::lower_bound(intents.begin(), intents.end(), name);
  if (it == intents.end() || *it != name)
    throw DataError("intent '" + name + "' not in manifest");
  return static_cast<Index>(it - intents.begin());
}

Manifest make_manifest(std::vector<std::string> intent_names) {
  std::sort(intent_names.begin(), intent_names.end());
  intent_names.erase(std::unique(intent_names.begin(), intent_names.end()), intent_names.end());
  return Manifest{std::move(intent_names)};
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest to " + path);
  for (const auto& name : m.intents) out << name << '\n';
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest from " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) names.push_back(line);
  Manifest m{names};
  if (!std::is_sorted(names.begin(), names.end()))
    throw DataError("manifest " + path + " is not lexicographically sorted");
  return m;
}

void save_records(const std::vector<Record>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write records to " + path);
  for (const auto& r : records) {
    json obj;
    obj["text"] = r.text;
    obj["intent"] = r.intent;
    out << obj.dump() << '\n';
  }
}

std::vector<Record> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read records from " + path);
  std::vector<Record> records;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj.contains("intent") ||
        !obj["text"].is_string() || !obj["intent"].is_string())
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": record must be an object with string keys 'text' and 'intent'");
    records.push_back({obj["text"].get<std::string>(), obj["intent"].get<std::string>()});
  }
  return records;
}

std::vector<LabeledExample> load_dataset(const std::string& path, const Manifest& manifest) {
  std::vector<LabeledExample> out;
  for (const auto& r : load_records(path)) out.push_back({r.text, manifest.id_of(r.intent)});
  return out;
}

ConvertResult convert_snips(const std::string& raw_dir, const std::string& out_dir) {
  if (!fs::is_directory(raw_dir)) throw IoError("raw directory not found: " + raw_dir);
  // filename patterns of the public per-intent distribution
  std::map<std::string, fs::path> train_files, test_files;
  for (const auto& entry : fs::recursive_directory_iterator(raw_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.starts_with("train_") && name.ends_with("_full.json"))
      train_files[name.substr(6, name.size() - 16)] = entry.path();
    else if (name.starts_with("validate_") && name.ends_with(".json"))
      test_files[name.substr(9, name.size() - 14)] = entry.path();
  }
  if (train_files.empty())
    throw DataError("no train_<Intent>_full.json files found under " + raw_dir);
  std::string missing;
  for (const auto& [intent, path] : train_files)
    if (!test_files.count(intent)) missing += " validate_" + intent + ".json";
  for (const auto& [intent, path] : test_files)
    if (!train_files.count(intent)) missing += " train_" + intent + "_full.json";
  if (!missing.empty()) throw DataError("incomplete SNIPS distribution, missing:" + missing);

  ConvertResult result;
  std::vector<std::string> intents;
  std::uint64_t hash = 14695981039346656037ull;
  std::vector<Record> train, test;
  for (const auto& [intent, path] : train_files) {  // std::map: lexicographic order
    intents.push_back(intent);
    hash = fnv1a64(read_file(path), hash);
    hash = fnv1a64(read_file(test_files.at(intent)), hash);
    auto tr = parse_intent_file(path, intent);
    auto te = parse_intent_file(test_files.at(intent), intent);
    train.insert(train.end(), tr.begin(), tr.end());
    test.insert(test.end(), te.begin(), te.end());
  }
  result.manifest = make_manifest(intents);
  result.train_count = static_cast<Index>(train.size());
  result.test_count = static_cast<Index>(test.size());
  result.source_hash = hash;

  fs::create_directories(out_dir);
  save_records(train, (fs::path(out_dir) / "train.jsonl").string());
  save_records(test, (fs::path(out_dir) / "test.jsonl").string());
  save_manifest(result.manifest, (fs::path(out_dir) / "manifest.txt").string());
  json meta;
  meta["source_hash_fnv1a64"] = result.source_hash;
  meta["train_count"] = result.train_count;
  meta["test_count"] = result.test_count;
  meta["intents"] = result.manifest.intents;
  std::ofstream meta_out(fs::path(out_dir) / "manifest.meta.json");
  meta_out << meta.dump(2) << '\n';
  return result;
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace capsnet
