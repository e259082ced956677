#pragma once

#include <cstdint>
#include <string>

#include "capsnet/common.hpp"

namespace capsnet {

/// Writes a seeded seven-intent voice-command corpus in the raw per-intent
/// layout consumed by convert_snips (train_<Intent>_full.json plus
/// validate_<Intent>.json under raw_dir). Intended as a stand-in corpus for
/// demos and the acceptance suite when the real SNIPS files are unavailable;
/// utterances are template-generated with deliberately overlapping
/// vocabulary across intents.
void generate_demo_corpus(const std::string& raw_dir, std::uint64_t seed,
                          Index train_per_intent = 1870, Index test_per_intent = 100);

}  // namespace capsnet
