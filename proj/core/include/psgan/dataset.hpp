#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psgan/rng.hpp"
#include "psgan/scene.hpp"

namespace psgan {

/// Persisted patch dataset: dir/pairs/NNNNNN_{x,y}.png plus dir/dataset.json
/// carrying patch size, seed, noise boxes and the train/test split.
void save_pairs_dataset(const std::filesystem::path& dir,
                        const std::vector<PatchPair>& pairs, int patch,
                        std::uint64_t seed, double test_frac, Rng& split_rng);

/// Loads pairs with the given split ("train", "test", or "" for all).
std::vector<PatchPair> load_pairs_dataset(const std::filesystem::path& dir,
                                          const std::string& split = "");

/// Patch size recorded in dir/dataset.json.
int dataset_patch_size(const std::filesystem::path& dir);

}  // namespace psgan
