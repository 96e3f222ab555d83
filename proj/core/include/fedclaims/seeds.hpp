#pragma once

#include <cstdint>

namespace fedclaims {

/// Domain tags fed to seed_mix() so every stochastic consumer of the
/// experiment seed draws from its own stream. Renumbering any of these
/// changes every derived trajectory; treat the values as frozen.
enum SeedDomain : std::uint64_t {
  kSeedData = 1,        // tweedie generation
  kSeedPartition = 2,   // collaborator row assignment
  kSeedTrainTest = 3,   // per-collaborator train/test split (tag, collab id)
  kSeedNetwork = 4,     // global model init
  kSeedCollab = 5,      // per-collaborator shuffle base (tag, collab id)
  kSeedHead = 6,        // per-worker head init (tag, worker id)
  kSeedTail = 7,        // tail init
  kSeedVflBatch = 8,    // shared vfl batch shuffle (tag, epoch)
};

}  // namespace fedclaims
