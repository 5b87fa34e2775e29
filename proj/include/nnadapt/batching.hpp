#pragma once

#include <vector>

#include "nnadapt/rng.hpp"

namespace nnadapt {

// Shuffled index chunks of size `batch` (without replacement). A trailing
// chunk of a single element is merged into the previous chunk so batch-norm
// always sees at least two rows.
std::vector<std::vector<int>> make_batches(int n, int batch, SeededRng& rng);

}  // namespace nnadapt
