#include "nnadapt/batching.hpp"

#include <numeric>

#include "nnadapt/errors.hpp"

namespace nnadapt {

std::vector<std::vector<int>> make_batches(int n, int batch, SeededRng& rng) {
  if (n < 2) throw ConfigError("need at least 2 samples to form batches");
  if (batch < 2) throw ConfigError("batch size must be at least 2");
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);

  std::vector<std::vector<int>> out;
  for (int start = 0; start < n; start += batch) {
    const int end = std::min(start + batch, n);
    out.emplace_back(idx.begin() + start, idx.begin() + end);
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

}  // namespace nnadapt
