#include "codim/assembly.hpp"

#include <algorithm>

namespace codim {

namespace {

constexpr std::uint64_t kEmpty = ~std::uint64_t(0);

std::uint64_t pack(int a, int b) {
  return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
}

std::size_t mix(std::uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  return static_cast<std::size_t>(k);
}

}  // namespace

BlockAssembler::BlockAssembler(int num_vertices) : num_vertices_(num_vertices) {
  std::size_t cap = 64;
  while (cap < std::size_t(num_vertices) * 8) cap *= 2;
  keys_.assign(cap, kEmpty);
  slots_.assign(cap, -1);
}

void BlockAssembler::clear() {
  std::fill(keys_.begin(), keys_.end(), kEmpty);
  std::fill(slots_.begin(), slots_.end(), -1);
  block_keys_.clear();
  blocks_.clear();
}

void BlockAssembler::grow() {
  const std::size_t cap = keys_.size() * 2;
  keys_.assign(cap, kEmpty);
  slots_.assign(cap, -1);
  for (std::size_t i = 0; i < block_keys_.size(); ++i) {
    std::size_t h = mix(block_keys_[i]) & (cap - 1);
    while (keys_[h] != kEmpty) h = (h + 1) & (cap - 1);
    keys_[h] = block_keys_[i];
    slots_[h] = static_cast<int>(i);
  }
}

Eigen::Matrix3d& BlockAssembler::block(int a, int b) {
  const std::uint64_t key = pack(a, b);
  const std::size_t mask = keys_.size() - 1;
  std::size_t h = mix(key) & mask;
  while (keys_[h] != kEmpty) {
    if (keys_[h] == key) return blocks_[slots_[h]];
    h = (h + 1) & mask;
  }
  if (2 * (blocks_.size() + 1) > keys_.size()) {
    grow();
    return block(a, b);
  }
  keys_[h] = key;
  slots_[h] = static_cast<int>(blocks_.size());
  block_keys_.push_back(key);
  blocks_.push_back(Eigen::Matrix3d::Zero());
  return blocks_.back();
}

void BlockAssembler::add_block(int row_vertex, int col_vertex,
                               const Eigen::Matrix3d& m) {
  if (row_vertex <= col_vertex) {
    block(row_vertex, col_vertex) += m;
  } else {
    block(col_vertex, row_vertex) += m.transpose();
  }
}

void BlockAssembler::add(const int* vertices, int count, const StencilMatrix& local) {
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      const int a = vertices[i], b = vertices[j];
      // Each unordered off-diagonal pair appears twice; keep one copy.
      if (a > b) continue;
      if (a == b && j != i) {
        // Repeated vertex in a stencil: fold both orderings into the block.
        block(a, a) += local.block<3, 3>(3 * i, 3 * j);
        continue;
      }
      block(a, b) += local.block<3, 3>(3 * i, 3 * j);
    }
  }
}

void BlockAssembler::add_diagonal(int vertex, double value) {
  block(vertex, vertex).diagonal().array() += value;
}

Eigen::SparseMatrix<double> BlockAssembler::lower(const std::vector<int>& free_index,
                                                  int free_count) const {
  const int n = 3 * free_count;
  std::vector<int> col_count(n + 1, 0);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const int a = static_cast<int>(block_keys_[i] >> 32);
    const int b = static_cast<int>(block_keys_[i] & 0xffffffffu);
    const int fa = free_index[a], fb = free_index[b];
    if (fa < 0 || fb < 0) continue;
    // Lower entries: rows of the larger free index, columns of the smaller.
    const int cf = std::min(fa, fb);
    for (int k = 0; k < 3; ++k) col_count[3 * cf + k] += (fa == fb) ? 3 - k : 3;
  }
  Eigen::SparseMatrix<double> m(n, n);
  std::vector<int> outer(n + 1, 0);
  for (int c = 0; c < n; ++c) outer[c + 1] = outer[c] + col_count[c];
  std::vector<std::pair<int, double>> entries(outer[n]);
  std::vector<int> fill(outer.begin(), outer.end() - 1);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const int a = static_cast<int>(block_keys_[i] >> 32);
    const int b = static_cast<int>(block_keys_[i] & 0xffffffffu);
    const int fa = free_index[a], fb = free_index[b];
    if (fa < 0 || fb < 0) continue;
    const Eigen::Matrix3d& blk = blocks_[i];  // rows of a, columns of b
    if (fa == fb) {
      for (int c = 0; c < 3; ++c) {
        for (int r = c; r < 3; ++r) {
          // Symmetrize the diagonal block.
          entries[fill[3 * fa + c]++] = {3 * fa + r, 0.5 * (blk(r, c) + blk(c, r))};
        }
      }
    } else if (fa < fb) {
      // Lower entry (row in b, column in a) = blk(col, row).
      for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) entries[fill[3 * fa + c]++] = {3 * fb + r, blk(c, r)};
      }
    } else {
      for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) entries[fill[3 * fb + c]++] = {3 * fa + r, blk(r, c)};
      }
    }
  }
  m.resizeNonZeros(outer[n]);
  for (int c = 0; c < n; ++c) {
    std::sort(entries.begin() + outer[c], entries.begin() + outer[c + 1]);
    m.outerIndexPtr()[c] = outer[c];
  }
  m.outerIndexPtr()[n] = outer[n];
  for (int k = 0; k < outer[n]; ++k) {
    m.innerIndexPtr()[k] = entries[k].first;
    m.valuePtr()[k] = entries[k].second;
  }
  return m;
}

}  // namespace codim
