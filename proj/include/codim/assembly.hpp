#pragma once

#include "codim/types.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <vector>

namespace codim {

// Accumulates 3x3 vertex blocks of a symmetric Hessian in an open-addressing
// table. Only blocks with row vertex <= column vertex are stored.
class BlockAssembler : public HessianSink {
 public:
  explicit BlockAssembler(int num_vertices);

  void clear();
  void add(const int* vertices, int count, const StencilMatrix& local) override;
  void add_block(int row_vertex, int col_vertex, const Eigen::Matrix3d& block);
  void add_diagonal(int vertex, double value);

  std::size_t block_count() const { return blocks_.size(); }

  // Lower triangle over free vertices. free_index maps a vertex to its
  // position among free vertices or -1 when eliminated.
  Eigen::SparseMatrix<double> lower(const std::vector<int>& free_index,
                                    int free_count) const;

 private:
  Eigen::Matrix3d& block(int a, int b);
  void grow();

  int num_vertices_;
  std::vector<std::uint64_t> keys_;
  std::vector<int> slots_;
  std::vector<std::uint64_t> block_keys_;
  std::vector<Eigen::Matrix3d> blocks_;
};

}  // namespace codim
