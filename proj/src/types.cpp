#include "codim/types.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace codim {

void project_psd(StencilMatrix& m) {
  Eigen::SelfAdjointEigenSolver<StencilMatrix> eig(m);
  if (eig.eigenvalues().minCoeff() >= 0.0) return;
  const StencilVector lambda = eig.eigenvalues().cwiseMax(0.0);
  m = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

int thread_count() {
  static const int count = [] {
    const char* env = std::getenv("CODIM_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n >= 1 ? n : 1;
  }();
  return count;
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace codim
