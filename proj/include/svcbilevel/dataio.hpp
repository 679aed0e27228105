#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace svcbilevel {

/// Thrown for malformed input files and invalid split requests.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One sparse sample: (1-based feature index, value) pairs, indices strictly increasing.
using SparseRow = std::vector<std::pair<int, double>>;

/// Labeled binary-classification data. Labels are normalized to {-1, +1}.
struct Dataset {
  std::vector<SparseRow> samples;
  std::vector<double> labels;
  int n_features = 0;

  std::size_t size() const { return samples.size(); }

  /// Dense copy of sample `i` (length n_features).
  Eigen::VectorXd dense_row(std::size_t i) const;

  /// Dense rows `indices` stacked as columns of an n_features x |indices| matrix.
  Eigen::MatrixXd dense_columns(const std::vector<std::size_t>& indices) const;

  bool operator==(const Dataset&) const = default;
};

/// Reads a LIBSVM text file. `n_features_override` > 0 widens (never narrows) the
/// feature dimension. Throws DataError naming the offending line.
Dataset parse_libsvm(const std::filesystem::path& path, int n_features_override = 0);
Dataset parse_libsvm(std::istream& in, int n_features_override = 0,
                     const std::string& source_name = "<stream>");

/// Writes `ds` back in LIBSVM format with labels as +1 / -1 and zeros omitted.
void write_libsvm(std::ostream& out, const Dataset& ds);
void write_libsvm(const std::filesystem::path& path, const Dataset& ds);

struct SplitPlan {
  std::vector<std::size_t> test_indices;
  std::vector<std::size_t> cv_indices;
  std::vector<std::vector<std::size_t>> folds;
  std::vector<std::size_t> dropped;  // l1 mod T leftovers, excluded from cv_indices
  std::uint64_t seed = 0;

  int num_folds() const { return static_cast<int>(folds.size()); }
  std::size_t fold_size() const { return folds.empty() ? 0 : folds.front().size(); }
};

/// Seeded shuffle, first `l1` indices form the cross-validation pool, the rest the
/// hold-out set. The pool is dealt round-robin into T folds of floor(l1/T) each.
SplitPlan make_split(const Dataset& ds, int folds, std::size_t l1, std::uint64_t seed);

/// Portable Fisher-Yates permutation of 0..n-1 driven by a 64-bit Mersenne Twister.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace svcbilevel
