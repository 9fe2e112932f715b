/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace derisk {

/// Parsed rows before any split: dense features and contiguous 0-based class
/// ids. `label_values` records the original label for each id (ids are
/// assigned in ascending order of the original values).
struct ParsedDataset {
  Eigen::MatrixXd features;
  std::vector<Eigen::Index> labels;
  std::vector<double> label_values;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Eigen::Index classes() const { return static_cast<Eigen::Index>(label_values.size()); }
};

/// Sparse text rows: `<label> <index>:<value> ...` with 1-based, strictly
/// ascending indices. Absent indices are zero. Malformed lines raise with
/// their line number.
ParsedDataset parse_sparse_dataset(std::istream& in);

/// Dense rows: `label,v1,...,vd`.
ParsedDataset parse_dense_csv(std::istream& in);

/// k Gaussian blobs with deterministic means on the unit axis grid (class c
/// sits at (1 + c/d) * e_{c mod d}) and isotropic noise `spread`.
ParsedDataset make_synthetic_mixture(Eigen::Index k, Eigen::Index d, Eigen::Index per_class,
                                     double spread, std::uint64_t seed);

enum class SplitTag : unsigned char { Labeled = 0, Unlabeled = 1, Test = 2 };

/// Per-dimension affine standardization record: x' = (x - shift) / scale.
struct AffineTransform {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

/// A dataset split into labeled / unlabeled / test rows. The unlabeled
/// training view exposes features only -- true labels of unlabeled rows are
/// reachable solely through the *_for_eval / FSL accessors, which training
/// code never receives.
class SslDataset {
 public:
  static SslDataset split(const ParsedDataset& source, Eigen::Index n_labeled,
                          Eigen::Index n_test, std::uint64_t seed, bool stratified = true);

  struct LabeledView {
    Eigen::MatrixXd features;
    std::vector<Eigen::Index> labels;
  };
  struct UnlabeledView {
    Eigen::MatrixXd features;  // deliberately no label member
  };
  struct TestView {
    Eigen::MatrixXd features;
    std::vector<Eigen::Index> labels;
  };

  LabeledView labeled() const;
  UnlabeledView unlabeled() const;
  TestView test() const;

  /// Labeled + unlabeled rows with true labels: the FSL scenario's training
  /// input. Not a training view for SSL runs.
  LabeledView fsl_training_view() const;

  /// True labels of the unlabeled rows, in unlabeled-view row order.
  /// Evaluation only (pseudo-label precision, theory instances).
  std::vector<Eigen::Index> unlabeled_true_labels_for_eval() const;

  /// Standardizes every feature column using labeled+unlabeled statistics
  /// only; the returned transform was already applied to all rows (test
  /// included). Zero-variance columns shift by their mean with scale 1.
  AffineTransform normalize_features();

  /// Randomly drops unlabeled rows so that class c keeps about
  /// keep_fraction[c] of its rows; used by the imbalance experiments.
  SslDataset with_unlabeled_class_imbalance(const std::vector<double>& keep_fraction,
                                            std::uint64_t seed) const;

  Eigen::Index rows() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }
  Eigen::Index classes() const { return k_; }
  Eigen::Index labeled_count() const;
  Eigen::Index unlabeled_count() const;
  Eigen::Index test_count() const;

 private:
  SslDataset() = default;
  Eigen::MatrixXd features_;
  std::vector<Eigen::Index> labels_;
  std::vector<SplitTag> tags_;
  Eigen::Index k_ = 0;
};

/// Versioned binary cache of parsed rows; round-trips exactly.
void save_dataset_cache(const ParsedDataset& data, const std::filesystem::path& path);
ParsedDataset load_dataset_cache(const std::filesystem::path& path);

/// Reads a dataset file by extension: ".csv" dense, anything else sparse
/// text; ".dsc" loads the binary cache.
ParsedDataset load_dataset_file(const std::filesystem::path& path);

}  // namespace derisk
