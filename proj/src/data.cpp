/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "derisk/random.hpp"

namespace derisk {

namespace {

struct RawRow {
  double label;
  std::vector<std::pair<Eigen::Index, double>> entries;  // 1-based indices
};

ParsedDataset assemble(std::vector<RawRow> rows, Eigen::Index dim) {
  // remap labels to contiguous 0-based ids in ascending order of the values
  std::map<double, Eigen::Index> id_of;
  for (const RawRow& r : rows) id_of.emplace(r.label, 0);
  ParsedDataset out;
  out.label_values.reserve(id_of.size());
  for (auto& [value, id] : id_of) {
    id = static_cast<Eigen::Index>(out.label_values.size());
    out.label_values.push_back(value);
  }
  out.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.labels.push_back(id_of.at(rows[r].label));
    for (auto& [idx, value] : rows[r].entries) out.features(static_cast<Eigen::Index>(r), idx - 1) = value;
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& why) {
  throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

ParsedDataset parse_sparse_dataset(std::istream& in) {
  std::vector<RawRow> rows;
  Eigen::Index max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    RawRow row;
    std::string token;
    if (!(ls >> token)) parse_fail(line_no, "missing label");
    try {
      std::size_t used = 0;
      row.label = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      parse_fail(line_no, "bad label '" + token + "'");
    }
    Eigen::Index prev_index = 0;
    while (ls >> token) {
      auto colon = token.find(':');
      if (colon == std::string::npos) parse_fail(line_no, "expected index:value, got '" + token + "'");
      Eigen::Index idx = 0;
      double value = 0.0;
      try {
        std::size_t used = 0;
        idx = static_cast<Eigen::Index>(std::stoll(token.substr(0, colon), &used));
        if (used != colon) throw std::invalid_argument("");
        std::string vs = token.substr(colon + 1);
        value = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        parse_fail(line_no, "bad index:value '" + token + "'");
      }
      if (idx < 1) parse_fail(line_no, "indices are 1-based");
      if (idx <= prev_index) parse_fail(line_no, "indices must be strictly ascending");
      prev_index = idx;
      max_index = std::max(max_index, idx);
      row.entries.emplace_back(idx, value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty dataset");
  return assemble(std::move(rows), max_index);
}

ParsedDataset parse_dense_csv(std::istream& in) {
  std::vector<RawRow> rows;
  Eigen::Index dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string cell;
    RawRow row;
    Eigen::Index col = 0;
    bool first = true;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        parse_fail(line_no, "bad number '" + cell + "'");
      }
      if (first) {
        row.label = v;
        first = false;
      } else {
        ++col;
        row.entries.emplace_back(col, v);
      }
    }
    if (first) parse_fail(line_no, "missing label");
    if (dim < 0) dim = col;
    if (col != dim) parse_fail(line_no, "inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty dataset");
  return assemble(std::move(rows), dim);
}

ParsedDataset make_synthetic_mixture(Eigen::Index k, Eigen::Index d, Eigen::Index per_class,
                                     double spread, std::uint64_t seed) {
  if (k < 1 || d < 1 || per_class < 1)
    throw std::invalid_argument("make_synthetic_mixture: k, d, per_class must be >= 1");
  if (spread < 0.0) throw std::invalid_argument("make_synthetic_mixture: spread must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  ParsedDataset out;
  out.features.resize(k * per_class, d);
  out.labels.reserve(k * per_class);
  out.label_values.reserve(k);
  for (Eigen::Index c = 0; c < k; ++c) out.label_values.push_back(static_cast<double>(c));
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    // signed axis grid: +e_0..+e_{d-1}, then -e_0..-e_{d-1}, then magnitude 2,
    // ...; every pair of class means is at least sqrt(2) apart for k <= 2d
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::Index level = c / (2 * d), rem = c % (2 * d);
    double sign = rem < d ? 1.0 : -1.0;
    mean[rem % d] = sign * (1.0 + static_cast<double>(level));
    for (Eigen::Index s = 0; s < per_class; ++s, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) out.features(row, j) = mean[j] + spread * noise(rng);
      out.labels.push_back(c);
    }
  }
  return out;
}

Eigen::MatrixXd AffineTransform::apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return (x.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array();
}

SslDataset SslDataset::split(const ParsedDataset& source, Eigen::Index n_labeled,
                             Eigen::Index n_test, std::uint64_t seed, bool stratified) {
  const Eigen::Index total = source.rows();
  if (n_labeled < 1 || n_test < 0 || n_labeled + n_test > total)
    throw std::invalid_argument("split: infeasible sizes");

  std::vector<Eigen::Index> order(total);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);

  SslDataset out;
  out.features_ = source.features;
  out.labels_ = source.labels;
  out.k_ = source.classes();
  out.tags_.assign(total, SplitTag::Unlabeled);

  // test rows first
  for (Eigen::Index i = 0; i < n_test; ++i) out.tags_[order[i]] = SplitTag::Test;

  if (!stratified) {
    for (Eigen::Index i = n_test; i < n_test + n_labeled; ++i) out.tags_[order[i]] = SplitTag::Labeled;
    return out;
  }

  // round-robin over classes in shuffled order keeps per-class counts within +-1
  std::vector<std::vector<Eigen::Index>> by_class(out.k_);
  for (Eigen::Index i = n_test; i < total; ++i) by_class[source.labels[order[i]]].push_back(order[i]);
  Eigen::Index assigned = 0;
  for (std::size_t depth = 0; assigned < n_labeled; ++depth) {
    bool any = false;
    for (Eigen::Index c = 0; c < out.k_ && assigned < n_labeled; ++c) {
      if (depth < by_class[c].size()) {
        out.tags_[by_class[c][depth]] = SplitTag::Labeled;
        ++assigned;
        any = true;
      }
    }
    if (!any && assigned < n_labeled)
      throw std::invalid_argument("split: not enough non-test rows for the labeled split");
  }
  return out;
}

namespace {

template <typename Pred>
std::vector<Eigen::Index> rows_where(const std::vector<SplitTag>& tags, Pred pred) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (pred(tags[i])) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<Eigen::Index> gather_labels(const std::vector<Eigen::Index>& labels,
                                        const std::vector<Eigen::Index>& rows) {
  std::vector<Eigen::Index> out;
  out.reserve(rows.size());
  for (Eigen::Index r : rows) out.push_back(labels[r]);
  return out;
}

}  // namespace

SslDataset::LabeledView SslDataset::labeled() const {
  auto rows = rows_where(tags_, [](SplitTag t) { return t == SplitTag::Labeled; });
  return {gather_rows(features_, rows), gather_labels(labels_, rows)};
}

SslDataset::UnlabeledView SslDataset::unlabeled() const {
  auto rows = rows_where(tags_, [](SplitTag t) { return t == SplitTag::Unlabeled; });
  return {gather_rows(features_, rows)};
}

SslDataset::TestView SslDataset::test() const {
  auto rows = rows_where(tags_, [](SplitTag t) { return t == SplitTag::Test; });
  return {gather_rows(features_, rows), gather_labels(labels_, rows)};
}

SslDataset::LabeledView SslDataset::fsl_training_view() const {
  auto rows = rows_where(tags_, [](SplitTag t) { return t != SplitTag::Test; });
  return {gather_rows(features_, rows), gather_labels(labels_, rows)};
}

std::vector<Eigen::Index> SslDataset::unlabeled_true_labels_for_eval() const {
  auto rows = rows_where(tags_, [](SplitTag t) { return t == SplitTag::Unlabeled; });
  return gather_labels(labels_, rows);
}

Eigen::Index SslDataset::labeled_count() const {
  return static_cast<Eigen::Index>(
      std::count(tags_.begin(), tags_.end(), SplitTag::Labeled));
}
Eigen::Index SslDataset::unlabeled_count() const {
  return static_cast<Eigen::Index>(
      std::count(tags_.begin(), tags_.end(), SplitTag::Unlabeled));
}
Eigen::Index SslDataset::test_count() const {
  return static_cast<Eigen::Index>(std::count(tags_.begin(), tags_.end(), SplitTag::Test));
}

AffineTransform SslDataset::normalize_features() {
  auto train_rows = rows_where(tags_, [](SplitTag t) { return t != SplitTag::Test; });
  if (train_rows.empty()) throw std::runtime_error("normalize_features: no training rows");
  const double n = static_cast<double>(train_rows.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim());
  for (Eigen::Index r : train_rows) mean += features_.row(r).transpose();
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim());
  for (Eigen::Index r : train_rows)
    var += (features_.row(r).transpose() - mean).array().square().matrix();
  var /= n;
  AffineTransform t;
  t.shift = mean;
  t.scale = var.array().sqrt();
  for (Eigen::Index j = 0; j < dim(); ++j)
    if (t.scale[j] == 0.0) t.scale[j] = 1.0;  // constant column: shift only
  features_ = t.apply(features_);
  return t;
}

SslDataset SslDataset::with_unlabeled_class_imbalance(const std::vector<double>& keep_fraction,
                                                      std::uint64_t seed) const {
  if (static_cast<Eigen::Index>(keep_fraction.size()) != k_)
    throw std::invalid_argument("keep_fraction needs one entry per class");
  std::mt19937_64 rng(derive_seed(seed, "imbalance"));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  auto keep_rows = rows_where(tags_, [](SplitTag t) { return t != SplitTag::Unlabeled; });
  auto unlabeled_rows = rows_where(tags_, [](SplitTag t) { return t == SplitTag::Unlabeled; });
  std::vector<Eigen::Index> kept = keep_rows;
  for (Eigen::Index r : unlabeled_rows)
    if (u(rng) < keep_fraction[labels_[r]]) kept.push_back(r);
  std::sort(kept.begin(), kept.end());

  SslDataset out;
  out.features_ = gather_rows(features_, kept);
  out.labels_ = gather_labels(labels_, kept);
  out.k_ = k_;
  out.tags_.reserve(kept.size());
  for (Eigen::Index r : kept) out.tags_.push_back(tags_[r]);
  return out;
}

namespace {
constexpr char kCacheMagic[8] = {'D', 'R', 'S', 'K', 'D', 'S', '0', '1'};
}

void save_dataset_cache(const ParsedDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kCacheMagic, sizeof(kCacheMagic));
  std::uint64_t rows = data.rows(), dim = data.dim(), classes = data.classes();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&classes), sizeof(classes));
  out.write(reinterpret_cast<const char*>(data.label_values.data()),
            static_cast<std::streamsize>(classes * sizeof(double)));
  for (Eigen::Index l : data.labels) {
    std::uint64_t v = static_cast<std::uint64_t>(l);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.dim(); ++c) {
      double v = data.features(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ParsedDataset load_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + " is not a derisk dataset cache");
  std::uint64_t rows = 0, dim = 0, classes = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&classes), sizeof(classes));
  if (!in || rows > (1ull << 32) || dim > (1ull << 24)) throw std::runtime_error("corrupt cache");
  ParsedDataset data;
  data.label_values.resize(classes);
  in.read(reinterpret_cast<char*>(data.label_values.data()),
          static_cast<std::streamsize>(classes * sizeof(double)));
  data.labels.resize(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    data.labels[i] = static_cast<Eigen::Index>(v);
  }
  data.features.resize(rows, dim);
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < dim; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      data.features(r, c) = v;
    }
  if (!in) throw std::runtime_error("corrupt cache");
  return data;
}

ParsedDataset load_dataset_file(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".dsc") return load_dataset_cache(path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (ext == ".csv") return parse_dense_csv(in);
  return parse_sparse_dataset(in);
}

}  // namespace derisk
